use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheduler::Policy;

/// Slope tolerance around -1/2 inside which a tail counts as `1/sqrt(n)`.
pub const REGIME_TOL: f64 = 0.1;
pub const MIN_TAIL_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub total_shots: u64,
    pub sigma: f64,
    pub bias: f64,
    pub realizations: usize,
}

/// Spread of the estimate around the exact value versus total shots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCurve {
    pub policy: Policy,
    pub points: Vec<CurvePoint>,
}

/// `sqrt(sum (exact - F_i)^2 / (m - 1))` and `mean(F_i - exact)`.
pub fn sigma_and_bias(estimates: impl IntoIterator<Item = f64>, exact: f64) -> (f64, f64, usize) {
    let (mut sq, mut sum, mut m) = (0.0, 0.0, 0usize);
    for f in estimates {
        let d = f - exact;
        sq += d * d;
        sum += d;
        m += 1;
    }
    if m < 2 {
        return (f64::NAN, f64::NAN, m);
    }
    ((sq / (m - 1) as f64).sqrt(), sum / m as f64, m)
}

impl ConvergenceCurve {
    /// Builds the curve from `estimates[realization][checkpoint]`.
    pub fn from_estimates(policy: Policy, checkpoints: &[u64], estimates: &[Vec<f64>], exact: f64) -> Self {
        Self::from_rows(policy, checkpoints, estimates.iter().map(|r| r.as_slice()), exact)
    }

    pub(crate) fn from_rows<'a>(
        policy: Policy,
        checkpoints: &[u64],
        rows: impl Iterator<Item = &'a [f64]> + Clone,
        exact: f64,
    ) -> Self {
        let points = checkpoints
            .iter()
            .enumerate()
            .map(|(c, &n)| {
                let (sigma, bias, m) = sigma_and_bias(rows.clone().map(|r| r[c]), exact);
                CurvePoint {
                    total_shots: n,
                    sigma,
                    bias,
                    realizations: m,
                }
            })
            .collect();
        Self { policy, points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    /// Natural-log intercept: `ln sigma = slope * ln n + intercept`.
    pub intercept: f64,
}

impl LineFit {
    pub fn sigma_at(&self, n: f64) -> f64 {
        (self.slope * n.ln() + self.intercept).exp()
    }

    /// Shot count at which the fitted line reaches `sigma`.
    pub fn shots_for(&self, sigma: f64) -> f64 {
        ((sigma.ln() - self.intercept) / self.slope).exp()
    }
}

fn tail(curve: &ConvergenceCurve, tail_fraction: f64) -> Result<&[CurvePoint]> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("tail fraction {tail_fraction} outside (0, 1]")));
    }
    let len = curve.points.len();
    let k = ((len as f64 * tail_fraction).ceil() as usize).min(len);
    let pts = &curve.points[len - k..];
    let usable = pts.iter().filter(|p| p.sigma > 0.0 && p.sigma.is_finite()).count();
    if usable < MIN_TAIL_POINTS || usable < pts.len() {
        return Err(Error::TooFewPoints {
            needed: MIN_TAIL_POINTS.max(pts.len()),
            found: usable,
        });
    }
    Ok(pts)
}

/// Least-squares fit of `ln sigma` against `ln n` over the last
/// `tail_fraction` of the checkpoints.
pub fn fit_tail_slope(curve: &ConvergenceCurve, tail_fraction: f64) -> Result<LineFit> {
    let pts = tail(curve, tail_fraction)?;
    let xs: Vec<f64> = pts.iter().map(|p| (p.total_shots as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.sigma.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: 1,
        });
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

fn check_regime(curve: &ConvergenceCurve, fit: &LineFit) -> Result<()> {
    if (fit.slope + 0.5).abs() > REGIME_TOL {
        return Err(Error::NotInRegime {
            curve: curve.policy.name().to_string(),
            slope: fit.slope,
        });
    }
    Ok(())
}

/// Ratio of shots the conventional curve needs to match the active-learning
/// curve's sigma, geometric mean over the active-learning tail checkpoints.
/// Both sides are read off their fitted tail lines.
pub fn improvement_ratio(conventional: &ConvergenceCurve, active: &ConvergenceCurve, tail_fraction: f64) -> Result<f64> {
    let fc = fit_tail_slope(conventional, tail_fraction)?;
    let fa = fit_tail_slope(active, tail_fraction)?;
    check_regime(conventional, &fc)?;
    check_regime(active, &fa)?;
    let pts = tail(active, tail_fraction)?;
    let log_mean = pts
        .iter()
        .map(|p| {
            let n = p.total_shots as f64;
            fc.shots_for(fa.sigma_at(n)).ln() - n.ln()
        })
        .sum::<f64>()
        / pts.len() as f64;
    Ok(log_mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic(policy: Policy, scale: f64, shots: &[u64]) -> ConvergenceCurve {
        ConvergenceCurve {
            policy,
            points: shots
                .iter()
                .map(|&n| CurvePoint {
                    total_shots: n,
                    sigma: scale / (n as f64).sqrt(),
                    bias: 0.0,
                    realizations: 100,
                })
                .collect(),
        }
    }

    const SHOTS: [u64; 10] = [100, 200, 400, 800, 1600, 3200, 6400, 12800, 25600, 51200];

    #[test]
    fn sigma_by_hand() {
        let (s, b, m) = sigma_and_bias([0.9, 1.1], 1.0);
        assert_abs_diff_eq!(s, 0.02f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.14142, epsilon = 1e-5);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-15);
        assert_eq!(m, 2);
        let (s, _, _) = sigma_and_bias([0.7; 5], 0.7);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let fit = fit_tail_slope(&synthetic(Policy::Uniform, 3.0, &SHOTS), 0.5).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        let c = synthetic(Policy::Uniform, 1.0, &SHOTS[..4]);
        assert!(matches!(fit_tail_slope(&c, 1.0), Err(Error::TooFewPoints { .. })));
        let mut c = synthetic(Policy::Uniform, 1.0, &SHOTS);
        c.points[9].sigma = 0.0;
        assert!(fit_tail_slope(&c, 0.5).is_err());
    }

    #[test]
    fn identical_curves_give_unit_improvement() {
        let c = synthetic(Policy::Uniform, 2.0, &SHOTS);
        let a = synthetic(Policy::ActiveLearning, 2.0, &SHOTS);
        assert_abs_diff_eq!(improvement_ratio(&c, &a, 0.5).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shifted_curve_gives_factor_two() {
        // sigma_c(2n) = sigma_a(n)  <=>  scale_c = scale_a * sqrt(2)
        let c = synthetic(Policy::Uniform, 2.0 * 2f64.sqrt(), &SHOTS);
        let a = synthetic(Policy::ActiveLearning, 2.0, &SHOTS);
        assert_abs_diff_eq!(improvement_ratio(&c, &a, 0.5).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_tails_outside_the_regime() {
        let c = synthetic(Policy::Uniform, 1.0, &SHOTS);
        let mut a = synthetic(Policy::ActiveLearning, 1.0, &SHOTS);
        for p in a.points.iter_mut() {
            p.sigma = 1.0 / (p.total_shots as f64).powf(0.8);
        }
        assert!(matches!(improvement_ratio(&c, &a, 0.5), Err(Error::NotInRegime { .. })));
    }
}

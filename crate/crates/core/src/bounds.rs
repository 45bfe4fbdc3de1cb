//! Per-observable sample statistics and concentration radii.
//!
//! All radii are for the mean of `n` i.i.d. samples of a dichotomic
//! observable whose two outcomes differ by `sqrt(outcome_gap_sq)`.
//!
//! * Empirical Bernstein: `sqrt(2 v ln(2/d) / n) + 7 ln(2/d) / (3(n-1))`
//! * Dichotomic, true variance `v = p(1-p) gap^2`: `sqrt(2 v ln(1/d) / n)`
//! * Modified (heuristic): `sqrt(2 v ln(1/d) / n) + (gap^2 - 4v) ln(2/d) / (4n) + 1/n`
//!
//! `v` is the unbiased empirical variance except in the dichotomic case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Welford running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObservableStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl ObservableStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&mut self, sample: f64) {
        self.n += 1;
        let delta = sample - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (sample - self.mean);
    }

    /// Combines two disjoint sample streams.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Self { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased empirical variance, `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).max(0.0))
    }

    fn n_and_variance(&self) -> Result<(f64, f64)> {
        match self.variance() {
            Some(v) => Ok((self.n as f64, v)),
            None => Err(Error::InsufficientSamples(self.n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    delta: f64,
    outcome_gap_sq: f64,
    ln_inv_delta: f64,
    ln_two_over_delta: f64,
}

impl BoundParams {
    /// Outcome gap for `+1`/`-1` observables: `(1 - (-1))^2`.
    pub const PAULI_GAP_SQ: f64 = 4.0;

    pub fn new(delta: f64, outcome_gap_sq: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta={delta} must lie in (0, 1)")));
        }
        if !(outcome_gap_sq > 0.0 && outcome_gap_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "outcome_gap_sq={outcome_gap_sq} must be positive"
            )));
        }
        Ok(Self {
            delta,
            outcome_gap_sq,
            ln_inv_delta: (1.0 / delta).ln(),
            ln_two_over_delta: (2.0 / delta).ln(),
        })
    }

    pub fn pauli(delta: f64) -> Result<Self> {
        Self::new(delta, Self::PAULI_GAP_SQ)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn outcome_gap_sq(&self) -> f64 {
        self.outcome_gap_sq
    }
}

impl Default for BoundParams {
    fn default() -> Self {
        Self::pauli(0.1).expect("default delta is valid")
    }
}

/// Which radius drives ranking and the reported error bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    #[default]
    Modified,
    Bernstein,
}

impl BoundKind {
    /// Radius for `n >= 2` samples with empirical variance `variance`.
    #[inline]
    pub fn radius(self, n: f64, variance: f64, params: &BoundParams) -> f64 {
        match self {
            BoundKind::Modified => modified_radius(n, variance, params),
            BoundKind::Bernstein => bernstein_radius(n, variance, params),
        }
    }

    /// `radius(n) - radius(n + 1)` at fixed variance.
    #[inline]
    pub fn reduction(self, n: f64, variance: f64, params: &BoundParams) -> f64 {
        self.radius(n, variance, params) - self.radius(n + 1.0, variance, params)
    }
}

#[inline]
pub fn bernstein_radius(n: f64, variance: f64, params: &BoundParams) -> f64 {
    let l = params.ln_two_over_delta;
    (2.0 * variance * l / n).sqrt() + 7.0 * l / (3.0 * (n - 1.0))
}

/// The low-variance correction is floored at zero: the `n - 1` normalization
/// lets `v_e` exceed `gap^2 / 4` on short streams, which would otherwise make
/// the radius grow with `n`.
#[inline]
pub fn modified_radius(n: f64, variance: f64, params: &BoundParams) -> f64 {
    (2.0 * variance * params.ln_inv_delta / n).sqrt()
        + (params.outcome_gap_sq - 4.0 * variance).max(0.0) * params.ln_two_over_delta / (4.0 * n)
        + 1.0 / n
}

pub fn epsilon_bernstein(stats: &ObservableStats, params: &BoundParams) -> Result<f64> {
    let (n, v) = stats.n_and_variance()?;
    Ok(bernstein_radius(n, v, params))
}

pub fn epsilon_modified(stats: &ObservableStats, params: &BoundParams) -> Result<f64> {
    let (n, v) = stats.n_and_variance()?;
    Ok(modified_radius(n, v, params))
}

/// Uses the true outcome probability, so only meaningful as a reference.
pub fn epsilon_dichotomic_oracle(n: u64, p: f64, params: &BoundParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p={p} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::InsufficientSamples(0));
    }
    let v = p * (1.0 - p) * params.outcome_gap_sq;
    Ok((2.0 * v * params.ln_inv_delta / n as f64).sqrt())
}

/// Predicted drop of the modified radius from one more sample, holding the
/// empirical variance fixed.
pub fn expected_reduction(stats: &ObservableStats, params: &BoundParams) -> Result<f64> {
    expected_reduction_with(BoundKind::Modified, stats, params)
}

pub fn expected_reduction_with(kind: BoundKind, stats: &ObservableStats, params: &BoundParams) -> Result<f64> {
    let (n, v) = stats.n_and_variance()?;
    Ok(kind.reduction(n, v, params))
}

//! Shot allocation over measurement settings.
//!
//! Every run starts with two shots per setting so that each observable has
//! an empirical variance. After that a [`Policy`] picks the next setting:
//!
//! * [`Policy::Uniform`] cycles through settings in a fixed order.
//! * [`Policy::ActiveLearning`] picks the setting with the largest weight
//!   `w = sum_members |a_j| (eps(n_j) - eps(n_j + 1))`, the eps difference
//!   taken at the member's current empirical variance. Ties go to the setting
//!   with fewer shots, then to the lower index.
//!
//! Samples are pooled per observable: a sub-string resolved by several
//! settings accumulates every sample from all of them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundKind, BoundParams, ObservableStats};
use crate::decomposition::{Decomposition, FidelityTask};
use crate::error::{Error, Result};
use crate::quantum::{group_outcome_distribution, sample_group_shot, OutcomeDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "al")]
    ActiveLearning,
    #[serde(rename = "uniform")]
    Uniform,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::ActiveLearning => "al",
            Policy::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "al" | "active-learning" => Ok(Policy::ActiveLearning),
            "uniform" => Ok(Policy::Uniform),
            _ => Err(Error::Config(format!("unknown policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub params: BoundParams,
    /// Radius used for ranking and for the reported bound.
    pub bound: BoundKind,
    /// Shots taken per selection.
    pub batch_size: u64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            params: BoundParams::default(),
            bound: BoundKind::Modified,
            batch_size: 1,
        }
    }
}

/// A task prepared for simulation: outcome distributions per setting and the
/// index tables the allocation loop needs. Shared read-only by realizations.
#[derive(Debug, Clone)]
pub struct Experiment {
    task: FidelityTask,
    distributions: Vec<OutcomeDistribution>,
    /// Per setting: `(term index, support mask)` of every member.
    members: Vec<Vec<(u32, u32)>>,
    /// Per term: settings that resolve it.
    term_settings: Vec<Vec<u32>>,
    abs_coefficients: Vec<f64>,
}

impl Experiment {
    pub fn new(task: FidelityTask) -> Result<Self> {
        let d = &task.decomposition;
        if d.settings().is_empty() {
            return Err(Error::NoSettings);
        }
        let distributions = d
            .settings()
            .iter()
            .map(|s| group_outcome_distribution(&task.prepared[s.probe], &s.group))
            .collect::<Result<Vec<_>>>()?;
        let mut term_settings = vec![Vec::new(); d.terms().len()];
        let members = d
            .settings()
            .iter()
            .enumerate()
            .map(|(si, s)| {
                s.members
                    .iter()
                    .map(|&t| {
                        term_settings[t].push(si as u32);
                        (t as u32, d.terms()[t].key.pauli.support_mask())
                    })
                    .collect()
            })
            .collect();
        let abs_coefficients = d.terms().iter().map(|t| t.coefficient.abs()).collect();
        Ok(Self {
            task,
            distributions,
            members,
            term_settings,
            abs_coefficients,
        })
    }

    pub fn task(&self) -> &FidelityTask {
        &self.task
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.task.decomposition
    }

    pub fn distributions(&self) -> &[OutcomeDistribution] {
        &self.distributions
    }

    pub fn num_settings(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Stop after exactly this many total shots.
    Budget(u64),
    /// Stop once the summed error bound drops to this value.
    BoundTarget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub total_shots: u64,
    pub estimate: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One point per requested checkpoint that was reached.
    pub points: Vec<TrajectoryPoint>,
    pub last: TrajectoryPoint,
}

/// Mutable bookkeeping for one realization.
#[derive(Debug, Clone)]
pub struct AllocationState<'a> {
    experiment: &'a Experiment,
    config: SchedulerConfig,
    stats: Vec<ObservableStats>,
    shots: Vec<u64>,
    total: u64,
    initialized: bool,
    cursor: usize,
    // Active-learning cache: |a| * reduction per term and weight per setting,
    // refreshed lazily for terms that received samples.
    weighted_reduction: Vec<f64>,
    weights: Vec<f64>,
    touched: Vec<bool>,
    touched_list: Vec<u32>,
    dirty: Vec<bool>,
    dirty_list: Vec<u32>,
}

impl<'a> AllocationState<'a> {
    pub fn new(experiment: &'a Experiment, config: SchedulerConfig) -> Self {
        let terms = experiment.decomposition().terms().len();
        let settings = experiment.num_settings();
        Self {
            experiment,
            config,
            stats: vec![ObservableStats::new(); terms],
            shots: vec![0; settings],
            total: 0,
            initialized: false,
            cursor: 0,
            weighted_reduction: vec![0.0; terms],
            weights: vec![0.0; settings],
            touched: vec![false; terms],
            touched_list: Vec::with_capacity(terms),
            dirty: vec![false; settings],
            dirty_list: Vec::with_capacity(settings),
        }
    }

    pub fn experiment(&self) -> &'a Experiment {
        self.experiment
    }

    pub fn total_shots(&self) -> u64 {
        self.total
    }

    pub fn shots_per_setting(&self) -> &[u64] {
        &self.shots
    }

    pub fn stats(&self) -> &[ObservableStats] {
        &self.stats
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Two shots of every setting, in two ordered passes.
    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.total != 0 || self.initialized {
            return Err(Error::InvalidParameter("scheduler state is not fresh".into()));
        }
        for _ in 0..2 {
            for s in 0..self.shots.len() {
                self.take_shot(s, rng);
            }
        }
        self.initialized = true;
        self.cursor = 0;
        Ok(())
    }

    /// Samples one shot of `setting` and feeds every member observable.
    #[inline]
    pub fn take_shot<R: Rng + ?Sized>(&mut self, setting: usize, rng: &mut R) {
        let outcome = sample_group_shot(&self.experiment.distributions[setting], rng);
        for &(term, mask) in &self.experiment.members[setting] {
            let t = term as usize;
            self.stats[t].record(outcome.parity(mask) as f64);
            if !self.touched[t] {
                self.touched[t] = true;
                self.touched_list.push(term);
            }
        }
        self.shots[setting] += 1;
        self.total += 1;
    }

    fn member_reduction(&self, term: usize) -> Result<f64> {
        let stats = &self.stats[term];
        let variance = stats.variance().ok_or(Error::InsufficientSamples(stats.count()))?;
        Ok(self.experiment.abs_coefficients[term]
            * self
                .config
                .bound
                .reduction(stats.count() as f64, variance, &self.config.params))
    }

    /// `sum_members |a_j| * reduction_j`, computed from the current statistics.
    pub fn setting_weight(&self, setting: usize) -> Result<f64> {
        let members = self
            .experiment
            .members
            .get(setting)
            .ok_or_else(|| Error::InvalidParameter(format!("setting {setting} out of range")))?;
        let mut w = 0.0;
        for &(term, _) in members {
            w += self.member_reduction(term as usize)?;
        }
        Ok(w)
    }

    fn refresh_weights(&mut self) -> Result<()> {
        for i in 0..self.touched_list.len() {
            let t = self.touched_list[i] as usize;
            self.touched[t] = false;
            self.weighted_reduction[t] = self.member_reduction(t)?;
            for &s in &self.experiment.term_settings[t] {
                if !self.dirty[s as usize] {
                    self.dirty[s as usize] = true;
                    self.dirty_list.push(s);
                }
            }
        }
        self.touched_list.clear();
        for i in 0..self.dirty_list.len() {
            let s = self.dirty_list[i] as usize;
            self.dirty[s] = false;
            // Same summation order as `setting_weight`, so cached and fresh
            // weights agree bit for bit.
            let mut w = 0.0;
            for &(term, _) in &self.experiment.members[s] {
                w += self.weighted_reduction[term as usize];
            }
            self.weights[s] = w;
        }
        self.dirty_list.clear();
        Ok(())
    }

    pub fn select_next(&mut self, policy: Policy) -> Result<usize> {
        if !self.initialized {
            return Err(Error::InvalidParameter("scheduler is not initialized".into()));
        }
        let count = self.shots.len();
        match policy {
            Policy::Uniform => {
                let s = self.cursor;
                self.cursor = (self.cursor + 1) % count;
                Ok(s)
            }
            Policy::ActiveLearning => {
                self.refresh_weights()?;
                let mut best = 0;
                for s in 1..count {
                    let (w, wb) = (self.weights[s], self.weights[best]);
                    if w > wb || (w == wb && self.shots[s] < self.shots[best]) {
                        best = s;
                    }
                }
                Ok(best)
            }
        }
    }

    /// `Q_e = constant + sum a_j mean_j` with bound `sum |a_j| eps_j`.
    pub fn estimate(&self) -> Result<Estimate> {
        let d = self.experiment.decomposition();
        let mut value = d.constant();
        let mut bound = 0.0;
        for (term, stats) in d.terms().iter().zip(&self.stats) {
            let variance = stats.variance().ok_or(Error::InsufficientSamples(stats.count()))?;
            value += term.coefficient * stats.mean();
            bound += term.coefficient.abs()
                * self
                    .config
                    .bound
                    .radius(stats.count() as f64, variance, &self.config.params);
        }
        Ok(Estimate { value, bound })
    }

    fn point(&self) -> Result<TrajectoryPoint> {
        let e = self.estimate()?;
        Ok(TrajectoryPoint {
            total_shots: self.total,
            estimate: e.value,
            bound: e.bound,
        })
    }

    /// Runs the allocation loop until `stop`, recording the estimate at
    /// every checkpoint (strictly increasing total-shot counts). Checkpoints
    /// below the current shot count are skipped.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        policy: Policy,
        stop: Stop,
        checkpoints: &[u64],
        rng: &mut R,
    ) -> Result<Trajectory> {
        if !self.initialized {
            return Err(Error::InvalidParameter("scheduler is not initialized".into()));
        }
        match stop {
            Stop::Budget(n) if n < self.total => {
                return Err(Error::InvalidParameter(format!(
                    "budget {n} is below the {} shots already taken",
                    self.total
                )))
            }
            Stop::BoundTarget(eps) if !(eps > 0.0) => {
                return Err(Error::InvalidParameter(format!("bound target {eps} must be positive")))
            }
            _ => {}
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("checkpoints must be strictly increasing".into()));
        }
        let batch = self.config.batch_size.max(1);
        let mut points = Vec::new();
        let mut next = checkpoints.partition_point(|c| *c < self.total);
        loop {
            if next < checkpoints.len() && checkpoints[next] == self.total {
                points.push(self.point()?);
                next += 1;
            }
            let done = match stop {
                Stop::Budget(n) => self.total >= n,
                Stop::BoundTarget(eps) => self.estimate()?.bound <= eps,
            };
            if done {
                break;
            }
            let mut step = batch;
            if let Stop::Budget(n) = stop {
                step = step.min(n - self.total);
            }
            if next < checkpoints.len() {
                step = step.min(checkpoints[next] - self.total);
            }
            let s = self.select_next(policy)?;
            for _ in 0..step {
                self.take_shot(s, rng);
            }
        }
        Ok(Trajectory {
            points,
            last: self.point()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::expected_reduction;
    use crate::quantum::{gates, haar_random_state, Channel, StateVector};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn haar_experiment(n: usize, seed: u64) -> Experiment {
        let psi = haar_random_state(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        Experiment::new(FidelityTask::state_fidelity(&psi, psi.clone().into()).unwrap()).unwrap()
    }

    #[test]
    fn initialization_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (n, cost) in [(1, 6), (4, 162)] {
            let exp = haar_experiment(n, 1);
            let mut st = AllocationState::new(&exp, SchedulerConfig::default());
            st.initialize(&mut rng).unwrap();
            assert_eq!(st.total_shots(), cost);
            assert!(st.stats().iter().all(|s| s.count() >= 2));
            assert!(st.initialize(&mut rng).is_err());
        }
        let mut urng = ChaCha8Rng::seed_from_u64(4);
        let u = {
            // Random two-qubit unitary via QR of a complex Gaussian matrix.
            let g = nalgebra::DMatrix::from_fn(4, 4, |_, _| {
                num_complex::Complex64::new(
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut urng),
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut urng),
                )
            });
            g.qr().q()
        };
        let ch = Channel::ideal(u.clone()).unwrap();
        let exp = Experiment::new(FidelityTask::gate_fidelity(&u, &ch).unwrap()).unwrap();
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        st.initialize(&mut rng).unwrap();
        assert_eq!(st.total_shots(), 450);
    }

    #[test]
    fn uniform_cycles_settings() {
        let exp = haar_experiment(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        assert!(st.select_next(Policy::Uniform).is_err());
        st.initialize(&mut rng).unwrap();
        for step in 0..40 {
            let s = st.select_next(Policy::Uniform).unwrap();
            assert_eq!(s, step % 9);
            st.take_shot(s, &mut rng);
            let max = st.shots_per_setting().iter().max().unwrap();
            let min = st.shots_per_setting().iter().min().unwrap();
            assert!(max - min <= 1);
        }
    }

    #[test]
    fn cached_weights_match_fresh_weights() {
        let exp = haar_experiment(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        st.initialize(&mut rng).unwrap();
        for _ in 0..300 {
            let s = st.select_next(Policy::ActiveLearning).unwrap();
            for k in 0..exp.num_settings() {
                assert_eq!(st.weights[k], st.setting_weight(k).unwrap());
            }
            let best = (0..exp.num_settings())
                .map(|k| st.setting_weight(k).unwrap())
                .fold(f64::MIN, f64::max);
            assert_eq!(st.setting_weight(s).unwrap(), best);
            st.take_shot(s, &mut rng);
        }
    }

    #[test]
    fn single_member_weight_and_doubling() {
        // |0> has one term (Z, 1/2) in one setting.
        let zero = StateVector::basis(1, 0).unwrap();
        let exp = Experiment::new(FidelityTask::state_fidelity(&zero, zero.clone().into()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        st.initialize(&mut rng).unwrap();
        let p = BoundParams::default();
        let expected = 0.5 * expected_reduction(&st.stats()[0], &p).unwrap();
        assert_eq!(st.setting_weight(0).unwrap(), expected);
        let before = st.setting_weight(0).unwrap();
        st.take_shot(0, &mut rng);
        st.take_shot(0, &mut rng);
        assert!(st.setting_weight(0).unwrap() < before);
    }

    #[test]
    fn estimate_for_zero_state() {
        let zero = StateVector::basis(1, 0).unwrap();
        let exp = Experiment::new(FidelityTask::state_fidelity(&zero, zero.clone().into()).unwrap()).unwrap();
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        assert!(st.estimate().is_err());
        // Mock <Z>_e = 0.8 from nine +1 and one -1.
        for x in [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0] {
            st.stats[0].record(x);
        }
        let e = st.estimate().unwrap();
        assert_abs_diff_eq!(e.value, 0.9, epsilon = 1e-12);
        assert!(e.bound > 0.0);
    }

    #[test]
    fn exact_means_give_exact_value() {
        let exp = haar_experiment(2, 5);
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        let d = exp.decomposition();
        for (i, t) in d.terms().iter().enumerate() {
            let mean = crate::quantum::exact_expectation(&exp.task().prepared[0], &t.key.pauli).unwrap();
            st.stats[i] = ObservableStats::new();
            // Two samples whose mean is the exact expectation.
            st.stats[i].record(mean + 0.1);
            st.stats[i].record(mean - 0.1);
        }
        assert_abs_diff_eq!(st.estimate().unwrap().value, d.exact_value(), epsilon = 1e-12);
    }

    #[test]
    fn al_prefers_the_dominant_setting() {
        let ch = Channel::ideal(gates::identity(1)).unwrap();
        let task = FidelityTask::gate_fidelity(&gates::identity(1), &ch).unwrap();
        let exp = Experiment::new(task).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        st.initialize(&mut rng).unwrap();
        let s = st.select_next(Policy::ActiveLearning).unwrap();
        let weights: Vec<f64> = (0..exp.num_settings()).map(|k| st.setting_weight(k).unwrap()).collect();
        assert!(weights.iter().all(|w| *w <= weights[s]));
    }

    #[test]
    fn run_records_checkpoints_and_stops() {
        let exp = haar_experiment(2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = AllocationState::new(&exp, SchedulerConfig::default());
        st.initialize(&mut rng).unwrap();
        let cps = [10, 18, 50, 100, 400];
        let tr = st.run(Policy::ActiveLearning, Stop::Budget(100), &cps, &mut rng).unwrap();
        let got: Vec<u64> = tr.points.iter().map(|p| p.total_shots).collect();
        assert_eq!(got, vec![18, 50, 100]);
        assert_eq!(tr.last.total_shots, 100);
        assert_eq!(st.shots_per_setting().iter().sum::<u64>(), 100);

        let tr = st.run(Policy::Uniform, Stop::BoundTarget(0.5), &[], &mut rng).unwrap();
        assert!(tr.last.bound <= 0.5);
        assert!(st.run(Policy::Uniform, Stop::Budget(5), &[], &mut rng).is_err());
        assert!(st.run(Policy::Uniform, Stop::BoundTarget(0.0), &[], &mut rng).is_err());
        assert!(st
            .run(Policy::Uniform, Stop::Budget(10_000), &[600, 500], &mut rng)
            .is_err());
    }

    #[test]
    fn batches_do_not_skip_checkpoints() {
        let exp = haar_experiment(2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = SchedulerConfig {
            batch_size: 7,
            ..Default::default()
        };
        let mut st = AllocationState::new(&exp, config);
        st.initialize(&mut rng).unwrap();
        let tr = st.run(Policy::ActiveLearning, Stop::Budget(101), &[20, 33, 64], &mut rng).unwrap();
        let got: Vec<u64> = tr.points.iter().map(|p| p.total_shots).collect();
        assert_eq!(got, vec![20, 33, 64]);
        assert_eq!(st.total_shots(), 101);
    }

    #[test]
    fn deterministic_given_seed() {
        let exp = haar_experiment(3, 2);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut st = AllocationState::new(&exp, SchedulerConfig::default());
            st.initialize(&mut rng).unwrap();
            st.run(Policy::ActiveLearning, Stop::Budget(500), &[100, 300], &mut rng)
                .unwrap()
        };
        assert_eq!(run(), run());
    }
}

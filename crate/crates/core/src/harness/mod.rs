//! Monte-Carlo realizations of the allocation loop and their statistics.
//!
//! Every realization owns a ChaCha8 stream seeded from the master seed and
//! its own index, so results do not depend on how realizations are spread
//! over worker threads.

mod curve;
mod output;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use curve::{
    fit_tail_slope, improvement_ratio, sigma_and_bias, ConvergenceCurve, CurvePoint, LineFit, MIN_TAIL_POINTS,
    REGIME_TOL,
};
pub use output::{
    format_float, summary_json, write_curves_csv, write_improvement_csv, write_summary_json, CURVES_HEADER,
    IMPROVEMENT_HEADER,
};

use crate::bounds::{BoundKind, BoundParams};
use crate::decomposition::FidelityTask;
use crate::error::{Error, Result};
use crate::quantum::{haar_random_state, Channel, ChannelKind, QuantumState, StateVector};
use crate::scheduler::{AllocationState, Experiment, Policy, SchedulerConfig, Stop};

const TAG_TARGET: u64 = 0x7461_7267;
const TAG_REALIZATION: u64 = 0x7265_616c;
const TAG_BOOTSTRAP: u64 = 0x626f_6f74;
const TAG_SWEEP: u64 = 0x7377_6570;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a master seed with a path of stream identifiers.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |h, p| splitmix64(h ^ splitmix64(*p)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    /// Drawn from the master seed.
    Haar,
    Given(StateVector),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentalState {
    /// The measured state is the target itself.
    Target,
    Given(QuantumState),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    StateFidelity {
        qubits: usize,
        target: TargetSource,
        experimental: ExperimentalState,
    },
    GateFidelity {
        name: String,
        unitary: DMatrix<Complex64>,
        channel: ChannelKind,
    },
}

impl TaskSpec {
    pub fn label(&self) -> String {
        match self {
            TaskSpec::StateFidelity { qubits, .. } => format!("state-fidelity/{qubits}q"),
            TaskSpec::GateFidelity { name, channel, .. } => match channel {
                ChannelKind::IdealUnitary => format!("gate-fidelity/{name}/ideal"),
                ChannelKind::Depolarizing { p } => format!("gate-fidelity/{name}/depol:{p}"),
            },
        }
    }

    pub fn build(&self, seed: u64) -> Result<FidelityTask> {
        match self {
            TaskSpec::StateFidelity {
                qubits,
                target,
                experimental,
            } => {
                let psi = match target {
                    TargetSource::Haar => {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_TARGET]));
                        haar_random_state(*qubits, &mut rng)?
                    }
                    TargetSource::Given(s) => s.clone(),
                };
                if psi.num_qubits() != *qubits {
                    return Err(Error::DimensionMismatch {
                        expected: *qubits,
                        found: psi.num_qubits(),
                    });
                }
                let rho = match experimental {
                    ExperimentalState::Target => QuantumState::Pure(psi.clone()),
                    ExperimentalState::Given(r) => r.clone(),
                };
                FidelityTask::state_fidelity(&psi, rho)
            }
            TaskSpec::GateFidelity { unitary, channel, .. } => {
                let ch = Channel::new(*channel, unitary.clone())?;
                FidelityTask::gate_fidelity(unitary, &ch)
            }
        }
    }

    fn describe(&self) -> serde_json::Value {
        let pairs = |v: &mut dyn Iterator<Item = Complex64>| -> Vec<[f64; 2]> { v.map(|c| [c.re, c.im]).collect() };
        match self {
            TaskSpec::StateFidelity {
                qubits,
                target,
                experimental,
            } => {
                let target = match target {
                    TargetSource::Haar => json!("haar"),
                    TargetSource::Given(s) => json!(pairs(&mut s.amplitudes().iter().copied())),
                };
                let experimental = match experimental {
                    ExperimentalState::Target => json!("pure"),
                    ExperimentalState::Given(r) => {
                        let m = r.to_density();
                        let dim = m.matrix().nrows();
                        let rows = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j)));
                        json!(pairs(&mut rows.map(|(i, j)| m.matrix()[(i, j)])))
                    }
                };
                json!({"kind": "state-fidelity", "qubits": qubits, "target": target, "rho": experimental})
            }
            TaskSpec::GateFidelity { name, unitary, channel } => {
                let dim = unitary.nrows();
                let rows = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j)));
                json!({
                    "kind": "gate-fidelity",
                    "gate": name,
                    "unitary": pairs(&mut rows.map(|(i, j)| unitary[(i, j)])),
                    "channel": channel,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub policies: Vec<Policy>,
    /// Independent realizations per policy.
    pub realizations: usize,
    pub n_max: u64,
    /// Total-shot checkpoints; `None` selects a log-spaced grid.
    pub checkpoints: Option<Vec<u64>>,
    pub delta: f64,
    pub bound: BoundKind,
    pub batch_size: u64,
    pub seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub tail_fraction: f64,
    /// Bootstrap resamples for the improvement interval; 0 disables it.
    pub bootstrap: usize,
}

impl ExperimentConfig {
    pub fn new(task: TaskSpec) -> Self {
        Self {
            task,
            policies: vec![Policy::ActiveLearning, Policy::Uniform],
            realizations: 2000,
            n_max: 100_000,
            checkpoints: None,
            delta: 0.1,
            bound: BoundKind::Modified,
            batch_size: 1,
            seed: 0,
            workers: 0,
            tail_fraction: 0.5,
            bootstrap: 200,
        }
    }

    pub fn scheduler_config(&self) -> Result<SchedulerConfig> {
        Ok(SchedulerConfig {
            params: BoundParams::pauli(self.delta)?,
            bound: self.bound,
            batch_size: self.batch_size,
        })
    }

    /// SHA-256 of everything that influences the output files.
    pub fn digest(&self) -> String {
        let description = json!({
            "task": self.task.describe(),
            "policies": self.policies,
            "m": self.realizations,
            "n_max": self.n_max,
            "checkpoints": self.checkpoints,
            "delta": self.delta,
            "bound": self.bound,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "tail_fraction": self.tail_fraction,
            "bootstrap": self.bootstrap,
        });
        let bytes = Sha256::digest(description.to_string().as_bytes());
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Roughly `per_decade` log-spaced shot counts from `start` to `end`, both included.
pub fn log_checkpoints(start: u64, end: u64, per_decade: usize) -> Vec<u64> {
    if end <= start {
        return vec![start];
    }
    let decades = (end as f64 / start as f64).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
    let mut out: Vec<u64> = (0..=steps)
        .map(|i| (start as f64 * 10f64.powf(decades * i as f64 / steps as f64)).round() as u64)
        .collect();
    out[0] = start;
    *out.last_mut().unwrap() = end;
    out.dedup();
    out
}

/// Per-policy output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub policy: Policy,
    /// `estimates[realization][checkpoint]`.
    pub estimates: Vec<Vec<f64>>,
    pub curve: ConvergenceCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub task: String,
    pub config_digest: String,
    pub exact_value: f64,
    pub init_cost: u64,
    pub checkpoints: Vec<u64>,
    pub runs: Vec<PolicyRun>,
}

impl ExperimentOutcome {
    pub fn curve(&self, policy: Policy) -> Option<&ConvergenceCurve> {
        self.runs.iter().find(|r| r.policy == policy).map(|r| &r.curve)
    }

    pub fn curves(&self) -> Vec<&ConvergenceCurve> {
        self.runs.iter().map(|r| &r.curve).collect()
    }
}

fn policy_tag(p: Policy) -> u64 {
    match p {
        Policy::ActiveLearning => 1,
        Policy::Uniform => 2,
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Estimates at every checkpoint for one realization.
pub fn run_realization(
    experiment: &Experiment,
    config: SchedulerConfig,
    policy: Policy,
    checkpoints: &[u64],
    n_max: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = AllocationState::new(experiment, config);
    state.initialize(&mut rng)?;
    let traj = state.run(policy, Stop::Budget(n_max), checkpoints, &mut rng)?;
    debug_assert_eq!(traj.points.len(), checkpoints.len());
    Ok(traj.points.iter().map(|p| p.estimate).collect())
}

fn resolve_checkpoints(config: &ExperimentConfig, init_cost: u64) -> Result<Vec<u64>> {
    if config.n_max < init_cost {
        return Err(Error::Config(format!(
            "n_max {} is below the initialization cost {init_cost}",
            config.n_max
        )));
    }
    let cps = match &config.checkpoints {
        Some(c) => c.clone(),
        None => log_checkpoints(init_cost, config.n_max, 10),
    };
    if cps.is_empty() || cps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be non-empty and strictly increasing".into()));
    }
    if cps[0] < init_cost || *cps.last().unwrap() > config.n_max {
        return Err(Error::Config(format!(
            "checkpoints must lie within [{init_cost}, {}]",
            config.n_max
        )));
    }
    Ok(cps)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_experiment_with_progress(config, |_| {})
}

/// Like [`run_experiment`], calling `progress` once per finished policy.
pub fn run_experiment_with_progress(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&PolicyRun),
) -> Result<ExperimentOutcome> {
    if config.realizations < 2 {
        return Err(Error::Config("at least 2 realizations are required".into()));
    }
    if config.policies.is_empty() {
        return Err(Error::Config("no policies selected".into()));
    }
    let scheduler = config.scheduler_config()?;
    let experiment = Experiment::new(config.task.build(config.seed)?)?;
    let exact = experiment.decomposition().exact_value();
    let init_cost = experiment.decomposition().init_cost();
    let checkpoints = resolve_checkpoints(config, init_cost)?;
    let pool = thread_pool(config.workers)?;

    let mut runs = Vec::with_capacity(config.policies.len());
    for &policy in &config.policies {
        let estimates = pool.install(|| {
            (0..config.realizations)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(config.seed, &[TAG_REALIZATION, policy_tag(policy), i as u64]);
                    run_realization(&experiment, scheduler, policy, &checkpoints, config.n_max, seed)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let curve = ConvergenceCurve::from_estimates(policy, &checkpoints, &estimates, exact);
        let run = PolicyRun {
            policy,
            estimates,
            curve,
        };
        progress(&run);
        runs.push(run);
    }
    Ok(ExperimentOutcome {
        task: config.task.label(),
        config_digest: config.digest(),
        exact_value: exact,
        init_cost,
        checkpoints,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub task: String,
    pub config_digest: String,
    pub tail_slope: BTreeMap<String, Option<f64>>,
    pub improvement: Option<f64>,
    pub improvement_ci: Option<(f64, f64)>,
    pub improvement_error: Option<String>,
}

/// Tail slopes per policy and, when both policies ran, the improvement with
/// a percentile bootstrap interval over realizations.
pub fn summarize(outcome: &ExperimentOutcome, tail_fraction: f64, bootstrap: usize, seed: u64) -> Summary {
    let tail_slope = outcome
        .runs
        .iter()
        .map(|r| {
            let slope = fit_tail_slope(&r.curve, tail_fraction).ok().map(|f| f.slope);
            (r.policy.name().to_string(), slope)
        })
        .collect();
    let mut summary = Summary {
        task: outcome.task.clone(),
        config_digest: outcome.config_digest.clone(),
        tail_slope,
        improvement: None,
        improvement_ci: None,
        improvement_error: None,
    };
    let (Some(conv), Some(al)) = (
        outcome.runs.iter().find(|r| r.policy == Policy::Uniform),
        outcome.runs.iter().find(|r| r.policy == Policy::ActiveLearning),
    ) else {
        return summary;
    };
    match improvement_ratio(&conv.curve, &al.curve, tail_fraction) {
        Ok(v) => summary.improvement = Some(v),
        Err(e) => {
            summary.improvement_error = Some(e.to_string());
            return summary;
        }
    }
    if bootstrap > 0 {
        summary.improvement_ci = bootstrap_interval(outcome, conv, al, tail_fraction, bootstrap, seed);
    }
    summary
}

fn bootstrap_interval(
    outcome: &ExperimentOutcome,
    conv: &PolicyRun,
    al: &PolicyRun,
    tail_fraction: f64,
    replicates: usize,
    seed: u64,
) -> Option<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_BOOTSTRAP]));
    let resample = |run: &PolicyRun, rng: &mut ChaCha8Rng| {
        let m = run.estimates.len();
        let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        ConvergenceCurve::from_rows(
            run.policy,
            &outcome.checkpoints,
            idx.iter().map(|&i| run.estimates[i].as_slice()).collect::<Vec<_>>().into_iter(),
            outcome.exact_value,
        )
    };
    let mut ratios: Vec<f64> = (0..replicates)
        .filter_map(|_| {
            let c = resample(conv, &mut rng);
            let a = resample(al, &mut rng);
            improvement_ratio(&c, &a, tail_fraction).ok()
        })
        .collect();
    if ratios.len() * 2 < replicates {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let q = |p: f64| ratios[((ratios.len() - 1) as f64 * p).round() as usize];
    Some((q(0.025), q(0.975)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub qubits: usize,
    /// Number of Haar-random targets.
    pub states: usize,
    pub realizations: usize,
    /// Shots per run; `None` uses [`SweepConfig::default_n_max`].
    pub n_max: Option<u64>,
    pub delta: f64,
    pub bound: BoundKind,
    pub seed: u64,
    pub workers: usize,
    pub tail_fraction: f64,
}

impl SweepConfig {
    pub fn new(qubits: usize, states: usize) -> Self {
        Self {
            qubits,
            states,
            realizations: 1000,
            n_max: None,
            delta: 0.1,
            bound: BoundKind::Modified,
            seed: 0,
            workers: 0,
            tail_fraction: 0.5,
        }
    }

    /// 100 shots per measurement setting.
    pub fn default_n_max(qubits: usize) -> u64 {
        100 * 3u64.pow(qubits as u32)
    }

    fn experiment_config(&self, state_index: usize) -> Result<ExperimentConfig> {
        let stream = derive_seed(self.seed, &[TAG_SWEEP, self.qubits as u64, state_index as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let target = haar_random_state(self.qubits, &mut rng)?;
        let mut cfg = ExperimentConfig::new(TaskSpec::StateFidelity {
            qubits: self.qubits,
            target: TargetSource::Given(target),
            experimental: ExperimentalState::Target,
        });
        cfg.policies = vec![Policy::Uniform, Policy::ActiveLearning];
        cfg.realizations = self.realizations;
        cfg.n_max = self.n_max.unwrap_or_else(|| Self::default_n_max(self.qubits));
        cfg.delta = self.delta;
        cfg.bound = self.bound;
        cfg.seed = stream;
        cfg.workers = self.workers;
        cfg.tail_fraction = self.tail_fraction;
        cfg.bootstrap = 0;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementDistribution {
    pub qubits: usize,
    /// Improvement per state index.
    pub improvements: Vec<f64>,
    /// `(improvement, empirical CDF)` sorted ascending.
    pub cdf: Vec<(f64, f64)>,
}

impl ImprovementDistribution {
    pub fn median(&self) -> f64 {
        let s: Vec<f64> = self.cdf.iter().map(|(v, _)| *v).collect();
        let k = s.len();
        if k % 2 == 1 {
            s[k / 2]
        } else {
            0.5 * (s[k / 2 - 1] + s[k / 2])
        }
    }

    pub fn fraction_below(&self, threshold: f64) -> f64 {
        self.improvements.iter().filter(|v| **v < threshold).count() as f64 / self.improvements.len() as f64
    }
}

/// Improvement ratios for `states` independent Haar-random targets.
pub fn improvement_distribution(config: &SweepConfig) -> Result<ImprovementDistribution> {
    if config.states < 10 {
        return Err(Error::Config("an improvement distribution needs at least 10 states".into()));
    }
    let improvements = (0..config.states)
        .map(|j| {
            let cfg = config.experiment_config(j)?;
            let outcome = run_experiment(&cfg)?;
            let conv = outcome.curve(Policy::Uniform).expect("uniform ran");
            let al = outcome.curve(Policy::ActiveLearning).expect("al ran");
            improvement_ratio(conv, al, config.tail_fraction)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = improvements.clone();
    sorted.sort_by(f64::total_cmp);
    let s = sorted.len() as f64;
    let cdf = sorted.iter().enumerate().map(|(i, v)| (*v, (i + 1) as f64 / s)).collect();
    Ok(ImprovementDistribution {
        qubits: config.qubits,
        improvements,
        cdf,
    })
}

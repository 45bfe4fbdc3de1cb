use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use activeshots::bounds::{bernstein_radius, epsilon_dichotomic_oracle, modified_radius, BoundKind, BoundParams};
use activeshots::harness::{
    self, fit_tail_slope, format_float, improvement_distribution, summarize, ExperimentConfig, ExperimentalState,
    PolicyRun, SweepConfig, TargetSource, TaskSpec,
};
use activeshots::quantum::{gates, ChannelKind, DensityMatrix, QuantumState, StateVector};
use activeshots::scheduler::Policy;
use activeshots::Error;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::{merge, Manifest};
use crate::Failure;

const DEFAULT_M: usize = 2000;
const DEFAULT_SWEEP_M: usize = 1000;
const DEFAULT_N_MAX: u64 = 100_000;

fn classify(e: Error) -> Failure {
    match e {
        Error::Io(_)
        | Error::InsufficientSamples(_)
        | Error::TooFewPoints { .. }
        | Error::NotInRegime { .. }
        | Error::ComplexCoefficient(_) => Failure::runtime(e.to_string()),
        _ => Failure::config(e.to_string()),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::runtime(format!("{}: {e}", path.display()))
}

/// Flags shared by the experiment commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunArgs {
    /// Realizations per policy.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n_max: Option<u64>,
    /// al, uniform or both.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// modified or bernstein.
    #[arg(long)]
    pub bound: Option<String>,
    #[arg(long)]
    pub batch_size: Option<u64>,
    /// Comma-separated total-shot checkpoints (default: log-spaced).
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<u64>>,
    #[arg(long)]
    pub tail_fraction: Option<f64>,
    /// Bootstrap resamples for the improvement interval.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct StateArgs {
    #[arg(long)]
    pub qubits: Option<usize>,
    /// JSON array of `[re, im]` amplitudes for the target; Haar-random if absent.
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    /// `pure` (the target itself) or `file:PATH` with a row-major density matrix.
    #[arg(long)]
    pub target_rho: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GateArgs {
    /// cnot, toffoli, identity or file:PATH (row-major unitary).
    #[arg(long)]
    pub gate: Option<String>,
    /// ideal or depol:P.
    #[arg(long)]
    pub channel: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long)]
    pub qubits_from: Option<usize>,
    #[arg(long)]
    pub qubits_to: Option<usize>,
    #[arg(long)]
    pub states_per_size: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundsArgs {
    /// Comma-separated sample counts.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    /// Comma-separated empirical variances.
    #[arg(long, value_delimiter = ',')]
    pub ve: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
}

fn parse_policies(s: &str) -> Result<Vec<Policy>, Failure> {
    match s {
        "both" => Ok(vec![Policy::ActiveLearning, Policy::Uniform]),
        other => other.parse::<Policy>().map(|p| vec![p]).map_err(classify),
    }
}

fn parse_bound(s: &str) -> Result<BoundKind, Failure> {
    match s {
        "modified" => Ok(BoundKind::Modified),
        "bernstein" => Ok(BoundKind::Bernstein),
        other => Err(Failure::config(format!("unknown bound `{other}` (modified|bernstein)"))),
    }
}

fn parse_channel(s: &str) -> Result<ChannelKind, Failure> {
    if s == "ideal" {
        return Ok(ChannelKind::IdealUnitary);
    }
    let p = s
        .strip_prefix("depol:")
        .and_then(|p| p.parse::<f64>().ok())
        .ok_or_else(|| Failure::config(format!("unknown channel `{s}` (ideal|depol:P)")))?;
    Ok(ChannelKind::Depolarizing { p })
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

impl RunArgs {
    fn fill_defaults(&mut self, m: usize, n_max: Option<u64>) {
        self.m.get_or_insert(m);
        if let Some(n) = n_max {
            self.n_max.get_or_insert(n);
        }
        self.policy.get_or_insert_with(|| "both".into());
        self.seed.get_or_insert(0);
        self.delta.get_or_insert(0.1);
        self.bound.get_or_insert_with(|| "modified".into());
        self.batch_size.get_or_insert(1);
        self.tail_fraction.get_or_insert(0.5);
        self.bootstrap.get_or_insert(200);
    }

    fn out_dir(&self) -> Result<&Path, Failure> {
        self.out.as_deref().ok_or_else(|| Failure::config("--out is required"))
    }

    fn experiment_config(&self, task: TaskSpec) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::new(task);
        cfg.policies = parse_policies(self.policy.as_deref().unwrap_or("both"))?;
        cfg.realizations = self.m.unwrap_or(DEFAULT_M);
        cfg.n_max = self.n_max.unwrap_or(DEFAULT_N_MAX);
        cfg.checkpoints = self.checkpoints.clone();
        cfg.delta = self.delta.unwrap_or(0.1);
        cfg.bound = parse_bound(self.bound.as_deref().unwrap_or("modified"))?;
        cfg.batch_size = self.batch_size.unwrap_or(1);
        cfg.seed = self.seed.unwrap_or(0);
        cfg.workers = self.workers.unwrap_or(0);
        cfg.tail_fraction = self.tail_fraction.unwrap_or(0.5);
        cfg.bootstrap = self.bootstrap.unwrap_or(200);
        if cfg.batch_size == 0 {
            return Err(Failure::config("--batch-size must be positive"));
        }
        cfg.scheduler_config().map_err(classify)?;
        Ok(cfg)
    }
}

fn report_policy(task: &str, run: &PolicyRun, tail_fraction: f64) {
    let last = run.curve.points.last().expect("at least one checkpoint");
    let slope = fit_tail_slope(&run.curve, tail_fraction)
        .map(|f| format!("{:.3}", f.slope))
        .unwrap_or_else(|_| "n/a".into());
    eprintln!(
        "{task} [{}] m={} sigma(n_T={})={:.4e} bias={:.2e} tail slope={slope}",
        run.policy.name(),
        last.realizations,
        last.total_shots,
        last.sigma,
        last.bias
    );
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

/// Runs one convergence experiment and writes `curves.csv` and `summary.json`.
fn run_and_write(
    command: &str,
    cfg: ExperimentConfig,
    resolved: &impl Serialize,
    config_file: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let manifest = Manifest::start(out, command, config_file, resolved, Some(cfg.digest()))?;
    let label = cfg.task.label();
    let outcome =
        harness::run_experiment_with_progress(&cfg, |r| report_policy(&label, r, cfg.tail_fraction)).map_err(classify);
    let outcome = match outcome {
        Ok(o) => o,
        Err(f) => {
            manifest.finish("failed", &[])?;
            return Err(f);
        }
    };
    let summary = summarize(&outcome, cfg.tail_fraction, cfg.bootstrap, cfg.seed);
    if let Some(e) = &summary.improvement_error {
        eprintln!("{label}: improvement unavailable: {e}");
    } else if let Some(v) = summary.improvement {
        eprintln!("{label}: improvement {v:.4}");
    }

    let curves_path = out.join("curves.csv");
    let mut w = create(&curves_path)?;
    harness::write_curves_csv(&mut w, outcome.curves()).map_err(classify)?;
    w.flush().map_err(|e| io_failure(&curves_path, e))?;
    let summary_path = out.join("summary.json");
    let mut w = create(&summary_path)?;
    harness::write_summary_json(&mut w, &summary).map_err(classify)?;
    w.flush().map_err(|e| io_failure(&summary_path, e))?;
    manifest.finish("completed", &["curves.csv", "summary.json"])
}

pub fn state_fidelity(flags: StateArgs, config: Option<PathBuf>) -> Result<(), Failure> {
    let mut args = merge(&flags, config.as_deref())?;
    args.run.fill_defaults(DEFAULT_M, Some(DEFAULT_N_MAX));
    let target = match &args.state_file {
        Some(p) => {
            TargetSource::Given(StateVector::from_json(&read_file(p)?).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?)
        }
        None => TargetSource::Haar,
    };
    let qubits = match (&target, args.qubits) {
        (_, Some(q)) => q,
        (TargetSource::Given(s), None) => s.num_qubits(),
        (TargetSource::Haar, None) => return Err(Failure::config("--qubits is required without --state-file")),
    };
    args.qubits = Some(qubits);
    let experimental = match args.target_rho.get_or_insert_with(|| "pure".into()).as_str() {
        "pure" => ExperimentalState::Target,
        spec => {
            let path = spec
                .strip_prefix("file:")
                .ok_or_else(|| Failure::config(format!("unknown --target-rho `{spec}` (pure|file:PATH)")))?;
            let rho = DensityMatrix::from_json(&read_file(Path::new(path))?)
                .map_err(|e| Failure::config(format!("{path}: {e}")))?;
            ExperimentalState::Given(QuantumState::Mixed(rho))
        }
    };
    let task = TaskSpec::StateFidelity {
        qubits,
        target,
        experimental,
    };
    let cfg = args.run.experiment_config(task)?;
    let out = args.run.out_dir()?.to_path_buf();
    run_and_write("state-fidelity", cfg, &args, config.as_deref(), &out)
}

pub fn gate_fidelity(flags: GateArgs, config: Option<PathBuf>) -> Result<(), Failure> {
    let mut args = merge(&flags, config.as_deref())?;
    args.run.fill_defaults(DEFAULT_M, Some(DEFAULT_N_MAX));
    let gate = args.gate.clone().ok_or_else(|| Failure::config("--gate is required"))?;
    let unitary = match gate.strip_prefix("file:") {
        Some(path) => gates::from_json(&read_file(Path::new(path))?).map_err(|e| Failure::config(format!("{path}: {e}")))?,
        None => gates::named(&gate)
            .ok_or_else(|| Failure::config(format!("unknown gate `{gate}` (cnot|toffoli|identity|file:PATH)")))?,
    };
    let channel = parse_channel(args.channel.get_or_insert_with(|| "ideal".into()))?;
    let name = if gate.starts_with("file:") { "file".to_string() } else { gate.to_ascii_lowercase() };
    let task = TaskSpec::GateFidelity {
        name,
        unitary,
        channel,
    };
    let cfg = args.run.experiment_config(task)?;
    let out = args.run.out_dir()?.to_path_buf();
    run_and_write("gate-fidelity", cfg, &args, config.as_deref(), &out)
}

pub fn improvement_sweep(flags: SweepArgs, config: Option<PathBuf>) -> Result<(), Failure> {
    let mut args = merge(&flags, config.as_deref())?;
    args.run.fill_defaults(DEFAULT_SWEEP_M, None);
    let from = *args.qubits_from.get_or_insert(1);
    let to = *args.qubits_to.get_or_insert(4);
    let states = *args.states_per_size.get_or_insert(50);
    if from == 0 || to < from {
        return Err(Failure::config(format!("invalid qubit range {from}..={to}")));
    }
    if args.run.policy.as_deref() != Some("both") {
        return Err(Failure::config("improvement-sweep compares both policies; --policy must be `both`"));
    }
    if args.run.checkpoints.is_some() {
        return Err(Failure::config("improvement-sweep uses log-spaced checkpoints; --checkpoints is not supported"));
    }
    let bound = parse_bound(args.run.bound.as_deref().unwrap_or("modified"))?;
    BoundParams::pauli(args.run.delta.unwrap_or(0.1)).map_err(classify)?;
    let out = args.run.out_dir()?.to_path_buf();
    let manifest = Manifest::start(&out, "improvement-sweep", config.as_deref(), &args, None)?;
    let mut outputs = Vec::new();
    for qubits in from..=to {
        let mut sweep = SweepConfig::new(qubits, states);
        sweep.realizations = args.run.m.unwrap_or(DEFAULT_SWEEP_M);
        sweep.n_max = args.run.n_max;
        sweep.delta = args.run.delta.unwrap_or(0.1);
        sweep.bound = bound;
        sweep.seed = args.run.seed.unwrap_or(0);
        sweep.workers = args.run.workers.unwrap_or(0);
        sweep.tail_fraction = args.run.tail_fraction.unwrap_or(0.5);
        let dist = match improvement_distribution(&sweep) {
            Ok(d) => d,
            Err(e) => {
                manifest.finish("failed", &[])?;
                return Err(classify(e));
            }
        };
        eprintln!(
            "improvement-sweep/{qubits}q: states={} median={:.4} below one={:.3}",
            dist.improvements.len(),
            dist.median(),
            dist.fraction_below(1.0)
        );
        let name = format!("improvement_{qubits}q.csv");
        let path = out.join(&name);
        let mut w = create(&path)?;
        harness::write_improvement_csv(&mut w, [&dist]).map_err(classify)?;
        w.flush().map_err(|e| io_failure(&path, e))?;
        outputs.push(name);
    }
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    manifest.finish("completed", &names)
}

pub fn bounds_table(flags: BoundsArgs, config: Option<PathBuf>) -> Result<(), Failure> {
    let args = merge(&flags, config.as_deref())?;
    let ns = args.n.unwrap_or_else(|| vec![10, 100, 1000]);
    let ves = args.ve.unwrap_or_else(|| vec![0.25, 1.0]);
    let deltas = args.delta.unwrap_or_else(|| vec![0.1]);
    if let Some(n) = ns.iter().find(|n| **n < 2) {
        return Err(Failure::config(format!("n={n}: at least 2 samples are needed")));
    }
    if let Some(v) = ves.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Failure::config(format!("v_e={v} outside [0, 1]")));
    }
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let line = |w: &mut std::io::StdoutLock, s: String| writeln!(w, "{s}").map_err(|e| Failure::runtime(e.to_string()));
    line(&mut w, "n,v_e,delta,eps_b,eps_d,eps_m".into())?;
    for &delta in &deltas {
        let params = BoundParams::pauli(delta).map_err(classify)?;
        for &n in &ns {
            for &v in &ves {
                let p = (1.0 - (1.0 - v).sqrt()) / 2.0;
                let eps_d = epsilon_dichotomic_oracle(n, p, &params).map_err(classify)?;
                line(
                    &mut w,
                    format!(
                        "{n},{},{},{},{},{}",
                        format_float(v),
                        format_float(delta),
                        format_float(bernstein_radius(n as f64, v, &params)),
                        format_float(eps_d),
                        format_float(modified_radius(n as f64, v, &params)),
                    ),
                )?;
            }
        }
    }
    Ok(())
}

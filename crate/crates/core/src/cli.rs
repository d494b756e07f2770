//! Command-line front end.
//!
//! Every command resolves an [`ExperimentConfig`] from `--config` and flags
//! (flags win), runs one library operation, optionally writes CSV or JSON to
//! `--out`, and prints a one-line verdict.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical
//! divergence or breakdown reported as the result.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, GainChoice};
use crate::dynsys::ModelDescriptor;
use crate::limits::{critical_p_from_exponents, entropy_condition, linear_critical_p, CriticalProbability};
use crate::lyapunov::{self, DEFAULT_BURN_IN, DEFAULT_RENORM_PERIOD};
use crate::observability::{bounds_scan, DEFAULT_RANK_TOL};
use crate::output::{fmt_f64, write_json};
use crate::riccati::{condition_trace, RPolicy, DEFAULT_EPSILON};
use crate::simulate::{monte_carlo, sweep_p, write_sweep_csv, MonteCarloConfig, SweepConfig, SweepMode};
use crate::{Error, Matrix, Result, SystemModel, Vector};

/// Environment variable capping the worker-thread count (0 = automatic).
pub const THREADS_ENV: &str = "ERASURE_OBS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

const DEFAULT_LYAPUNOV_STEPS: usize = 1_000_000;
const DEFAULT_RICCATI_STEPS: usize = 10_000;
const DEFAULT_SIM_STEPS: usize = 10_000;
const DEFAULT_REALIZATIONS: usize = 50;
const DEFAULT_NOISE: f64 = 1e-6;
const DEFAULT_SAMPLES: usize = 10_000;
const DEFAULT_GRID: [f64; 8] = [0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9];

#[derive(Debug, Parser)]
#[command(
    name = "erasure-obs",
    version,
    about = "Limits of nonlinear state observation over an erasure channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lyapunov spectrum of the model's map (JSON).
    Lyapunov(Flags),
    /// Critical erasure probability p* and dropout rate q* (JSON).
    CriticalP(Flags),
    /// Riccati-like necessary condition along an orbit (CSV: t, det_Q0, condition_value, running_log_mean).
    RiccatiCheck(Flags),
    /// Observability rank condition over sampled attractor points (JSON).
    Observability(Flags),
    /// Monte Carlo observer runs (CSV: t, mean_sq_error).
    Simulate(Flags),
    /// Peak error statistic over a grid of p (CSV: p, peak, diverged_flag, critical_p).
    Sweep(Flags),
}

/// Flags shared by all commands; each overrides the matching config field.
#[derive(Debug, Args)]
struct Flags {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model: henon, linear-scalar, linear-diagonal, logistic.
    #[arg(long)]
    model: Option<String>,
    /// JSON polynomial model descriptor.
    #[arg(long, conflicts_with = "model")]
    model_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    gain: Option<GainChoice>,
    /// Master seed for all random streams.
    #[arg(long = "seed")]
    master_seed: Option<u64>,
    /// Horizon T.
    #[arg(long)]
    steps: Option<usize>,
    /// Delivery probability.
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated probabilities.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    p_grid: Option<Vec<f64>>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Plant noise amplitude.
    #[arg(long = "noise")]
    noise_amplitude: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    renorm_period: Option<usize>,
    /// `R = epsilon * I` in the Riccati recursion.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated initial plant state.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Comma-separated initial observer state.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    xhat0: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mode: Option<SweepMode>,
    /// Number of attractor samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Relative rank tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Entropy H for the entropy form of the condition (needs --p).
    #[arg(long)]
    entropy: Option<f64>,
    /// Critical probability to annotate sweeps with (computed when absent).
    #[arg(long)]
    critical_p: Option<f64>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let model_descriptor = match &self.model_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Some(ModelDescriptor::from_json(&text)?)
            }
            None => None,
        };
        // a model given on the command line replaces whichever the config named
        if self.model.is_some() || model_descriptor.is_some() {
            config.model = None;
            config.model_descriptor = None;
        }
        config.overlay(ExperimentConfig {
            model: self.model,
            model_descriptor,
            gain: self.gain,
            p: self.p,
            p_grid: self.p_grid,
            steps: self.steps,
            realizations: self.realizations,
            noise_amplitude: self.noise_amplitude,
            master_seed: self.master_seed,
            burn_in: self.burn_in,
            renorm_period: self.renorm_period,
            epsilon: self.epsilon,
            x0: self.x0,
            xhat0: self.xhat0,
            mode: self.mode,
            samples: self.samples,
            tol: self.tol,
            entropy: self.entropy,
            critical_p: self.critical_p,
            out: self.out,
        });
        Ok(config)
    }
}

/// What a command reports back to [`run`].
struct Outcome {
    verdict: String,
    diverged: bool,
}

impl Outcome {
    fn ok(verdict: String) -> Self {
        Outcome {
            verdict,
            diverged: false,
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = thread_pool().and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.verdict);
            if outcome.diverged {
                EXIT_DIVERGED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Diverged { .. }
        | Error::DegenerateCocycle { .. }
        | Error::SingularJacobian { .. }
        | Error::Singular(_)
        | Error::NotConverged { .. } => EXIT_DIVERGED,
        Error::Dimension { .. }
        | Error::NonFinite(_)
        | Error::InvalidArgument { .. }
        | Error::UnknownModel { .. }
        | Error::Descriptor(_)
        | Error::Config(_) => EXIT_INVALID,
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid("ERASURE_OBS_THREADS", format!("`{v}` is not a non-negative integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Lyapunov(f) => cmd_lyapunov(&f.resolve()?),
        Command::CriticalP(f) => cmd_critical_p(&f.resolve()?),
        Command::RiccatiCheck(f) => cmd_riccati(&f.resolve()?),
        Command::Observability(f) => cmd_observability(&f.resolve()?),
        Command::Simulate(f) => cmd_simulate(&f.resolve()?),
        Command::Sweep(f) => cmd_sweep(&f.resolve()?),
    }
}

fn cmd_lyapunov(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (model, _) = cfg.build_model()?;
    let x0 = cfg.initial_state(&model)?;
    let steps = cfg.steps.unwrap_or(DEFAULT_LYAPUNOV_STEPS);
    let spec = lyapunov::spectrum(
        &model,
        &x0,
        steps,
        cfg.burn_in.unwrap_or(DEFAULT_BURN_IN.min(steps / 10)),
        cfg.renorm_period.unwrap_or(DEFAULT_RENORM_PERIOD),
    )?;
    write_json_out(cfg.out.as_deref(), &spec)?;
    let exps: Vec<String> = spec.exponents.iter().map(|l| format!("{l:.6}")).collect();
    Ok(Outcome::ok(format!(
        "lyapunov exponents: {} (sum {:.6}, residual {:.2e}, {})",
        exps.join(" "),
        spec.sum(),
        spec.convergence_residual,
        if spec.converged() { "converged" } else { "not converged" }
    )))
}

/// Exact eigenvalue form for linear models, Lyapunov spectrum otherwise.
fn critical_probability(cfg: &ExperimentConfig, model: &SystemModel) -> Result<CriticalProbability> {
    let m = model.output_dim();
    if cfg.model_is_linear() {
        let n = model.state_dim();
        let a = model.jacobian(&Vector::zeros(n))?;
        let moduli = crate::linalg::eigenvalue_moduli(&a)?;
        if moduli.iter().all(|&l| l > 1.0) {
            return linear_critical_p(&moduli, m);
        }
        let logs: Vec<f64> = moduli.iter().map(|l| l.ln()).collect();
        return critical_p_from_exponents(&logs, m);
    }
    let x0 = cfg.initial_state(model)?;
    let steps = cfg.steps.unwrap_or(DEFAULT_LYAPUNOV_STEPS);
    let spec = lyapunov::spectrum(
        model,
        &x0,
        steps,
        cfg.burn_in.unwrap_or(DEFAULT_BURN_IN.min(steps / 10)),
        cfg.renorm_period.unwrap_or(DEFAULT_RENORM_PERIOD),
    )?;
    crate::limits::nonlinear_critical_p(&spec, m)
}

fn cmd_critical_p(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (model, _) = cfg.build_model()?;
    let cp = critical_probability(cfg, &model)?;
    let mut line = format!("p* = {:.4} (q* = {:.4})", cp.critical_p, cp.critical_q);
    match (cfg.p, cfg.entropy) {
        (Some(_), Some(h)) => {
            let v = entropy_condition(cfg.require_p()?, model.output_dim(), h)?;
            line += &format!("; entropy form at p = {}: {}", v.p, verdict_word(v.satisfied));
            write_json_out(cfg.out.as_deref(), &serde_json::json!({ "critical": cp, "entropy_verdict": v }))?;
        }
        (Some(_), None) => {
            let v = cp.verdict(cfg.require_p()?)?;
            line += &format!("; at p = {}: {}", v.p, verdict_word(v.satisfied));
            write_json_out(cfg.out.as_deref(), &serde_json::json!({ "critical": cp, "verdict": v }))?;
        }
        (None, Some(_)) => return Err(Error::invalid("p", "required with entropy")),
        (None, None) => write_json_out(cfg.out.as_deref(), &cp)?,
    }
    Ok(Outcome::ok(line))
}

fn verdict_word(satisfied: bool) -> &'static str {
    if satisfied {
        "necessary condition holds"
    } else {
        "necessary condition violated"
    }
}

fn cmd_riccati(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (model, _) = cfg.build_model()?;
    let x0 = cfg.initial_state(&model)?;
    let p = cfg.require_p()?;
    let steps = cfg.steps.unwrap_or(DEFAULT_RICCATI_STEPS);
    let eps = cfg.epsilon.unwrap_or(DEFAULT_EPSILON);
    let n = model.state_dim();
    let trace = condition_trace(&model, &x0, steps, p, RPolicy::ScaledIdentity(eps), &Matrix::identity(n, n))?;
    if let Some(path) = &cfg.out {
        trace.write_csv(create(path)?)?;
    }
    if let Some(v) = trace.violation {
        return Ok(Outcome {
            verdict: format!(
                "Q0 left the bounded range at step {} (eigenvalue {:e}); trace stopped",
                v.step, v.eigenvalue
            ),
            diverged: true,
        });
    }
    Ok(Outcome::ok(format!(
        "running log condition mean {:.6} after {} steps: {}",
        trace.final_log_mean(),
        trace.len(),
        verdict_word(trace.satisfied())
    )))
}

fn cmd_observability(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (model, _) = cfg.build_model()?;
    let x0 = cfg.initial_state(&model)?;
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < 1 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    let burn_in = cfg.burn_in.unwrap_or(DEFAULT_BURN_IN);
    let orbit = model.orbit(&x0, burn_in + samples - 1)?;
    let points = &orbit[burn_in..];
    let scan = bounds_scan(&model, points, cfg.tol.unwrap_or(DEFAULT_RANK_TOL))?;
    write_json_out(cfg.out.as_deref(), &scan)?;
    Ok(Outcome::ok(format!(
        "observability rank condition {} at {}/{} points (alpha = {:e}, beta = {:e})",
        if scan.satisfied { "holds" } else { "fails" },
        points.len() - scan.failing.len(),
        points.len(),
        scan.alpha_theta,
        scan.beta_theta
    )))
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (model, gain) = cfg.build_model()?;
    let x0 = cfg.initial_state(&model)?;
    let xhat0 = cfg.observer_initial_state(&model, &x0)?;
    let mc = MonteCarloConfig {
        p: cfg.require_p()?,
        horizon: cfg.steps.unwrap_or(DEFAULT_SIM_STEPS),
        realizations: cfg.realizations.unwrap_or(DEFAULT_REALIZATIONS),
        noise_amplitude: cfg.noise_amplitude.unwrap_or(DEFAULT_NOISE),
        master_seed: cfg.require_seed()?,
    };
    let rep = monte_carlo(&model, &gain, &x0, &xhat0, &mc)?;
    if let Some(path) = &cfg.out {
        rep.write_csv(create(path)?)?;
    }
    Ok(Outcome {
        verdict: format!(
            "peak mean-square error {} over {} steps, {} realizations ({} diverged)",
            fmt_f64(rep.peak_mean_sq_error),
            rep.horizon,
            rep.realizations,
            rep.diverged_runs.len()
        ),
        diverged: rep.diverged(),
    })
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (model, gain) = cfg.build_model()?;
    let x0 = cfg.initial_state(&model)?;
    let xhat0 = cfg.observer_initial_state(&model, &x0)?;
    let n = model.state_dim();
    let critical_p = match cfg.critical_p {
        Some(p) => p,
        None => {
            // steps here is the sweep horizon; the spectrum uses its own default
            let spectrum_cfg = ExperimentConfig {
                steps: None,
                burn_in: None,
                ..cfg.clone()
            };
            critical_probability(&spectrum_cfg, &model)?.critical_p
        }
    };
    let sweep = SweepConfig {
        p_grid: cfg.p_grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec()),
        horizon: cfg.steps.unwrap_or(DEFAULT_SIM_STEPS),
        realizations: cfg.realizations.unwrap_or(DEFAULT_REALIZATIONS),
        mode: cfg.mode.unwrap_or(SweepMode::Linearized),
        master_seed: cfg.require_seed()?,
        burn_in: cfg.burn_in.unwrap_or(0),
        sigma0: Matrix::identity(n, n),
        xhat0,
        noise_amplitude: cfg.noise_amplitude.unwrap_or(DEFAULT_NOISE),
        critical_p: Some(critical_p),
    };
    let points = sweep_p(&model, &gain, &x0, &sweep)?;
    if let Some(path) = &cfg.out {
        write_sweep_csv(&points, create(path)?)?;
    }
    let flagged: Vec<String> = points.iter().filter(|p| p.diverged).map(|p| p.p.to_string()).collect();
    Ok(Outcome {
        verdict: format!(
            "sweep over {} probabilities (p* = {:.4}); diverged at: {}",
            points.len(),
            critical_p,
            if flagged.is_empty() { "none".to_string() } else { flagged.join(", ") }
        ),
        diverged: !flagged.is_empty(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json_out<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => Ok(()),
    }
}

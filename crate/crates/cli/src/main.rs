//! `fractalscape` — landscape diagnostics for continuous-control policy
//! optimization: objective evaluation, maximal Lyapunov exponents, Hölder
//! regressions, gradient directions, landscape scans/sweeps, and pinned
//! experiment pipelines.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
//! failure. All randomness derives from one master seed via named substreams;
//! the `FRACTALSCAPE_SEED` environment variable overrides the seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fractalscape::envs::{EnvKind, EnvModel, State};
use fractalscape::holder::{log_spaced, pairs_to_csv, HolderConfig};
use fractalscape::landscape::{holder_for_env, scan, sweep};
use fractalscape::lyapunov::{
    estimate_mle, estimate_mle_stochastic, mle_sweep, sweep_to_csv, MleConfig,
};
use fractalscape::policies::{ParamVector, PolicySpec, DEFAULT_SIGMA0};
use fractalscape::policygrad::{estimate_gradient, Baseline, GradConfig, DEFAULT_EPISODES};
use fractalscape::repro::{repro_figure, Figure, ReproScale, DEFAULT_REPRO_SEED};
use fractalscape::rollout::{objective, tail_bound, EvalMode, RolloutConfig, DEFAULT_HORIZON};
use fractalscape::theta_io::{read_theta, theta_from_string, theta_to_string};
use fractalscape::Error;

#[derive(Parser)]
#[command(name = "fractalscape", version, about = "Fractal-landscape diagnostics for policy optimization")]
struct Cli {
    /// Master seed for all randomness. FRACTALSCAPE_SEED overrides this.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the truncated discounted objective J(θ).
    Eval(EvalArgs),
    /// Estimate the maximal Lyapunov exponent of the closed loop.
    Mle(MleArgs),
    /// Estimate the Hölder exponent of J around θ by variance scaling.
    Holder(HolderArgs),
    /// Estimate the policy-gradient direction (Gaussian policies).
    Grad(GradArgs),
    /// Evaluate J along a direction in parameter space.
    Scan(ScanArgs),
    /// Evaluate J over a scalar parameter interval.
    Sweep(SweepArgs),
    /// Run a pinned experiment pipeline (fig2 | fig3 | fig4).
    Repro(ReproArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Linear,
    LinearGaussian,
    TanhNet,
    TanhNetGaussian,
    Uniform,
}

#[derive(Args)]
struct ProblemArgs {
    /// Environment: logistic | sat1d | sat1d-shifted | pendulum | acrobot.
    #[arg(long)]
    env: String,
    /// Policy family. Defaults to linear for the 1-D environments and
    /// tanh-net for pendulum/acrobot.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Hidden width of the tanh network.
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    /// Uniform-policy exponent β.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Policy standard deviation σ0 for Gaussian kinds. Fills the log σ slot
    /// when the θ row does not carry one.
    #[arg(long)]
    sigma: Option<f64>,
    /// θ as inline comma-separated values or a theta-file path.
    #[arg(long)]
    theta: String,
    /// Initial state as comma-separated values (default: the environment's).
    #[arg(long)]
    s0: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Average this many stochastic sample paths instead of the
    /// deterministic evaluation (16 when the flag is given bare).
    #[arg(long, num_args = 0..=1, default_missing_value = "16")]
    stochastic_paths: Option<usize>,
}

#[derive(Args)]
struct MleArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Use the coupled sample-path estimator for stochastic policies.
    #[arg(long)]
    stochastic: bool,
    /// Sweep a scalar θ over `lo:hi:n` instead of a single estimate.
    #[arg(long)]
    grid: Option<String>,
    /// Report the non-smoothness threshold `λ > -log γ` for this γ.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    t_max: usize,
    #[arg(long, default_value_t = 1e-8)]
    d0: f64,
    #[arg(long, default_value_t = 1e-4)]
    renorm_threshold: f64,
    #[arg(long, default_value_t = 100)]
    transient_skip: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Sample paths for the stochastic estimator.
    #[arg(long, default_value_t = 64)]
    paths: usize,
    /// Write the sweep CSV here (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HolderArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// σ ladder as `lo:hi:n` (default 1e-5:1e-2:12).
    #[arg(long)]
    sigma_grid: Option<String>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Perturb the log σ coordinate of Gaussian policies too.
    #[arg(long)]
    scan_sigma: bool,
    /// Write the (σ, variance) pairs as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GradArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = DEFAULT_EPISODES)]
    episodes: usize,
    /// Advantage baseline.
    #[arg(long, value_enum, default_value_t = BaselineArg::MeanReturn)]
    baseline: BaselineArg,
    /// Drop the γ^t weighting on the score term.
    #[arg(long)]
    undiscounted_visitation: bool,
    /// Write η as a theta-format CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    MeanReturn,
    None,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Direction as a theta-format file or inline comma-separated values.
    #[arg(long)]
    direction: String,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1e-7)]
    step_size: f64,
    /// Divide the direction by its norm first.
    #[arg(long)]
    normalize: bool,
    /// Evaluate one stochastic sample path per point.
    #[arg(long)]
    stochastic_single_path: bool,
    /// Write the CSV here (stdout otherwise); a JSON sidecar records config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Environment with a scalar policy parameter.
    #[arg(long)]
    env: String,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long)]
    lo: f64,
    #[arg(long)]
    hi: f64,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(long)]
    s0: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproArgs {
    /// Figure to reproduce: fig2 | fig3 | fig4.
    figure: Option<String>,
    /// Re-run the configuration recorded in this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "repro-out")]
    out: PathBuf,
    #[arg(long)]
    sigma_points: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    scan_steps: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    sweep_points: Option<usize>,
    #[arg(long)]
    mle_points: Option<usize>,
    #[arg(long)]
    mle_tmax: Option<usize>,
}

/// Everything needed to reproduce a pipeline run bit for bit.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    artifact_version: String,
    figure: String,
    master_seed: u64,
    scale: ReproScale,
    threads: Option<usize>,
    wall_ms: u128,
    created_unix_ms: u128,
    outputs: Vec<OutputEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutputEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("fractalscape: could not configure {n} worker threads");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fractalscape: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn master_seed(cli_seed: Option<u64>, default: u64) -> Result<u64, Error> {
    if let Ok(v) = std::env::var("FRACTALSCAPE_SEED") {
        return v.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("FRACTALSCAPE_SEED is not an integer: {v:?}"))
        });
    }
    Ok(cli_seed.unwrap_or(default))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Eval(args) => cmd_eval(args, master_seed(cli.seed, 0)?),
        Command::Mle(args) => cmd_mle(args, master_seed(cli.seed, 0)?),
        Command::Holder(args) => cmd_holder(args, master_seed(cli.seed, 0)?),
        Command::Grad(args) => cmd_grad(args, master_seed(cli.seed, 0)?),
        Command::Scan(args) => cmd_scan(args, master_seed(cli.seed, 0)?),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Repro(args) => {
            cmd_repro(args, cli.seed, cli.threads)
        }
    }
}

fn parse_floats(text: &str) -> Option<Vec<f64>> {
    let values: Result<Vec<f64>, _> =
        text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    values.ok().filter(|v| !v.is_empty())
}

/// `lo:hi:n` into an inclusive linear grid.
fn parse_linear_grid(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidConfig(format!("expected lo:hi:n, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 2 || !(hi > lo) {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

/// `lo:hi:n` into a logarithmic grid (for σ ladders).
fn parse_log_grid(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidConfig(format!("expected lo:hi:n, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 2 || !(hi > lo) || lo <= 0.0 {
        return Err(bad());
    }
    Ok(log_spaced(lo, hi, n))
}

struct Problem {
    env: EnvModel,
    spec: PolicySpec,
    theta: ParamVector,
    s0: State,
}

fn resolve_problem(args: &ProblemArgs) -> Result<Problem, Error> {
    let env = EnvModel::from_name(&args.env)?;
    let policy = args.policy.unwrap_or(match env.kind {
        EnvKind::Pendulum | EnvKind::Acrobot => PolicyArg::TanhNet,
        EnvKind::Sat1dShifted => PolicyArg::Uniform,
        _ => PolicyArg::Linear,
    });
    let spec = match policy {
        PolicyArg::Linear => PolicySpec::linear_det(env.state_dim, env.action_dim),
        PolicyArg::LinearGaussian => PolicySpec::linear_gaussian(env.state_dim, env.action_dim),
        PolicyArg::TanhNet => {
            PolicySpec::tanh_net_det(env.state_dim, env.action_dim, args.hidden)
        }
        PolicyArg::TanhNetGaussian => {
            PolicySpec::tanh_net_gaussian(env.state_dim, env.action_dim, args.hidden)
        }
        PolicyArg::Uniform => PolicySpec::uniform_shifted(args.beta),
    };
    spec.validate()?;
    let theta = resolve_theta(&spec, &args.theta, args.sigma)?;
    let s0 = match &args.s0 {
        Some(text) => {
            let values = parse_floats(text).ok_or_else(|| {
                Error::InvalidConfig(format!("could not parse s0 values from {text:?}"))
            })?;
            State::new(values)
        }
        None => env.default_initial_state(),
    };
    Ok(Problem { env, spec, theta, s0 })
}

/// θ comes either inline (`1.5` or `0.1,0.2,...`) or from a theta file. A
/// Gaussian policy whose row lacks the log σ slot gets it appended from
/// `--sigma` (default 0.1).
fn resolve_theta(
    spec: &PolicySpec,
    theta_arg: &str,
    sigma: Option<f64>,
) -> Result<ParamVector, Error> {
    let mut values = match parse_floats(theta_arg) {
        Some(v) => v,
        None => {
            let (_layout, v) = read_theta(Path::new(theta_arg))?;
            v
        }
    };
    let p = spec.param_count();
    if spec.is_gaussian() && values.len() == p - 1 {
        values.push(sigma.unwrap_or(DEFAULT_SIGMA0).ln());
    } else if let (Some(s), Some(idx)) = (sigma, spec.sigma_index()) {
        if values.len() == p {
            values[idx] = s.ln();
        }
    }
    if values.len() != p {
        return Err(Error::LayoutMismatch(format!(
            "policy {} expects {} parameters, got {}",
            spec.descriptor(),
            p,
            values.len()
        )));
    }
    Ok(ParamVector::new(values))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn cmd_eval(args: EvalArgs, seed: u64) -> Result<(), Error> {
    let problem = resolve_problem(&args.problem)?;
    let mode = match args.stochastic_paths {
        Some(n) => EvalMode::Stochastic { n_paths: n },
        None => EvalMode::Deterministic,
    };
    let cfg = RolloutConfig {
        gamma: args.gamma,
        horizon: args.horizon,
        s0: problem.s0.clone(),
        mode,
        master_seed: seed,
        common_random_numbers: true,
    };
    let j = objective(&problem.env, &problem.spec, &problem.theta, &cfg)?;
    print_json(&serde_json::json!({
        "J": j,
        "tail_bound": tail_bound(&problem.env, args.gamma, args.horizon),
        "manifest": {
            "env": problem.env.kind.name(),
            "policy": problem.spec.descriptor(),
            "gamma": args.gamma,
            "horizon": args.horizon,
            "mode": match mode { EvalMode::Deterministic => "deterministic".to_string(), EvalMode::Stochastic { n_paths } => format!("stochastic:{n_paths}") },
            "master_seed": seed,
            "s0": problem.s0.values,
        },
    }));
    Ok(())
}

fn cmd_mle(args: MleArgs, seed: u64) -> Result<(), Error> {
    let problem = resolve_problem(&args.problem)?;
    let cfg = MleConfig {
        d0: args.d0,
        renorm_threshold: args.renorm_threshold,
        t_max: args.t_max,
        transient_skip: args.transient_skip,
        n_paths: args.paths,
        n_restarts: args.restarts,
        master_seed: seed,
        ..MleConfig::default()
    };

    if let Some(grid_text) = &args.grid {
        let grid = parse_linear_grid(grid_text)?;
        let points = mle_sweep(&problem.env, &problem.spec, &grid, &problem.s0, &cfg)?;
        let csv = sweep_to_csv(&points);
        match &args.out {
            Some(path) => std::fs::write(path, &csv)?,
            None => print!("{csv}"),
        }
        return Ok(());
    }

    let est = if args.stochastic {
        estimate_mle_stochastic(&problem.env, &problem.spec, &problem.theta, &problem.s0, &cfg)?
    } else {
        estimate_mle(&problem.env, &problem.spec, &problem.theta, &problem.s0, &cfg)?
    };
    let threshold = args.gamma.map(|g| {
        serde_json::json!({
            "gamma": g,
            "neg_log_gamma": -g.ln(),
            "exceeds": est.exceeds_discount_threshold(g),
        })
    });
    print_json(&serde_json::json!({
        "lambda": est.lambda,
        "n_renorms": est.n_renorms,
        "steps_counted": est.steps_counted,
        "censored": est.censored,
        "threshold": threshold,
        "manifest": {
            "env": problem.env.kind.name(),
            "policy": problem.spec.descriptor(),
            "stochastic": args.stochastic,
            "t_max": args.t_max,
            "d0": args.d0,
            "master_seed": seed,
            "s0": problem.s0.values,
        },
    }));
    Ok(())
}

fn cmd_holder(args: HolderArgs, seed: u64) -> Result<(), Error> {
    let problem = resolve_problem(&args.problem)?;
    let sigma_grid = match &args.sigma_grid {
        Some(text) => parse_log_grid(text)?,
        None => log_spaced(1e-5, 1e-2, 12),
    };
    let hcfg = HolderConfig {
        sigma_grid,
        n_samples: args.samples,
        master_seed: seed,
        scan_sigma: args.scan_sigma,
    };
    let cfg = RolloutConfig::deterministic(args.gamma, args.horizon, problem.s0.clone());
    let report = holder_for_env(&problem.env, &problem.spec, &problem.theta, &cfg, &hcfg)?;
    if let Some(path) = &args.csv {
        std::fs::write(path, pairs_to_csv(&report.fit.pairs))?;
    }
    print_json(&serde_json::json!({
        "slope": report.fit.slope,
        "intercept": report.fit.intercept,
        "r2": report.fit.r_squared,
        "alpha": report.fit.alpha,
        "class": report.class,
        "tail_guard_triggered": report.tail_guard_triggered,
        "tail_bound": report.tail_bound,
        "j_range": report.j_range,
        "pairs": report.fit.pairs,
        "manifest": {
            "env": problem.env.kind.name(),
            "policy": problem.spec.descriptor(),
            "gamma": args.gamma,
            "horizon": args.horizon,
            "samples": args.samples,
            "scan_sigma": args.scan_sigma,
            "master_seed": seed,
            "s0": problem.s0.values,
        },
    }));
    Ok(())
}

fn cmd_grad(args: GradArgs, seed: u64) -> Result<(), Error> {
    let problem = resolve_problem(&args.problem)?;
    let cfg = GradConfig {
        baseline: match args.baseline {
            BaselineArg::MeanReturn => Baseline::MeanReturn,
            BaselineArg::None => Baseline::None,
        },
        discounted_visitation: !args.undiscounted_visitation,
        ..GradConfig::new(args.episodes, args.gamma, args.horizon, seed)
    };
    let est = estimate_gradient(&problem.env, &problem.spec, &problem.theta, &problem.s0, &cfg)?;
    if let Some(path) = &args.out {
        std::fs::write(path, theta_to_string("gradient-direction", &est.eta))?;
    }
    print_json(&serde_json::json!({
        "eta": est.eta,
        "norm": est.norm,
        "n_episodes": est.n_episodes,
        "manifest": {
            "env": problem.env.kind.name(),
            "policy": problem.spec.descriptor(),
            "gamma": args.gamma,
            "horizon": args.horizon,
            "episodes": args.episodes,
            "baseline": match args.baseline { BaselineArg::MeanReturn => "mean-return", BaselineArg::None => "none" },
            "discounted_visitation": !args.undiscounted_visitation,
            "master_seed": seed,
            "s0": problem.s0.values,
        },
    }));
    Ok(())
}

fn cmd_scan(args: ScanArgs, seed: u64) -> Result<(), Error> {
    let problem = resolve_problem(&args.problem)?;
    let direction = match parse_floats(&args.direction) {
        Some(v) => v,
        None => {
            let text = std::fs::read_to_string(&args.direction)?;
            theta_from_string(&text)?.1
        }
    };
    let cfg = RolloutConfig {
        gamma: args.gamma,
        horizon: args.horizon,
        s0: problem.s0.clone(),
        mode: EvalMode::Deterministic,
        master_seed: seed,
        common_random_numbers: true,
    };
    let result = scan(
        &problem.env,
        &problem.spec,
        &problem.theta,
        &direction,
        args.steps,
        args.step_size,
        &cfg,
        args.normalize,
        args.stochastic_single_path,
    )?;
    let csv = result.to_csv();
    let meta = serde_json::json!({
        "env": problem.env.kind.name(),
        "policy": problem.spec.descriptor(),
        "gamma": args.gamma,
        "horizon": args.horizon,
        "steps": args.steps,
        "step_size": args.step_size,
        "normalize": args.normalize,
        "stochastic_single_path": args.stochastic_single_path,
        "master_seed": seed,
        "s0": problem.s0.values,
        "theta0": problem.theta.values,
        "direction": result.direction,
        "tail_bound": result.tail_bound,
        "point_errors": result.errors,
    });
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            let sidecar = path.with_extension("meta.json");
            std::fs::write(&sidecar, serde_json::to_string_pretty(&meta).expect("json"))?;
        }
        None => {
            print!("{csv}");
            eprintln!("{}", serde_json::to_string(&meta).expect("json"));
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let env = EnvModel::from_name(&args.env)?;
    let spec = PolicySpec::linear_det(env.state_dim, env.action_dim);
    let s0 = match &args.s0 {
        Some(text) => State::new(parse_floats(text).ok_or_else(|| {
            Error::InvalidConfig(format!("could not parse s0 values from {text:?}"))
        })?),
        None => env.default_initial_state(),
    };
    let cfg = RolloutConfig::deterministic(args.gamma, args.horizon, s0.clone());
    let result = sweep(&env, &spec, args.lo, args.hi, args.points, &cfg)?;
    let csv = result.to_csv();
    let meta = serde_json::json!({
        "env": env.kind.name(),
        "gamma": args.gamma,
        "horizon": args.horizon,
        "lo": args.lo,
        "hi": args.hi,
        "points": args.points,
        "s0": s0.values,
        "tail_bound": result.tail_bound,
        "point_errors": result.errors,
    });
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            let sidecar = path.with_extension("meta.json");
            std::fs::write(&sidecar, serde_json::to_string_pretty(&meta).expect("json"))?;
        }
        None => {
            print!("{csv}");
            eprintln!("{}", serde_json::to_string(&meta).expect("json"));
        }
    }
    Ok(())
}

fn cmd_repro(args: ReproArgs, cli_seed: Option<u64>, threads: Option<usize>) -> Result<(), Error> {
    let (figure, seed, scale) = match &args.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
                Error::InvalidConfig(format!("could not parse manifest {path:?}: {e}"))
            })?;
            let figure = Figure::from_name(&manifest.figure).ok_or_else(|| {
                Error::InvalidConfig(format!("manifest names unknown figure {:?}", manifest.figure))
            })?;
            (figure, manifest.master_seed, manifest.scale)
        }
        None => {
            let name = args.figure.as_deref().ok_or_else(|| {
                Error::InvalidConfig("repro needs a figure name or --manifest".into())
            })?;
            let figure = Figure::from_name(name).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown figure {name:?} (expected fig2, fig3 or fig4)"
                ))
            })?;
            let mut scale = ReproScale::default();
            if let Some(v) = args.sigma_points {
                scale.sigma_points = v;
            }
            if let Some(v) = args.samples {
                scale.samples = v;
            }
            if let Some(v) = args.horizon {
                scale.horizon = v;
            }
            if let Some(v) = args.scan_steps {
                scale.scan_steps = v;
            }
            if let Some(v) = args.episodes {
                scale.episodes = v;
            }
            if let Some(v) = args.sweep_points {
                scale.sweep_points = v;
            }
            if let Some(v) = args.mle_points {
                scale.mle_points = v;
            }
            if let Some(v) = args.mle_tmax {
                scale.mle_tmax = v;
            }
            (figure, master_seed(cli_seed, DEFAULT_REPRO_SEED)?, scale)
        }
    };

    let start = Instant::now();
    let output = repro_figure(figure, seed, &scale)?;
    std::fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::with_capacity(output.files.len());
    for (name, contents) in &output.files {
        std::fs::write(args.out.join(name), contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        outputs.push(OutputEntry {
            name: name.clone(),
            bytes: contents.len(),
            sha256: format!("{:x}", hasher.finalize()),
        });
    }
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        figure: figure.name().to_string(),
        master_seed: seed,
        scale,
        threads,
        wall_ms: start.elapsed().as_millis(),
        created_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        outputs,
    };
    std::fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("json") + "\n",
    )?;
    print_json(&serde_json::to_value(&output.summary).expect("json"));
    Ok(())
}

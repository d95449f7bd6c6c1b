//! `svt`: generate instances, run the solvers, benchmarks and the
//! invariant suite.
//!
//! Exit status is 0 on success, 1 when a solver stops without converging
//! (or a check fails) and 2 on I/O or validation errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use svt_core::bench::{bench_run, BenchPreset, PresetName};
use svt_core::check::run_checks;
use svt_core::io::{
    read_lowrank, read_matrix_market, read_operator, write_lowrank, write_problem, write_report, write_trace_file,
};
use svt_core::problem::{generate, relative_error, ProblemSpec};
use svt_core::solver::{
    default_delta, default_tau, svt_complete, svt_dantzig, svt_linear, LinearMap, DANTZIG_STEP_BOUND,
    COMPLETION_STEP_BOUND, DEFAULT_NOISE_EPS,
};
use svt_core::{SampledMatrix, SolveReport, StopRule, SvtConfig, SvtError};

#[derive(Parser, Debug)]
#[command(name = "svt", version, about = "Singular value thresholding for low-rank matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random low-rank completion instance.
    Gen(GenArgs),
    /// Complete a matrix from a MatrixMarket file, or solve a linear system
    /// given by `--operator`.
    Solve(SolveArgs),
    /// Matrix Dantzig selector with entrywise tolerances.
    Dantzig(DantzigArgs),
    /// Run a benchmark preset.
    Bench(BenchArgs),
    /// Run the invariant suite on small random instances.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// Column count; defaults to `n`.
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long, short)]
    rank: usize,
    /// Samples as a multiple of the degrees of freedom.
    #[arg(long, default_value_t = 5.0, conflicts_with = "m")]
    oversampling: f64,
    /// Number of samples.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StopKind {
    Residual,
    Gap,
    Noisy,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Defaults to 5 max(n1, n2).
    #[arg(long)]
    tau: Option<f64>,
    /// Defaults to 1.2 n1 n2 / m.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 5)]
    ell: usize,
    #[arg(long, default_value_t = 500)]
    kmax: usize,
    #[arg(long, value_enum, default_value_t = StopKind::Residual)]
    stop: StopKind,
    /// Relative duality gap for `--stop gap`.
    #[arg(long, default_value_t = 1e-4)]
    gap_tol: f64,
    /// Noise level for `--stop noisy`.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NOISE_EPS)]
    noise_eps: f64,
    /// Accept an explicit `--delta` above the convergence bound.
    #[arg(long)]
    unsafe_step: bool,
    /// Write the iteration log as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the solution and a JSON report into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground truth directory; reports the relative error when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Observations in MatrixMarket coordinate format.
    #[arg(required_unless_present = "operator")]
    input: Option<PathBuf>,
    /// JSON operator file with right-hand side; switches to the general
    /// linear solver.
    #[arg(long, conflicts_with = "input")]
    operator: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct DantzigArgs {
    input: PathBuf,
    /// Entrywise tolerance `E_ij = sigma`.
    #[arg(long)]
    tolerance_sigma: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    preset: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Comma-separated label parts, e.g. `1000x1000,r=10`.
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Output directory; defaults to `bench-out/<preset>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run only checks whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
}

enum Failure {
    NotConverged(String),
    Invalid(SvtError),
}

impl From<SvtError> for Failure {
    fn from(e: SvtError) -> Self {
        Failure::Invalid(e)
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Dantzig(a) => cmd_dantzig(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Honours `SVT_THREADS` (0 or unset = rayon's default).
fn configure_threads() -> Result<(), SvtError> {
    let Ok(raw) = std::env::var("SVT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| SvtError::InvalidConfig(format!("SVT_THREADS={raw:?} is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SvtError::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let n2 = a.n2.unwrap_or(a.n);
    let mut spec = ProblemSpec::square(a.n, a.rank, a.oversampling, a.seed);
    if n2 != a.n {
        let dof = svt_core::problem::degrees_of_freedom(a.n, n2, a.rank);
        spec.n2 = n2;
        spec.m = ((a.oversampling * dof as f64).round() as usize).min(a.n * n2);
    }
    if let Some(m) = a.m {
        spec.m = m;
    }
    let p = generate(&spec.with_noise(a.noise_sigma))?;
    let files = write_problem(&a.out, &p)?;
    println!(
        "{}x{} rank {} with {} samples (m/d_r = {:.3}, m/n1n2 = {:.4}, noise ratio {:.3e})",
        p.spec.n1,
        p.spec.n2,
        p.spec.rank,
        p.spec.m,
        p.metrics.oversampling,
        p.metrics.sampling_ratio,
        p.metrics.noise_ratio
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Resolves solver flags against the defaults for an `n1 x n2` problem with
/// `m` observations. `step_bound` scales the default step.
fn build_config(s: &SolverArgs, n1: usize, n2: usize, m: usize, step_bound: f64) -> Result<SvtConfig, SvtError> {
    let tau = s.tau.unwrap_or_else(|| default_tau(n1, n2));
    let default_step = s.delta.is_none();
    let delta = s
        .delta
        .unwrap_or_else(|| default_delta(n1, n2, m) * step_bound / COMPLETION_STEP_BOUND);
    let stop_rule = match s.stop {
        StopKind::Residual => StopRule::RelativeResidual,
        StopKind::Gap => StopRule::DualityGap { gap_tol: s.gap_tol },
        StopKind::Noisy => StopRule::NoisyDiscrepancy {
            sigma: s
                .sigma
                .ok_or_else(|| SvtError::InvalidConfig("--stop noisy needs --sigma".into()))?,
            noise_eps: s.noise_eps,
        },
    };
    let mut cfg = SvtConfig::new(tau, delta)
        .with_eps(s.eps)
        .with_k_max(s.kmax)
        .with_stop_rule(stop_rule);
    cfg.ell = s.ell;
    // the recommended step is above the proven bound by design
    cfg.unsafe_step = s.unsafe_step || default_step;
    cfg.validate(step_bound, "config")?;
    Ok(cfg)
}

fn finish(report: &SolveReport, s: &SolverArgs, truth_err: Option<f64>) -> CliResult {
    if let Some(path) = &s.trace {
        write_trace_file(path, &report.trajectory)?;
    }
    if let Some(dir) = &s.out {
        write_lowrank(dir.join("X"), &report.x)?;
        write_report(dir.join("report.json"), report)?;
    }
    print!(
        "{:?} after {} iterations (k0 = {}), relative residual {:.3e}, rank {}, {:.2}s",
        report.status,
        report.iterations,
        report.k0,
        report.relative_residual,
        report.final_rank(),
        report.wall_seconds
    );
    if let Some(e) = truth_err {
        print!(", relative error {e:.3e}");
    }
    println!();
    if report.converged() {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "solver stopped with {:?}{}",
            report.status,
            report.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
        )))
    }
}

fn truth_error(s: &SolverArgs, report: &SolveReport) -> Result<Option<f64>, SvtError> {
    match &s.truth {
        Some(dir) => Ok(Some(relative_error(&report.x, &read_lowrank(dir)?)?)),
        None => Ok(None),
    }
}

fn print_config(cfg: &SvtConfig) -> CliResult {
    println!("{}", serde_json::to_string_pretty(cfg).map_err(SvtError::from)?);
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    if let Some(path) = &a.operator {
        let (op, b) = read_operator(path)?;
        let (n1, n2) = op.shape();
        let cfg = build_config(&a.solver, n1, n2, op.len(), COMPLETION_STEP_BOUND / op.op_norm_bound().powi(2))?;
        if a.solver.dry_run {
            return print_config(&cfg);
        }
        let report = svt_linear(&op, &b, &cfg)?;
        let err = truth_error(&a.solver, &report)?;
        return finish(&report, &a.solver, err);
    }
    let input = a.input.as_deref().expect("clap requires input without --operator");
    let obs = read_matrix_market(input)?;
    let (n1, n2) = obs.shape();
    let cfg = build_config(&a.solver, n1, n2, obs.nnz(), COMPLETION_STEP_BOUND)?;
    if a.solver.dry_run {
        return print_config(&cfg);
    }
    let report = svt_complete(&obs, &cfg)?;
    let err = truth_error(&a.solver, &report)?;
    finish(&report, &a.solver, err)
}

fn cmd_dantzig(a: DantzigArgs) -> CliResult {
    if !(a.tolerance_sigma >= 0.0) {
        return Err(SvtError::InvalidConfig("--tolerance-sigma must be >= 0".into()).into());
    }
    let obs = read_matrix_market(&a.input)?;
    let (n1, n2) = obs.shape();
    let mut solver = a.solver;
    if solver.stop == StopKind::Noisy && solver.sigma.is_none() {
        solver.sigma = Some(a.tolerance_sigma);
    }
    let cfg = build_config(&solver, n1, n2, obs.nnz(), DANTZIG_STEP_BOUND)?;
    if solver.dry_run {
        return print_config(&cfg);
    }
    let e = SampledMatrix::new(obs.pattern().clone(), vec![a.tolerance_sigma; obs.nnz()])?;
    let report = svt_dantzig(&obs, &e, &cfg)?;
    let err = truth_error(&solver, &report)?;
    finish(&report, &solver, err)
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let name: PresetName = a.preset.parse()?;
    let preset = BenchPreset {
        name,
        scale: a.scale,
        repetitions: a.repetitions,
        seed: a.seed,
        only: a.only,
        n: a.n,
        r: a.r,
    };
    let results = bench_run(&preset)?;
    let out = a
        .out
        .unwrap_or_else(|| Path::new("bench-out").join(name.as_str()));
    let files = results.write_outputs(&out)?;
    print!("{}", results.render_table());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> CliResult {
    let outcomes = run_checks(a.seed, a.filter.as_deref());
    if outcomes.is_empty() {
        return Err(SvtError::InvalidConfig(format!("no check matches {:?}", a.filter.unwrap_or_default())).into());
    }
    let mut failed = 0;
    for c in &outcomes {
        println!(
            "{} {:<24} {:>7.2}s  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.seconds,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::NotConverged(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

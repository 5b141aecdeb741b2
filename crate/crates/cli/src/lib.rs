//! `grouplasso` command-line tool: solve, path, simulate, bench.
//!
//! Exit codes: 0 success (including non-converged runs, reported in the
//! output), 1 malformed input, 2 dimension mismatch, 3 solver refusal.

pub mod bench;
pub mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grouplasso::diagnostics::{accuracy_bounds, certificate, certificate_tolerance};
use grouplasso::model::{objective, Coefficients, GroupedProblem, Penalty};
use grouplasso::oracle::{fista_solve, OracleOptions};
use grouplasso::simgen::{bounds_for_ladder, penalty_ladder, sample_problem, SimulationConfig};
use grouplasso::sls::{self, SolveOptions};
use grouplasso::spectral::SpectralCache;
use grouplasso::ssls;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Malformed(String),
    Dimension(String),
    Refusal(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Malformed(_) | CliError::Io(_) => 1,
            CliError::Dimension(_) => 2,
            CliError::Refusal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Malformed(m) => write!(f, "malformed input: {m}"),
            CliError::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            CliError::Refusal(m) => write!(f, "solver refused: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<grouplasso::Error> for CliError {
    fn from(e: grouplasso::Error) -> Self {
        use grouplasso::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidInput(_) => CliError::Malformed(msg),
            E::DimensionMismatch { .. } | E::GroupOutOfRange { .. } => CliError::Dimension(msg),
            E::Contract(_)
            | E::NumericalFailure { .. }
            | E::GroupTooLarge { .. }
            | E::InfeasibleSigns { .. }
            | E::Degenerate(_) => CliError::Refusal(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "grouplasso",
    version,
    about = "Group lasso and sparse group lasso by exact block coordinate descent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem read from CSV files.
    Solve(SolveArgs),
    /// Warm-started solution path over a decreasing penalty sequence.
    Path(PathArgs),
    /// Generate a simulated problem.
    Simulate(SimulateArgs),
    /// Time solvers on simulated problems over a scenario grid.
    Bench(bench::BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Sls,
    Ssls,
    Fista,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Sls => "sls",
            Algo::Ssls => "ssls",
            Algo::Fista => "fista",
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Design matrix CSV (rows = samples, no header).
    #[arg(long)]
    pub x: PathBuf,
    /// Response CSV (single column).
    #[arg(long)]
    pub y: PathBuf,
    /// One line of comma-separated group sizes.
    #[arg(long)]
    pub groups: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Sup-norm change between sweeps at which to stop.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_sweeps: usize,
    /// Accepted for interface uniformity; solves are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solver; defaults to sls for --lambda and ssls for --lambda1/--lambda2.
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Group lasso penalty.
    #[arg(long, conflicts_with_all = ["lambda1", "lambda2"], required_unless_present = "lambda1")]
    pub lambda: Option<f64>,
    /// Sparse group lasso: weight on the group norms.
    #[arg(long, requires = "lambda2")]
    pub lambda1: Option<f64>,
    /// Sparse group lasso: weight on the 1-norm.
    #[arg(long, requires = "lambda1")]
    pub lambda2: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Coefficients CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a certificate JSON to this path.
    #[arg(long)]
    pub certify: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Ladder lambda_max * 2^-i, i = 1..=N (ignored with --lambdas).
    #[arg(long, default_value_t = 5)]
    pub ladder_length: usize,
    /// Explicit strictly decreasing penalties, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Fixed 1-norm weight; switches to the sparse group lasso.
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory for path.csv, trace.csv and bounds.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub group_size: usize,
    /// Within-group correlation in [0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    /// Between-group similarity in [0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for X.csv, y.csv, groups.csv and truth.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Outcome of one solve, whichever algorithm ran.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub beta: Coefficients,
    /// Sweeps for block descent, iterations for FISTA.
    pub sweeps: usize,
    pub converged: bool,
    pub seconds: f64,
}

pub fn default_algo(penalty: &Penalty) -> Algo {
    match penalty {
        Penalty::GroupLasso { .. } => Algo::Sls,
        Penalty::SparseGroupLasso { .. } => Algo::Ssls,
    }
}

/// FISTA options matching the certificate-based notion of convergence.
pub fn fista_options(
    problem: &GroupedProblem,
    max_iters: usize,
    initial: Option<Coefficients>,
) -> OracleOptions {
    OracleOptions {
        tol: certificate_tolerance(problem),
        max_iters,
        step: None,
        initial,
    }
}

/// Single solve with the chosen algorithm, reusing `cache` for the exact solvers.
pub fn run_solver(
    problem: &GroupedProblem,
    penalty: &Penalty,
    algo: Algo,
    options: &SolveOptions,
    cache: &mut SpectralCache,
) -> Result<RunResult, CliError> {
    let start = Instant::now();
    let (beta, sweeps, converged) = match algo {
        Algo::Sls => {
            if !matches!(penalty, Penalty::GroupLasso { .. }) {
                return Err(CliError::Malformed(
                    "--algo sls needs --lambda (group lasso)".into(),
                ));
            }
            let s = sls::solve_with_cache(problem, penalty, options, cache, &mut |_, _| {})?;
            (s.beta, s.trace.sweeps, s.trace.converged)
        }
        Algo::Ssls => {
            if !matches!(penalty, Penalty::SparseGroupLasso { .. }) {
                return Err(CliError::Malformed(
                    "--algo ssls needs --lambda1 and --lambda2".into(),
                ));
            }
            let s = ssls::solve_sgl_with_cache(problem, penalty, options, cache, &mut |_, _| {})?;
            (s.beta, s.trace.sweeps, s.trace.converged)
        }
        Algo::Fista => {
            let opts = fista_options(
                problem,
                options.max_sweeps.saturating_mul(10),
                options.initial.clone(),
            );
            let (b, rep) = fista_solve(problem, penalty, &opts)?;
            (b, rep.iterations, rep.converged)
        }
    };
    Ok(RunResult {
        beta,
        sweeps,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
pub struct BoundsJson {
    pub objective: f64,
    pub lse: f64,
}

#[derive(Debug, Serialize)]
pub struct CertificateJson {
    pub algorithm: Algo,
    pub lambda1: f64,
    pub lambda2: f64,
    pub w_norm: f64,
    pub certificate_tolerance: f64,
    pub bounds: BoundsJson,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub seconds: f64,
}

fn solve_options(
    args: &SolverArgs,
    initial: Option<Coefficients>,
) -> Result<SolveOptions, CliError> {
    let opts = SolveOptions {
        tol: args.tol,
        max_sweeps: args.max_sweeps,
        initial,
    };
    opts.validate()?;
    Ok(opts)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let problem = io::read_problem(&args.data.x, &args.data.y, &args.data.groups)?;
    let penalty = match (args.lambda, args.lambda1, args.lambda2) {
        (Some(l), None, None) => Penalty::group(l)?,
        (None, Some(l1), Some(l2)) => Penalty::sparse_group(l1, l2)?,
        _ => {
            return Err(CliError::Malformed(
                "give --lambda, or both --lambda1 and --lambda2".into(),
            ))
        }
    };
    let algo = args.solver.algo.unwrap_or_else(|| default_algo(&penalty));
    let options = solve_options(&args.solver, None)?;
    let run = run_solver(
        &problem,
        &penalty,
        algo,
        &options,
        &mut SpectralCache::new(),
    )?;
    io::emit(args.out.as_deref(), &io::coefficients_csv(&run.beta))?;
    if let Some(path) = &args.certify {
        let cert = certificate(&problem, &penalty, &run.beta)?;
        let bounds = accuracy_bounds(&problem, &penalty, &run.beta, &cert, None)?;
        let json = CertificateJson {
            algorithm: algo,
            lambda1: penalty.group_weight(),
            lambda2: penalty.l1_weight(),
            w_norm: cert.w_norm,
            certificate_tolerance: certificate_tolerance(&problem),
            bounds: BoundsJson {
                objective: bounds.bound_objective,
                lse: bounds.bound_lse,
            },
            objective: objective(&problem, &penalty, &run.beta)?,
            sweeps: run.sweeps,
            converged: run.converged,
            seconds: run.seconds,
        };
        let text =
            serde_json::to_string_pretty(&json).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        io::emit(Some(path), &text)?;
    }
    Ok(())
}

pub fn cmd_path(args: &PathArgs) -> Result<(), CliError> {
    let problem = io::read_problem(&args.data.x, &args.data.y, &args.data.groups)?;
    let lambdas = match &args.lambdas {
        Some(l) => {
            if l.is_empty()
                || l.iter().any(|v| !(v.is_finite() && *v > 0.0))
                || l.windows(2).any(|w| w[1] >= w[0])
            {
                return Err(CliError::Malformed(
                    "--lambdas must be positive and strictly decreasing".into(),
                ));
            }
            l.clone()
        }
        None => penalty_ladder(&problem, args.ladder_length)?.values,
    };
    let make_penalty = |l: f64| -> Result<Penalty, CliError> {
        Ok(match args.lambda2 {
            Some(l2) => Penalty::sparse_group(l, l2)?,
            None => Penalty::group(l)?,
        })
    };
    let algo = args.solver.algo.unwrap_or(if args.lambda2.is_some() {
        Algo::Ssls
    } else {
        Algo::Sls
    });
    let mut cache = SpectralCache::new();
    let mut initial = None;
    let mut path_csv = String::from("lambda,group,index,value\n");
    let mut trace_csv = String::from("lambda,sweeps,converged,objective,w_norm,seconds\n");
    let mut solutions = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let penalty = make_penalty(lambda)?;
        let options = solve_options(&args.solver, initial.take())?;
        let run = run_solver(&problem, &penalty, algo, &options, &mut cache)?;
        let lam = io::fmt_num(lambda);
        for (g, i, v) in io::coefficient_rows(&run.beta) {
            path_csv.push_str(&format!("{lam},{g},{i},{}\n", io::fmt_num(v)));
        }
        let w = certificate(&problem, &penalty, &run.beta)?.w_norm;
        let obj = objective(&problem, &penalty, &run.beta)?;
        trace_csv.push_str(&format!(
            "{lam},{},{},{},{},{}\n",
            run.sweeps,
            run.converged,
            io::fmt_num(obj),
            io::fmt_num(w),
            io::fmt_num(run.seconds)
        ));
        initial = Some(run.beta.clone());
        solutions.push(run.beta);
    }
    let ladder = grouplasso::simgen::PenaltyLadder {
        values: lambdas.clone(),
        bounds: None,
    };
    let bounds = bounds_for_ladder(&ladder, &solutions)?
        .bounds
        .unwrap_or_default();
    let mut bounds_csv = String::from("lambda,M\n");
    for (l, m) in lambdas.iter().zip(&bounds) {
        bounds_csv.push_str(&format!("{},{}\n", io::fmt_num(*l), io::fmt_num(*m)));
    }
    io::emit(Some(&args.out_dir.join("path.csv")), &path_csv)?;
    io::emit(Some(&args.out_dir.join("trace.csv")), &trace_csv)?;
    io::emit(Some(&args.out_dir.join("bounds.csv")), &bounds_csv)?;
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = SimulationConfig::new(args.n, args.k, args.group_size, args.a, args.b, args.seed)?;
    let (problem, truth) = sample_problem(&cfg)?;
    write_problem(&args.out_dir, &problem)?;
    io::emit(
        Some(&args.out_dir.join("truth.csv")),
        &io::coefficients_csv(&truth),
    )
}

/// Write `X.csv`, `y.csv` and `groups.csv` into `dir`.
pub fn write_problem(dir: &Path, problem: &GroupedProblem) -> Result<(), CliError> {
    io::emit(Some(&dir.join("X.csv")), &io::matrix_csv(problem.design()))?;
    io::emit(
        Some(&dir.join("y.csv")),
        &io::vector_csv(problem.y().as_slice()),
    )?;
    io::emit(
        Some(&dir.join("groups.csv")),
        &io::groups_csv(problem.group_sizes()),
    )
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bench(a) => bench::cmd_bench(&a),
    }
}

/// Parse `args` and run; returns the process exit code. Argument errors map
/// to exit 1 (malformed input); `--help` and `--version` exit 0.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

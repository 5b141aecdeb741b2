//! Timing harness: fresh simulated data per (scenario, trial), a geometric
//! penalty ladder, and a timed warm-started path solve per algorithm on the
//! same data. Only the path solve is inside the timer.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use grouplasso::model::{GroupedProblem, Penalty};
use grouplasso::simgen::{default_scenarios, penalty_ladder, sample_problem, Scenario, RNG_NAME};
use grouplasso::sls::SolveOptions;
use grouplasso::spectral::SpectralCache;
use rayon::prelude::*;
use serde::Serialize;

use crate::{io, run_solver, Algo, CliError};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Trials per scenario; fresh data each trial.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Scenarios separated by ';', e.g. "a=0.5,b=0.5,K=10;a=0.8,b=0.2,K=20".
    /// Defaults to the nine (a, b) pairs crossed with K in {10, 20, 40, 80}.
    #[arg(long)]
    pub grid: Option<String>,
    /// Algorithms, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sls,fista")]
    pub algos: Vec<Algo>,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub group_size: usize,
    #[arg(long, default_value_t = 5)]
    pub ladder_length: usize,
    /// SSLS uses (lambda, l2_ratio * lambda) at each rung.
    #[arg(long, default_value_t = 0.1)]
    pub l2_ratio: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; trials run sequentially with 1.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Directory for bench.csv, plot.csv and meta.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRow {
    pub scenario: String,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub algorithm: Algo,
    pub trials: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub mean_sweeps: f64,
    pub converged_fraction: f64,
}

/// One algorithm's path solve on one trial.
#[derive(Debug, Clone, Copy)]
struct TrialTiming {
    seconds: f64,
    sweeps: usize,
    converged: bool,
}

/// Seed of trial `t` of scenario `s`, derived from the base seed.
pub fn trial_seed(base: u64, scenario: usize, trial: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((scenario as u64) << 32 | trial as u64)
}

pub fn parse_grid(grid: Option<&str>) -> Result<Vec<Scenario>, CliError> {
    match grid {
        None => Ok(default_scenarios()),
        Some(g) => {
            let v = g
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<Scenario>().map_err(CliError::from))
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err(CliError::Malformed("--grid has no scenarios".into()));
            }
            Ok(v)
        }
    }
}

fn time_path(
    problem: &GroupedProblem,
    lambdas: &[f64],
    algo: Algo,
    args: &BenchArgs,
) -> Result<TrialTiming, CliError> {
    let start = Instant::now();
    let mut cache = SpectralCache::new();
    let mut initial = None;
    let mut sweeps = 0;
    let mut converged = true;
    for &lambda in lambdas {
        let penalty = match algo {
            Algo::Ssls => Penalty::SparseGroupLasso {
                lambda1: lambda,
                lambda2: args.l2_ratio * lambda,
            },
            _ => Penalty::GroupLasso { lambda },
        };
        let options = SolveOptions {
            tol: args.tol,
            max_sweeps: args.max_sweeps,
            initial: initial.take(),
        };
        let run = run_solver(problem, &penalty, algo, &options, &mut cache)?;
        sweeps += run.sweeps;
        converged &= run.converged;
        initial = Some(run.beta);
    }
    Ok(TrialTiming {
        seconds: start.elapsed().as_secs_f64(),
        sweeps,
        converged,
    })
}

fn run_trial(
    scenario: &Scenario,
    idx: usize,
    trial: usize,
    args: &BenchArgs,
) -> Result<Vec<TrialTiming>, CliError> {
    let cfg = scenario.config(args.n, args.group_size, trial_seed(args.seed, idx, trial))?;
    let (problem, _) = sample_problem(&cfg)?;
    let ladder = penalty_ladder(&problem, args.ladder_length)?;
    args.algos
        .iter()
        .map(|&algo| time_path(&problem, &ladder.values, algo, args))
        .collect()
}

fn summarize(scenario: &Scenario, algo: Algo, timings: &[TrialTiming]) -> BenchRow {
    let t = timings.len() as f64;
    let mean = timings.iter().map(|x| x.seconds).sum::<f64>() / t;
    let var = if timings.len() > 1 {
        timings
            .iter()
            .map(|x| (x.seconds - mean).powi(2))
            .sum::<f64>()
            / (t - 1.0)
    } else {
        0.0
    };
    BenchRow {
        scenario: scenario.to_string(),
        a: scenario.a,
        b: scenario.b,
        k: scenario.k,
        algorithm: algo,
        trials: timings.len(),
        mean_seconds: mean,
        std_seconds: var.sqrt(),
        mean_sweeps: timings.iter().map(|x| x.sweeps as f64).sum::<f64>() / t,
        converged_fraction: timings.iter().filter(|x| x.converged).count() as f64 / t,
    }
}

/// Run the benchmark and return one row per (scenario, algorithm).
pub fn run_bench(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    if args.trials == 0 {
        return Err(CliError::Malformed("--trials must be at least 1".into()));
    }
    if args.algos.is_empty() {
        return Err(CliError::Malformed("--algos is empty".into()));
    }
    if !(args.l2_ratio > 0.0 && args.l2_ratio.is_finite()) {
        return Err(CliError::Malformed("--l2-ratio must be positive".into()));
    }
    let scenarios = parse_grid(args.grid.as_deref())?;
    let tasks: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..args.trials).map(move |t| (s, t)))
        .collect();
    let results: Vec<Vec<TrialTiming>> = if args.jobs <= 1 {
        tasks
            .iter()
            .map(|&(s, t)| run_trial(&scenarios[s], s, t, args))
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(s, t)| run_trial(&scenarios[s], s, t, args))
                .collect::<Result<_, _>>()
        })?
    };
    let mut rows = Vec::with_capacity(scenarios.len() * args.algos.len());
    for (s, scenario) in scenarios.iter().enumerate() {
        let per_trial = &results[s * args.trials..(s + 1) * args.trials];
        for (ai, &algo) in args.algos.iter().enumerate() {
            let timings: Vec<TrialTiming> = per_trial.iter().map(|r| r[ai]).collect();
            rows.push(summarize(scenario, algo, &timings));
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct PlotRow<'a> {
    a: f64,
    b: f64,
    #[serde(rename = "K")]
    k: usize,
    algorithm: Algo,
    mean_seconds: f64,
    log10_mean_seconds: f64,
    scenario: &'a str,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    rng: &'a str,
    seed: u64,
    seed_rule: &'a str,
    trials: usize,
    n: usize,
    group_size: usize,
    ladder_length: usize,
    ladder_rule: &'a str,
    l2_ratio: f64,
    tol: f64,
    fista_tolerance: &'a str,
    jobs: usize,
    algorithms: &'a [Algo],
    scenarios: Vec<String>,
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let rows = run_bench(args)?;
    io::emit(Some(&args.out_dir.join("bench.csv")), &to_csv(&rows)?)?;
    let plot: Vec<PlotRow> = rows
        .iter()
        .map(|r| PlotRow {
            a: r.a,
            b: r.b,
            k: r.k,
            algorithm: r.algorithm,
            mean_seconds: r.mean_seconds,
            log10_mean_seconds: r.mean_seconds.max(f64::MIN_POSITIVE).log10(),
            scenario: &r.scenario,
        })
        .collect();
    io::emit(Some(&args.out_dir.join("plot.csv")), &to_csv(&plot)?)?;
    let meta = Meta {
        rng: RNG_NAME,
        seed: args.seed,
        seed_rule: "trial seed = seed * 0x9E3779B97F4A7C15 xor (scenario_index << 32 | trial)",
        trials: args.trials,
        n: args.n,
        group_size: args.group_size,
        ladder_length: args.ladder_length,
        ladder_rule: "lambda_max * 2^-i, i = 1..=ladder_length, warm-started",
        l2_ratio: args.l2_ratio,
        tol: args.tol,
        fista_tolerance: "certificate norm <= 1e-6 * (1 + ||X^T y||_inf)",
        jobs: args.jobs.max(1),
        algorithms: &args.algos,
        scenarios: parse_grid(args.grid.as_deref())?
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    io::emit(Some(&args.out_dir.join("meta.json")), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid(None).unwrap().len(), 36);
        let g = parse_grid(Some("a=0.5,b=0.5,K=10; a=0.8,b=0.2,K=20")).unwrap();
        assert_eq!(
            g[1],
            Scenario {
                a: 0.8,
                b: 0.2,
                k: 20
            }
        );
        assert!(parse_grid(Some("a=0.5")).is_err());
        assert!(parse_grid(Some(";")).is_err());
    }

    #[test]
    fn seeds_differ_across_trials_and_scenarios() {
        let s: std::collections::HashSet<u64> = (0..3)
            .flat_map(|i| (0..50).map(move |t| trial_seed(7, i, t)))
            .collect();
        assert_eq!(s.len(), 150);
    }

    #[test]
    fn summary_statistics() {
        let sc = Scenario {
            a: 0.5,
            b: 0.5,
            k: 10,
        };
        let t = [
            TrialTiming {
                seconds: 1.0,
                sweeps: 4,
                converged: true,
            },
            TrialTiming {
                seconds: 3.0,
                sweeps: 6,
                converged: false,
            },
        ];
        let r = summarize(&sc, Algo::Sls, &t);
        assert_eq!(r.mean_seconds, 2.0);
        assert!((r.std_seconds - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.mean_sweeps, 5.0);
        assert_eq!(r.converged_fraction, 0.5);
        assert_eq!(summarize(&sc, Algo::Sls, &t[..1]).std_seconds, 0.0);
    }
}

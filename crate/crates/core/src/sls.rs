//! Block coordinate descent for the group lasso with exact per-group updates,
//! plus penalty paths and the penalty/bound utilities used to set them up.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linesearch::{solve_secular, LineSearchProblem};
use crate::model::{Coefficients, GroupedProblem, PartialResidual, Penalty, ResidualTracker};
use crate::spectral::SpectralCache;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once `max_j |beta_j^(t) - beta_j^(t-1)|` over a full sweep is at most this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Starting point; zero when absent.
    pub initial: Option<Coefficients>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 100_000,
            initial: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_initial(mut self, initial: Coefficients) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    /// Objective at the starting point followed by one value per sweep.
    pub objective_per_sweep: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub wall_time: Duration,
    /// Sign vectors handed to the signed subproblem (sparse solver only).
    pub sign_candidates: usize,
    /// Off-support checks accepted only thanks to the round-off slack.
    pub boundary_slack_hits: usize,
}

impl SolveTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objective_per_sweep.last().unwrap_or(&f64::NAN)
    }

    /// Largest increase between consecutive recorded objectives (0 if none).
    pub fn max_increase(&self) -> f64 {
        self.objective_per_sweep
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub beta: Coefficients,
    pub trace: SolveTrace,
}

/// Exact minimizer over `beta_k` of `1/2 ||R_k - X_k beta_k||^2 + lambda ||beta_k||_2`.
pub fn group_update(
    problem: &GroupedProblem,
    k: usize,
    residual: &PartialResidual,
    lambda: f64,
    spectra: &mut SpectralCache,
) -> Result<DVector<f64>> {
    problem.check_group(k)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let xk = problem.group_design(k);
    let g = xk.tr_mul(residual.as_vector());
    if g.norm() <= lambda {
        return Ok(DVector::zeros(xk.ncols()));
    }
    let spectrum = spectra.gram_spectrum(problem, k, None)?;
    let lsp = LineSearchProblem::from_spectrum(&spectrum, &g, lambda)?;
    if lsp.f_eval(0.0) <= 1.0 {
        // only reachable when the clamped null-space part of g carried the excess
        return Ok(DVector::zeros(xk.ncols()));
    }
    let root = solve_secular(&lsp)?;
    Ok(root.unrotate(&spectrum.u))
}

/// `max_k ||X_k^T y||_2`: the smallest penalty at which zero is optimal.
pub fn lambda_max(problem: &GroupedProblem) -> f64 {
    (0..problem.num_groups())
        .map(|k| problem.group_design(k).tr_mul(problem.y()).norm())
        .fold(0.0, f64::max)
}

/// `sum_k ||beta_k||_2`, the constraint bound equivalent to a penalized solution.
pub fn bound_from_solution(beta: &Coefficients) -> f64 {
    beta.sum_group_norms()
}

pub fn solve(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &SolveOptions,
) -> Result<Solution> {
    let mut cache = SpectralCache::new();
    solve_with_cache(problem, penalty, options, &mut cache, &mut |_, _| {})
}

/// Group lasso solve with a caller-owned spectral cache and a per-sweep
/// observer called with `(sweep, beta)`; sweep 0 is the starting point.
pub fn solve_with_cache(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &SolveOptions,
    cache: &mut SpectralCache,
    observer: &mut dyn FnMut(usize, &Coefficients),
) -> Result<Solution> {
    let Penalty::GroupLasso { lambda } = *penalty else {
        return Err(Error::InvalidInput(
            "the SLS solver handles the group lasso penalty only".into(),
        ));
    };
    penalty.validate()?;
    block_descent(
        problem,
        penalty,
        options,
        observer,
        |k, partial, _beta, _trace| group_update(problem, k, partial, lambda, cache),
    )
}

/// Cyclic block coordinate descent over groups `0..K` with a maintained
/// residual; `update` returns the new value of group k.
pub(crate) fn block_descent<F>(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &SolveOptions,
    observer: &mut dyn FnMut(usize, &Coefficients),
    mut update: F,
) -> Result<Solution>
where
    F: FnMut(usize, &PartialResidual, &Coefficients, &mut SolveTrace) -> Result<DVector<f64>>,
{
    options.validate()?;
    let start = Instant::now();
    let mut beta = match &options.initial {
        Some(b) => {
            problem.check_coefficients(b)?;
            b.clone()
        }
        None => Coefficients::zeros(problem),
    };
    let mut tracker = ResidualTracker::new(problem, &beta);
    let objective = |tracker: &ResidualTracker, beta: &Coefficients| {
        0.5 * tracker.full().norm_squared() + penalty.value(beta)
    };
    let mut trace = SolveTrace {
        objective_per_sweep: vec![objective(&tracker, &beta)],
        ..SolveTrace::default()
    };
    observer(0, &beta);

    for sweep in 1..=options.max_sweeps {
        let mut change = 0.0_f64;
        for k in 0..problem.num_groups() {
            let partial = tracker.take_partial(problem, &beta, k);
            let new = update(k, &partial, &beta, &mut trace)?;
            let old = beta.group_mut(k);
            for (o, n) in old.iter_mut().zip(new.iter()) {
                change = change.max((*o - n).abs());
                *o = *n;
            }
            tracker.commit(problem, k, partial, &new);
        }
        tracker.refresh(problem, &beta);
        trace.objective_per_sweep.push(objective(&tracker, &beta));
        trace.sweeps = sweep;
        observer(sweep, &beta);
        if change <= options.tol {
            trace.converged = true;
            break;
        }
    }
    trace.wall_time = start.elapsed();
    Ok(Solution { beta, trace })
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub solution: Solution,
}

fn check_ladder(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("penalty sequence is empty".into()));
    }
    if lambdas.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::InvalidInput(
            "penalties must be finite and positive".into(),
        ));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "penalties must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Warm-started group lasso path over a strictly decreasing penalty sequence.
/// The first point starts from `options.initial` (zero by default); the spectral
/// cache is shared along the path.
pub fn solve_path(
    problem: &GroupedProblem,
    lambdas: &[f64],
    options: &SolveOptions,
) -> Result<Vec<PathPoint>> {
    check_ladder(lambdas)?;
    let mut cache = SpectralCache::new();
    let mut opts = options.clone();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let solution = solve_with_cache(
            problem,
            &Penalty::GroupLasso { lambda },
            &opts,
            &mut cache,
            &mut |_, _| {},
        )?;
        opts.initial = Some(solution.beta.clone());
        out.push(PathPoint { lambda, solution });
    }
    Ok(out)
}

/// Path for the sparse group lasso: `lambda1` follows the sequence, `lambda2`
/// is held fixed.
pub fn solve_sparse_path(
    problem: &GroupedProblem,
    lambda1s: &[f64],
    lambda2: f64,
    options: &SolveOptions,
) -> Result<Vec<PathPoint>> {
    check_ladder(lambda1s)?;
    let mut cache = SpectralCache::new();
    let mut opts = options.clone();
    let mut out = Vec::with_capacity(lambda1s.len());
    for &lambda1 in lambda1s {
        let penalty = Penalty::sparse_group(lambda1, lambda2)?;
        let solution = crate::ssls::solve_sgl_with_cache(
            problem,
            &penalty,
            &opts,
            &mut cache,
            &mut |_, _| {},
        )?;
        opts.initial = Some(solution.beta.clone());
        out.push(PathPoint {
            lambda: lambda1,
            solution,
        });
    }
    Ok(out)
}

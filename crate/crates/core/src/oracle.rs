//! Reference solvers used to check the block coordinate descent solvers:
//! accelerated proximal gradient (FISTA with function restart) for both
//! penalties, and a dense grid search for problems with at most three
//! coefficients. Nothing here depends on the secular-equation machinery.

use nalgebra::DVector;

use crate::diagnostics::certificate;
use crate::error::{Error, Result};
use crate::model::{norm2, objective, soft_threshold, Coefficients, GroupedProblem, Penalty};

#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Stop when the certificate norm drops to this level.
    pub tol: f64,
    pub max_iters: usize,
    /// Fixed step; `1 / Lipschitz` estimated by power iteration when absent.
    pub step: Option<f64>,
    /// Starting point; zero when absent.
    pub initial: Option<Coefficients>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 1_000_000,
            step: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub iterations: usize,
    pub converged: bool,
    pub certificate_norm: f64,
}

/// Block soft-threshold: `z * max(0, 1 - t lambda / ||z||)`.
pub fn prox_group(z: &[f64], t: f64, lambda: f64) -> Vec<f64> {
    let nz = norm2(z);
    if nz == 0.0 {
        return vec![0.0; z.len()];
    }
    let scale = (1.0 - t * lambda / nz).max(0.0);
    z.iter().map(|v| v * scale).collect()
}

/// Elementwise soft-threshold by `t lambda2`, then block shrink by `t lambda1`.
pub fn prox_sparse_group(z: &[f64], t: f64, lambda1: f64, lambda2: f64) -> Vec<f64> {
    let shrunk: Vec<f64> = z.iter().map(|&v| soft_threshold(v, t * lambda2)).collect();
    prox_group(&shrunk, t, lambda1)
}

/// Largest eigenvalue of `X^T X` by power iteration (relative change 1e-6).
pub fn lipschitz_constant(problem: &GroupedProblem) -> f64 {
    let x = problem.design();
    let p = x.ncols();
    let mut v = DVector::from_fn(p, |j, _| 1.0 + 0.01 * (j as f64 * 0.37).sin());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..10_000 {
        let w = x.tr_mul(&(x * &v));
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - est).abs() <= 1e-6 * next {
            return next;
        }
        est = next;
    }
    est
}

fn prox_all(problem: &GroupedProblem, penalty: &Penalty, z: &DVector<f64>, t: f64) -> DVector<f64> {
    let mut out = DVector::zeros(z.len());
    for k in 0..problem.num_groups() {
        let r = problem.group_range(k);
        let zk = &z.as_slice()[r.clone()];
        let pk = match *penalty {
            Penalty::GroupLasso { lambda } => prox_group(zk, t, lambda),
            Penalty::SparseGroupLasso { lambda1, lambda2 } => {
                prox_sparse_group(zk, t, lambda1, lambda2)
            }
        };
        out.as_mut_slice()[r].copy_from_slice(&pk);
    }
    out
}

/// FISTA with restart whenever a momentum step would increase the objective
/// (the step is discarded and momentum reset).
pub fn fista_solve(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &OracleOptions,
) -> Result<(Coefficients, OracleReport)> {
    penalty.validate()?;
    if !(options.tol > 0.0) {
        return Err(Error::InvalidInput("oracle tol must be positive".into()));
    }
    let step = match options.step {
        Some(s) if s > 0.0 => s,
        Some(s) => {
            return Err(Error::InvalidInput(format!(
                "step must be positive, got {s}"
            )))
        }
        None => {
            let lip = lipschitz_constant(problem);
            if lip == 0.0 {
                1.0
            } else {
                1.0 / (1.01 * lip)
            }
        }
    };
    let x = problem.design();
    let y = problem.y();
    let obj = |b: &DVector<f64>| {
        let r = y - x * b;
        0.5 * r.norm_squared() + penalty_value(problem, penalty, b)
    };

    let mut cur = match &options.initial {
        Some(b) => {
            problem.check_coefficients(b)?;
            b.values().clone()
        }
        None => DVector::zeros(problem.p()),
    };
    let mut cur_obj = obj(&cur);
    let mut z = cur.clone();
    let mut t = 1.0_f64;
    let mut cert_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iters {
        if iterations % 10 == 0 {
            let b = Coefficients::from_vec(problem, cur.iter().cloned().collect())?;
            cert_norm = certificate(problem, penalty, &b)?.w_norm;
            if cert_norm <= options.tol {
                return Ok((
                    b,
                    OracleReport {
                        iterations,
                        converged: true,
                        certificate_norm: cert_norm,
                    },
                ));
            }
        }
        iterations += 1;
        let grad = x.tr_mul(&(x * &z - y));
        let next = prox_all(problem, penalty, &(&z - grad * step), step);
        let next_obj = obj(&next);
        // A plain proximal step (z == cur) cannot increase the objective in
        // exact arithmetic, so only momentum steps are rejected.
        if next_obj > cur_obj && z != cur {
            z = cur.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &cur) * ((t - 1.0) / t_next);
        t = t_next;
        cur = next;
        cur_obj = next_obj;
    }
    let b = Coefficients::from_vec(problem, cur.iter().cloned().collect())?;
    let cert = certificate(problem, penalty, &b)?.w_norm;
    Ok((
        b,
        OracleReport {
            iterations,
            converged: cert <= options.tol,
            certificate_norm: cert.min(cert_norm),
        },
    ))
}

/// Warm-started group lasso path with FISTA at each penalty of a strictly
/// decreasing sequence. Returns `(lambda, beta, report)` per point.
pub fn fista_path(
    problem: &GroupedProblem,
    lambdas: &[f64],
    options: &OracleOptions,
) -> Result<Vec<(f64, Coefficients, OracleReport)>> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "penalties must be non-empty and strictly decreasing".into(),
        ));
    }
    let mut opts = options.clone();
    if opts.step.is_none() {
        let lip = lipschitz_constant(problem);
        opts.step = Some(if lip == 0.0 { 1.0 } else { 1.0 / (1.01 * lip) });
    }
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (beta, report) = fista_solve(problem, &Penalty::GroupLasso { lambda }, &opts)?;
        opts.initial = Some(beta.clone());
        out.push((lambda, beta, report));
    }
    Ok(out)
}

fn penalty_value(problem: &GroupedProblem, penalty: &Penalty, b: &DVector<f64>) -> f64 {
    let mut v = 0.0;
    for k in 0..problem.num_groups() {
        v += norm2(&b.as_slice()[problem.group_range(k)]);
    }
    v *= penalty.group_weight();
    let l1 = penalty.l1_weight();
    if l1 > 0.0 {
        v += l1 * b.iter().map(|x| x.abs()).sum::<f64>();
    }
    v
}

/// Largest total coefficient count `grid_refine` accepts.
pub const MAX_GRID_DIM: usize = 3;

/// Brute-force minimizer for tiny problems: full grid over `bounds` at the
/// given resolution, then zoomed grids around the incumbent, then cyclic
/// golden-section polishing along each coordinate.
pub fn grid_refine(
    problem: &GroupedProblem,
    penalty: &Penalty,
    bounds: &[(f64, f64)],
    resolution: f64,
) -> Result<Coefficients> {
    let p = problem.p();
    if p > MAX_GRID_DIM {
        return Err(Error::InvalidInput(format!(
            "grid search supports at most {MAX_GRID_DIM} coefficients, got {p}"
        )));
    }
    if bounds.len() != p {
        return Err(Error::DimensionMismatch {
            what: "grid box dimensions",
            expected: p,
            got: bounds.len(),
        });
    }
    if !(resolution > 0.0) || bounds.iter().any(|(lo, hi)| !(hi >= lo)) {
        return Err(Error::InvalidInput("grid box or resolution invalid".into()));
    }
    let zero = Coefficients::zeros(problem);
    let eval = |v: &[f64]| -> f64 {
        let b = Coefficients::from_vec(problem, v.to_vec()).unwrap_or_else(|_| zero.clone());
        objective(problem, penalty, &b).unwrap_or(f64::INFINITY)
    };

    let counts: Vec<usize> = bounds
        .iter()
        .map(|(lo, hi)| ((hi - lo) / resolution).floor() as usize + 1)
        .collect();
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .zip(&counts)
        .map(|(&(lo, _), &c)| (0..c).map(|i| lo + i as f64 * resolution).collect())
        .collect();
    let (mut best, mut best_val) = scan(&axes, &eval);

    // zoom: re-center on the incumbent; shrink only once it is interior
    let mut h = resolution;
    let half = 8usize;
    for _ in 0..400 {
        if h < 1e-10 {
            break;
        }
        let axes: Vec<Vec<f64>> = best
            .iter()
            .map(|&c| {
                (0..=2 * half)
                    .map(|i| c + (i as f64 - half as f64) * h / 4.0)
                    .collect()
            })
            .collect();
        let (cand, val) = scan(&axes, &eval);
        let on_edge = cand
            .iter()
            .zip(&best)
            .any(|(c, b)| ((c - b).abs() - half as f64 * h / 4.0).abs() < 1e-15 * (1.0 + b.abs()));
        if val < best_val {
            best = cand;
            best_val = val;
        }
        if !on_edge {
            h /= 4.0;
        }
    }

    // golden-section polish along each coordinate
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut width = resolution;
    for _ in 0..20 {
        for j in 0..p {
            let (mut a, mut b) = (best[j] - width, best[j] + width);
            let at = |s: f64, base: &[f64]| {
                let mut v = base.to_vec();
                v[j] = s;
                eval(&v)
            };
            let mut c = b - gr * (b - a);
            let mut d = a + gr * (b - a);
            let (mut fc, mut fd) = (at(c, &best), at(d, &best));
            for _ in 0..80 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = at(c, &best);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = at(d, &best);
                }
            }
            let s = 0.5 * (a + b);
            let v = at(s, &best);
            if v < best_val {
                best[j] = s;
                best_val = v;
            }
        }
        width *= 0.5;
    }
    Coefficients::from_vec(problem, best)
}

fn scan(axes: &[Vec<f64>], eval: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let dims = axes.len();
    let mut idx = vec![0usize; dims];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best = point.clone();
    let mut best_val = f64::INFINITY;
    loop {
        for (d, &i) in idx.iter().enumerate() {
            point[d] = axes[d][i];
        }
        let v = eval(&point);
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&point);
        }
        let mut d = 0;
        loop {
            if d == dims {
                return (best, best_val);
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

//! Optimality certificates and finite-time accuracy bounds.
//!
//! For any `beta*` and any subgradient `w* in dL(beta*)`, the distance of the
//! fitted values to the (unique) optimal fit `y_hat` satisfies
//!
//! ```text
//! ||X beta* - y_hat||^2 <= 2 w*^T beta* + 2 ||w*|| ||beta_hat||
//! ```
//!
//! and `||beta_hat||` can be bounded without knowing `beta_hat`, either through
//! the current objective value or through a least-squares fit.

use nalgebra::{DVector, SVD};

use crate::error::Result;
use crate::model::{norm2, objective, soft_threshold, Coefficients, GroupedProblem, Penalty};

/// A subgradient of the objective at some `beta`, chosen with minimal norm.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCertificate {
    pub w: DVector<f64>,
    pub w_norm: f64,
    pub per_group_norms: Vec<f64>,
    /// Largest `||s_k||_2` used for the group-norm part (must be <= 1).
    pub max_group_multiplier: f64,
    /// Largest `|t_j|` used for the 1-norm part (must be <= 1; 0 for the group lasso).
    pub max_sign_multiplier: f64,
}

const MEMBERSHIP_TOL: f64 = 1e-12;

pub fn certificate(
    problem: &GroupedProblem,
    penalty: &Penalty,
    beta: &Coefficients,
) -> Result<OptimalityCertificate> {
    problem.check_coefficients(beta)?;
    penalty.validate()?;
    let lambda1 = penalty.group_weight();
    let lambda2 = penalty.l1_weight();
    // gradient of the loss: -X^T (y - X beta)
    let grad = -problem.design().tr_mul(&problem.residual(beta));
    let mut w = DVector::zeros(problem.p());
    let mut per_group_norms = Vec::with_capacity(problem.num_groups());
    let mut max_s = 0.0_f64;
    let mut max_t = 0.0_f64;

    for k in 0..problem.num_groups() {
        let range = problem.group_range(k);
        let g = &grad.as_slice()[range.clone()];
        let bk = beta.group(k);
        let wk = &mut w.as_mut_slice()[range];
        let norm_b = norm2(bk);
        if norm_b > 0.0 {
            max_s = max_s.max(1.0);
            for j in 0..bk.len() {
                let mut v = g[j] + lambda1 * bk[j] / norm_b;
                if lambda2 > 0.0 {
                    let t = if bk[j] != 0.0 {
                        bk[j].signum()
                    } else {
                        (-v / lambda2).clamp(-1.0, 1.0)
                    };
                    max_t = max_t.max(t.abs());
                    v += lambda2 * t;
                }
                wk[j] = v;
            }
        } else {
            // minimum-norm element of g + lambda2 [-1,1]^q + lambda1 B(0,1):
            // soft-threshold by lambda2, then shrink the group by lambda1
            let u: Vec<f64> = if lambda2 > 0.0 {
                for &gj in g {
                    max_t = max_t.max((gj.abs() / lambda2).min(1.0));
                }
                g.iter().map(|&gj| soft_threshold(gj, lambda2)).collect()
            } else {
                g.to_vec()
            };
            let nu = norm2(&u);
            max_s = max_s.max((nu / lambda1).min(1.0));
            let scale = if nu > 0.0 {
                (1.0 - lambda1 / nu).max(0.0)
            } else {
                0.0
            };
            for (o, ui) in wk.iter_mut().zip(&u) {
                *o = ui * scale;
            }
        }
        per_group_norms.push(norm2(wk));
    }
    assert!(
        max_s <= 1.0 + MEMBERSHIP_TOL && max_t <= 1.0 + MEMBERSHIP_TOL,
        "subgradient multipliers outside their unit balls: s {max_s}, t {max_t}"
    );
    Ok(OptimalityCertificate {
        w_norm: w.norm(),
        w,
        per_group_norms,
        max_group_multiplier: max_s,
        max_sign_multiplier: max_t,
    })
}

/// Upper bounds on `||X beta* - y_hat||^2`, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBounds {
    /// Uses the norm of a supplied reference minimizer.
    pub bound_basic: Option<f64>,
    /// Uses the objective gap above `1/2 ||P_X^perp y||^2`.
    pub bound_objective: f64,
    /// Uses a minimum-norm least-squares estimate.
    pub bound_lse: f64,
}

impl AccuracyBounds {
    pub fn min(&self) -> f64 {
        let m = self.bound_objective.min(self.bound_lse);
        self.bound_basic.map_or(m, |b| b.min(m))
    }
}

/// Bounds for `beta` given its certificate. For the sparse penalty the
/// `||beta_hat||` estimates divide by `lambda1 + lambda2`, which is valid since
/// `||x||_2` is below both the sum of group norms and the 1-norm.
pub fn accuracy_bounds(
    problem: &GroupedProblem,
    penalty: &Penalty,
    beta: &Coefficients,
    cert: &OptimalityCertificate,
    reference: Option<&Coefficients>,
) -> Result<AccuracyBounds> {
    let lambda1 = penalty.group_weight();
    let lambda2 = penalty.l1_weight();
    let denom = lambda1 + lambda2;
    let wtb = cert.w.dot(beta.values());
    let bound = |norm_est: f64| (2.0 * wtb + 2.0 * cert.w_norm * norm_est).max(0.0);

    let ls = problem.ls_quantities();
    let obj = objective(problem, penalty, beta)?;
    let gap = (obj - 0.5 * ls.residual_norm_sq).max(0.0);
    let lse_penalty = lambda1 * ls.beta_lse.sum_group_norms()
        + lambda2 * ls.beta_lse.values().iter().map(|v| v.abs()).sum::<f64>();

    let bound_basic = match reference {
        Some(b) => {
            problem.check_coefficients(b)?;
            Some(bound(b.values().norm()))
        }
        None => None,
    };
    Ok(AccuracyBounds {
        bound_basic,
        bound_objective: bound(gap / denom),
        bound_lse: bound(lse_penalty / denom),
    })
}

/// Certificate norm regarded as converged: `1e-6 (1 + ||X^T y||_inf)`.
pub fn certificate_tolerance(problem: &GroupedProblem) -> f64 {
    1e-6 * (1.0 + problem.design().tr_mul(problem.y()).amax())
}

/// Unpenalized least-squares quantities of a problem.
#[derive(Debug, Clone)]
pub struct LsQuantities {
    /// `P_X^perp y = y - X beta_lse`.
    pub residual: DVector<f64>,
    pub residual_norm_sq: f64,
    /// Minimum-norm least-squares coefficients.
    pub beta_lse: Coefficients,
}

impl LsQuantities {
    pub fn compute(problem: &GroupedProblem) -> Self {
        let x = problem.design();
        let (n, p) = x.shape();
        let svd = SVD::new(x.clone(), true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let eps = n.max(p) as f64 * f64::EPSILON * smax;
        let beta = if smax > 0.0 {
            svd.solve(problem.y(), eps)
                .expect("SVD computed with both factors")
        } else {
            DVector::zeros(p)
        };
        let beta_lse = Coefficients::from_vec(problem, beta.iter().cloned().collect())
            .expect("length matches design");
        let residual = problem.residual(&beta_lse);
        Self {
            residual_norm_sq: residual.norm_squared(),
            residual,
            beta_lse,
        }
    }
}

/// `ls_quantities(problem)`: `(P_X^perp y, beta_lse)`.
pub fn ls_quantities(problem: &GroupedProblem) -> (DVector<f64>, Coefficients) {
    let q = problem.ls_quantities();
    (q.residual.clone(), q.beta_lse.clone())
}

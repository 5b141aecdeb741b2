//! Exact solution of the single-group subproblem
//!
//! ```text
//! minimize  1/2 ||b - A a||^2 + lambda ||a||_2
//! ```
//!
//! through the secular equation `f(r) = sum_j v_j^2 / (d_j r + lambda)^2 = 1`,
//! where `A^T A = U^T diag(d) U` and `v = U A^T b`. The root `r` equals the norm
//! of the minimizer, which is `U^T (D + lambda/r I)^{-1} v`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::GroupSpectrum;

/// Convergence threshold on `|f(r) - 1|`.
pub const SECULAR_TOL: f64 = 1e-12;
/// Total Newton plus bisection iterations allowed.
pub const MAX_SECULAR_ITERS: usize = 10_000;
/// `v_j` is zeroed whenever `d_j <= RANK_CLAMP * max_j d_j`.
pub const RANK_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchProblem {
    d: Vec<f64>,
    v: Vec<f64>,
    lambda: f64,
}

impl LineSearchProblem {
    /// Validates the inputs and applies the rank-deficiency clamp to `v`.
    pub fn new(d: Vec<f64>, mut v: Vec<f64>, lambda: f64) -> Result<Self> {
        if d.is_empty() || d.len() != v.len() {
            return Err(Error::DimensionMismatch {
                what: "eigenvalue vs target length",
                expected: d.len(),
                got: v.len(),
            });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if d.iter().chain(v.iter()).any(|x| !x.is_finite()) || d.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        let dmax = d.iter().cloned().fold(0.0, f64::max);
        for (vj, &dj) in v.iter_mut().zip(&d) {
            if dj <= RANK_CLAMP * dmax {
                *vj = 0.0;
            }
        }
        Ok(Self { d, v, lambda })
    }

    /// Rotates `target = A^T b` into the eigenbasis of `spectrum`.
    pub fn from_spectrum(
        spectrum: &GroupSpectrum,
        target: &DVector<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let v = &spectrum.u * target;
        Self::new(
            spectrum.d.iter().cloned().collect(),
            v.iter().cloned().collect(),
            lambda,
        )
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Target vector after the rank clamp.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `f(r) = sum_j v_j^2 / (d_j r + lambda)^2`.
    pub fn f_eval(&self, r: f64) -> f64 {
        self.d
            .iter()
            .zip(&self.v)
            .map(|(&d, &v)| {
                let den = d * r + self.lambda;
                v * v / (den * den)
            })
            .sum()
    }

    /// `f'(r) = -2 sum_j d_j v_j^2 / (d_j r + lambda)^3`.
    pub fn f_derivative(&self, r: f64) -> f64 {
        -2.0 * self
            .d
            .iter()
            .zip(&self.v)
            .map(|(&d, &v)| {
                let den = d * r + self.lambda;
                d * v * v / (den * den * den)
            })
            .sum::<f64>()
    }

    /// `r v_j / (d_j r + lambda)`, i.e. `(D + lambda/r I)^{-1} v`.
    pub fn alpha_rotated(&self, r: f64) -> Vec<f64> {
        self.d
            .iter()
            .zip(&self.v)
            .map(|(&d, &v)| r * v / (d * r + self.lambda))
            .collect()
    }

    // f(r) <= ||v||^2 / (d_min r + lambda)^2 over the terms with v_j != 0.
    fn upper_bracket(&self) -> f64 {
        let vnorm = self.v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dmin = self
            .d
            .iter()
            .zip(&self.v)
            .filter(|(_, &v)| v != 0.0)
            .map(|(&d, _)| d)
            .fold(f64::INFINITY, f64::min);
        ((vnorm - self.lambda) / dmin).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub r: f64,
    pub alpha_rotated: Vec<f64>,
    pub newton_iters: usize,
    /// `|f(r) - 1|` at the returned root.
    pub residual: f64,
}

impl LineSearchResult {
    /// Maps the rotated solution back: `U^T alpha_rotated`.
    pub fn unrotate(&self, u: &DMatrix<f64>) -> DVector<f64> {
        u.tr_mul(&DVector::from_column_slice(&self.alpha_rotated))
    }
}

/// Root of `f(r) = 1`; requires `f(0) > 1`.
pub fn solve_secular(lsp: &LineSearchProblem) -> Result<LineSearchResult> {
    solve_inner(lsp, None)
}

/// Like [`solve_secular`], also returning every iterate starting at `r = 0`.
pub fn solve_secular_traced(lsp: &LineSearchProblem) -> Result<(LineSearchResult, Vec<f64>)> {
    let mut iterates = Vec::new();
    let res = solve_inner(lsp, Some(&mut iterates))?;
    Ok((res, iterates))
}

fn solve_inner(
    lsp: &LineSearchProblem,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LineSearchResult> {
    let f0 = lsp.f_eval(0.0);
    if f0 <= 1.0 {
        return Err(Error::Contract(format!(
            "secular equation requires f(0) > 1, got {f0}"
        )));
    }
    let done = |r: f64, fr: f64, iters: usize| LineSearchResult {
        r,
        alpha_rotated: lsp.alpha_rotated(r),
        newton_iters: iters,
        residual: (fr - 1.0).abs(),
    };

    // Newton from the left of the root: f is convex and decreasing, so the
    // iterates increase monotonically towards the root.
    let mut r = 0.0;
    let mut fr = f0;
    let mut iters = 0;
    while iters < MAX_SECULAR_ITERS {
        if let Some(t) = trace.as_deref_mut() {
            t.push(r);
        }
        if (fr - 1.0).abs() <= SECULAR_TOL {
            // one more Newton step from the left is nearly free and, by
            // quadratic convergence, lands at round-off level
            if fr > 1.0 && iters < MAX_SECULAR_ITERS {
                let next = r + (fr - 1.0) / -lsp.f_derivative(r);
                let fnext = lsp.f_eval(next);
                if next.is_finite() && next > r && (fnext - 1.0).abs() < (fr - 1.0).abs() {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(next);
                    }
                    return Ok(done(next, fnext, iters + 1));
                }
            }
            return Ok(done(r, fr, iters));
        }
        if fr < 1.0 {
            // overshoot from round-off; bracket is [previous, r]
            break;
        }
        let step = (fr - 1.0) / -lsp.f_derivative(r);
        let next = r + step;
        if !(step.is_finite() && step > 0.0) || next <= r {
            break;
        }
        iters += 1;
        let fnext = lsp.f_eval(next);
        if fnext < 1.0 - SECULAR_TOL {
            return bisect(lsp, r, next, iters, done);
        }
        r = next;
        fr = fnext;
    }
    if iters >= MAX_SECULAR_ITERS {
        return Err(Error::NumericalFailure {
            iterations: iters,
            best_r: r,
            residual: (fr - 1.0).abs(),
        });
    }
    let hi = lsp.upper_bracket().max(r);
    bisect(lsp, r, hi, iters, done)
}

fn bisect(
    lsp: &LineSearchProblem,
    mut lo: f64,
    mut hi: f64,
    mut iters: usize,
    done: impl Fn(f64, f64, usize) -> LineSearchResult,
) -> Result<LineSearchResult> {
    let mut best = (lo, lsp.f_eval(lo));
    while iters < MAX_SECULAR_ITERS {
        iters += 1;
        let mid = 0.5 * (lo + hi);
        let fm = lsp.f_eval(mid);
        if (fm - 1.0).abs() < (best.1 - 1.0).abs() {
            best = (mid, fm);
        }
        if (fm - 1.0).abs() <= SECULAR_TOL {
            return Ok(done(mid, fm, iters));
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if fm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericalFailure {
        iterations: iters,
        best_r: best.0,
        residual: (best.1 - 1.0).abs(),
    })
}

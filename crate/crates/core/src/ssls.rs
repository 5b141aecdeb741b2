//! Sparse group lasso solver: block coordinate descent where each group update
//! searches over sign vectors, solving the secular equation restricted to the
//! support of each candidate and keeping the first one that is feasible.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linesearch::{solve_secular, LineSearchProblem};
pub use crate::model::soft_threshold;
use crate::model::{Coefficients, GroupedProblem, PartialResidual, Penalty};
use crate::sls::{block_descent, Solution, SolveOptions};
use crate::spectral::SpectralCache;

/// Largest group the signed solver accepts (up to 3^12 sign vectors per update).
pub const MAX_SIGNED_GROUP: usize = 12;
/// A coordinate with `|alpha_j| <= ZERO_TOL * ||alpha||` has no sign.
pub const ZERO_TOL: f64 = 1e-12;
/// Absolute slack on the off-support optimality check.
pub const BOUNDARY_SLACK: f64 = 1e-10;

/// Vector over {-1, 0, +1}; its support is the set of nonzero entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|s| !matches!(s, -1..=1)) {
            return Err(Error::InvalidInput(
                "sign entries must be -1, 0 or 1".into(),
            ));
        }
        Ok(Self(signs))
    }

    /// Signs of `values` with exact zeros mapped to 0.
    pub fn of(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| sign(v)).collect())
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j] != 0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&s| s == 0)
    }

    pub fn hamming(&self, other: &[i8]) -> usize {
        self.0.iter().zip(other).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                1 => "+",
                -1 => "-",
                _ => "0",
            })?;
        }
        Ok(())
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

pub fn soft_threshold_vec(x: &[f64], t: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold(v, t)).collect()
}

/// True when zero is the group optimum: `||{g}_{lambda2}||_2 <= lambda1`.
pub fn zero_check_sgl(g: &[f64], lambda1: f64, lambda2: f64) -> bool {
    let s: f64 = g
        .iter()
        .map(|&v| {
            let t = soft_threshold(v, lambda2);
            t * t
        })
        .sum();
    s.sqrt() <= lambda1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignedStatus {
    Feasible,
    /// `f_sigma(0) <= 1`, so the secular equation has no positive root.
    NoRoot,
    /// The root exists but the solution's signs differ from sigma.
    InfeasibleSign,
    /// Signs match but an off-support coordinate violates optimality.
    InfeasibleBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedSubproblemResult {
    pub status: SignedStatus,
    pub r: Option<f64>,
    /// Candidate group coefficients (zeros off the support), when a root exists.
    pub alpha: Option<DVector<f64>>,
    /// Set when an off-support check passed only within [`BOUNDARY_SLACK`].
    pub used_slack: bool,
}

impl SignedSubproblemResult {
    fn rejected(status: SignedStatus, r: Option<f64>, alpha: Option<DVector<f64>>) -> Self {
        Self {
            status,
            r,
            alpha,
            used_slack: false,
        }
    }
}

/// Group-k subproblem for a fixed sign vector.
pub fn signed_subproblem(
    problem: &GroupedProblem,
    k: usize,
    residual: &PartialResidual,
    sigma: &SignVector,
    lambda1: f64,
    lambda2: f64,
    spectra: &mut SpectralCache,
) -> Result<SignedSubproblemResult> {
    problem.check_group(k)?;
    if sigma.len() != problem.group_size(k) {
        return Err(Error::DimensionMismatch {
            what: "sign vector length",
            expected: problem.group_size(k),
            got: sigma.len(),
        });
    }
    let g = problem.group_design(k).tr_mul(residual.as_vector());
    signed_with_gradient(problem, k, residual, &g, sigma, lambda1, lambda2, spectra)
}

#[allow(clippy::too_many_arguments)]
fn signed_with_gradient(
    problem: &GroupedProblem,
    k: usize,
    residual: &PartialResidual,
    g: &DVector<f64>,
    sigma: &SignVector,
    lambda1: f64,
    lambda2: f64,
    spectra: &mut SpectralCache,
) -> Result<SignedSubproblemResult> {
    let support = sigma.support();
    if support.is_empty() {
        return Err(Error::Contract("sign vector has empty support".into()));
    }
    let signs = sigma.as_slice();
    let target = DVector::from_iterator(
        support.len(),
        support
            .iter()
            .map(|&j| g[j] - lambda2 * f64::from(signs[j])),
    );
    let spectrum = spectra.gram_spectrum(problem, k, Some(&support))?;
    let lsp = LineSearchProblem::from_spectrum(&spectrum, &target, lambda1)?;
    if lsp.f_eval(0.0) <= 1.0 {
        return Ok(SignedSubproblemResult::rejected(
            SignedStatus::NoRoot,
            None,
            None,
        ));
    }
    let root = solve_secular(&lsp)?;
    let alpha_j = root.unrotate(&spectrum.u);
    let mut alpha = DVector::zeros(sigma.len());
    for (i, &j) in support.iter().enumerate() {
        alpha[j] = alpha_j[i];
    }

    let norm = alpha_j.norm();
    let signs_ok = support
        .iter()
        .zip(alpha_j.iter())
        .all(|(&j, &a)| a.abs() > ZERO_TOL * norm && sign(a) == signs[j]);
    if !signs_ok {
        return Ok(SignedSubproblemResult::rejected(
            SignedStatus::InfeasibleSign,
            Some(root.r),
            Some(alpha),
        ));
    }

    // Off the support the gradient must lie within the l1 subdifferential:
    // |x_j^T (R_k - X_J alpha_J)| <= lambda2.
    let xk = problem.group_design(k);
    let fit = xk.select_columns(support.iter()) * &alpha_j;
    let rem = residual.as_vector() - fit;
    let mut used_slack = false;
    for j in (0..sigma.len()).filter(|&j| signs[j] == 0) {
        let c = xk.column(j).dot(&rem).abs();
        if c > lambda2 + BOUNDARY_SLACK {
            return Ok(SignedSubproblemResult::rejected(
                SignedStatus::InfeasibleBoundary,
                Some(root.r),
                Some(alpha),
            ));
        }
        used_slack |= c > lambda2;
    }
    Ok(SignedSubproblemResult {
        status: SignedStatus::Feasible,
        r: Some(root.r),
        alpha: Some(alpha),
        used_slack,
    })
}

/// Candidate sign vectors for one group update, without repetition:
/// `previous` (if given), then `sign({g}_{lambda2})`, then every remaining
/// vector in rings of increasing Hamming distance from the latter. Within a
/// ring the order is lexicographic with `+1 < 0 < -1` per coordinate.
pub fn sign_order(g: &[f64], lambda2: f64, previous: Option<&SignVector>) -> SignOrder {
    let center: Vec<i8> = g
        .iter()
        .map(|&v| sign(soft_threshold(v, lambda2)))
        .collect();
    let mut head = Vec::with_capacity(2);
    if let Some(prev) = previous.filter(|p| p.len() == center.len()) {
        head.push(prev.clone());
    }
    if head
        .first()
        .is_none_or(|p| p.as_slice() != center.as_slice())
    {
        head.push(SignVector(center.clone()));
    }
    head.reverse();
    SignOrder {
        skip: previous.cloned(),
        center,
        head,
        ring: 0,
        buffer: Vec::new(),
        pos: 0,
    }
}

#[derive(Debug, Clone)]
pub struct SignOrder {
    skip: Option<SignVector>,
    center: Vec<i8>,
    /// Pending leading candidates, popped from the back.
    head: Vec<SignVector>,
    ring: usize,
    buffer: Vec<Vec<i8>>,
    pos: usize,
}

const VALUE_ORDER: [i8; 3] = [1, 0, -1];

fn fill_ring(center: &[i8], distance: usize, prefix: &mut Vec<i8>, out: &mut Vec<Vec<i8>>) {
    let i = prefix.len();
    if i == center.len() {
        if distance == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    let remaining = center.len() - i;
    for &v in &VALUE_ORDER {
        let cost = usize::from(v != center[i]);
        if cost > distance || distance - cost > remaining - 1 {
            continue;
        }
        prefix.push(v);
        fill_ring(center, distance - cost, prefix, out);
        prefix.pop();
    }
}

impl Iterator for SignOrder {
    type Item = SignVector;

    fn next(&mut self) -> Option<SignVector> {
        if let Some(s) = self.head.pop() {
            return Some(s);
        }
        loop {
            if self.pos < self.buffer.len() {
                let cand = std::mem::take(&mut self.buffer[self.pos]);
                self.pos += 1;
                if self
                    .skip
                    .as_ref()
                    .is_some_and(|s| s.as_slice() == cand.as_slice())
                {
                    continue;
                }
                return Some(SignVector(cand));
            }
            if self.ring >= self.center.len() {
                return None;
            }
            self.ring += 1;
            self.buffer.clear();
            self.pos = 0;
            fill_ring(
                &self.center,
                self.ring,
                &mut Vec::with_capacity(self.center.len()),
                &mut self.buffer,
            );
        }
    }
}

pub fn solve_sgl(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &SolveOptions,
) -> Result<Solution> {
    let mut cache = SpectralCache::new();
    solve_sgl_with_cache(problem, penalty, options, &mut cache, &mut |_, _| {})
}

/// Sparse group lasso solve with a caller-owned cache and per-sweep observer.
pub fn solve_sgl_with_cache(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &SolveOptions,
    cache: &mut SpectralCache,
    observer: &mut dyn FnMut(usize, &Coefficients),
) -> Result<Solution> {
    let Penalty::SparseGroupLasso { lambda1, lambda2 } = *penalty else {
        return Err(Error::InvalidInput(
            "the SSLS solver handles the sparse group lasso penalty only".into(),
        ));
    };
    penalty.validate()?;
    if let Some(k) = (0..problem.num_groups()).find(|&k| problem.group_size(k) > MAX_SIGNED_GROUP) {
        return Err(Error::GroupTooLarge {
            group: k + 1,
            size: problem.group_size(k),
            limit: MAX_SIGNED_GROUP,
        });
    }
    block_descent(
        problem,
        penalty,
        options,
        observer,
        |k, partial, beta, trace| {
            let g = problem.group_design(k).tr_mul(partial.as_vector());
            if zero_check_sgl(g.as_slice(), lambda1, lambda2) {
                return Ok(DVector::zeros(g.len()));
            }
            let previous = (!beta.is_group_zero(k)).then(|| SignVector::of(beta.group(k)));
            let mut tried = 0;
            for sigma in sign_order(g.as_slice(), lambda2, previous.as_ref()) {
                if sigma.is_zero() {
                    continue;
                }
                tried += 1;
                trace.sign_candidates += 1;
                let res =
                    signed_with_gradient(problem, k, partial, &g, &sigma, lambda1, lambda2, cache)?;
                if res.status == SignedStatus::Feasible {
                    if res.used_slack {
                        trace.boundary_slack_hits += 1;
                    }
                    return Ok(res.alpha.expect("feasible result carries alpha"));
                }
            }
            Err(Error::InfeasibleSigns {
                group: k + 1,
                tried,
            })
        },
    )
}

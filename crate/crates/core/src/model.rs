//! Problem representation, penalties, coefficient vectors and residual
//! bookkeeping shared by every solver in the crate.

use std::ops::Range;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};

use crate::diagnostics::LsQuantities;
use crate::error::{Error, Result};

/// Response `y` and a column-major design `X = (X_1 ... X_K)` split into
/// contiguous column groups.
#[derive(Debug)]
pub struct GroupedProblem {
    y: DVector<f64>,
    design: DMatrix<f64>,
    group_sizes: Vec<usize>,
    offsets: Vec<usize>,
    ls: OnceLock<LsQuantities>,
}

impl Clone for GroupedProblem {
    fn clone(&self) -> Self {
        Self {
            y: self.y.clone(),
            design: self.design.clone(),
            group_sizes: self.group_sizes.clone(),
            offsets: self.offsets.clone(),
            ls: OnceLock::new(),
        }
    }
}

impl GroupedProblem {
    pub fn new(design: DMatrix<f64>, y: DVector<f64>, group_sizes: Vec<usize>) -> Result<Self> {
        let (n, p) = design.shape();
        if n == 0 {
            return Err(Error::InvalidInput("design has no rows".into()));
        }
        if group_sizes.is_empty() {
            return Err(Error::InvalidInput("at least one group is required".into()));
        }
        if let Some(k) = group_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("group {} has size 0", k + 1)));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length vs design rows",
                expected: n,
                got: y.len(),
            });
        }
        let total: usize = group_sizes.iter().sum();
        if total != p {
            return Err(Error::DimensionMismatch {
                what: "sum of group sizes vs design columns",
                expected: p,
                got: total,
            });
        }
        if design.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in data".into()));
        }
        let mut offsets = Vec::with_capacity(group_sizes.len() + 1);
        offsets.push(0);
        for s in &group_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self {
            y,
            design,
            group_sizes,
            offsets,
            ls: OnceLock::new(),
        })
    }

    /// Builds a problem from row-major data, the layout CSV files use.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64], group_sizes: Vec<usize>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                what: "row length",
                expected: p,
                got: bad.len(),
            });
        }
        let design = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(design, DVector::from_column_slice(y), group_sizes)
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn group_size(&self, k: usize) -> usize {
        self.group_sizes[k]
    }

    pub fn group_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Column block `X_k`.
    pub fn group_design(&self, k: usize) -> DMatrixView<'_, f64> {
        self.design.columns(self.offsets[k], self.group_sizes[k])
    }

    pub fn check_group(&self, k: usize) -> Result<()> {
        if k < self.num_groups() {
            Ok(())
        } else {
            Err(Error::GroupOutOfRange {
                index: k,
                groups: self.num_groups(),
            })
        }
    }

    pub fn check_coefficients(&self, beta: &Coefficients) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: self.p(),
                got: beta.len(),
            });
        }
        if beta.group_sizes() != self.group_sizes.as_slice() {
            return Err(Error::InvalidInput(
                "coefficient partition differs from the problem's groups".into(),
            ));
        }
        Ok(())
    }

    /// `X beta`.
    pub fn fitted(&self, beta: &Coefficients) -> DVector<f64> {
        &self.design * beta.values()
    }

    /// `y - X beta`.
    pub fn residual(&self, beta: &Coefficients) -> DVector<f64> {
        &self.y - self.fitted(beta)
    }

    /// Least-squares quantities, computed on first use and cached.
    pub fn ls_quantities(&self) -> &LsQuantities {
        self.ls.get_or_init(|| LsQuantities::compute(self))
    }
}

/// Penalty weights. Solvers call [`Penalty::validate`]; the objective accepts
/// zero weights so limiting cases can be evaluated directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    GroupLasso { lambda: f64 },
    SparseGroupLasso { lambda1: f64, lambda2: f64 },
}

impl Penalty {
    pub fn group(lambda: f64) -> Result<Self> {
        let p = Penalty::GroupLasso { lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn sparse_group(lambda1: f64, lambda2: f64) -> Result<Self> {
        let p = Penalty::SparseGroupLasso { lambda1, lambda2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Penalty::GroupLasso { lambda } if ok(lambda) => Ok(()),
            Penalty::SparseGroupLasso { lambda1, lambda2 } if ok(lambda1) && ok(lambda2) => Ok(()),
            _ => Err(Error::InvalidInput(format!(
                "penalty weights must be finite and positive: {self:?}"
            ))),
        }
    }

    /// Weight on the group 2-norms (`lambda` or `lambda1`).
    pub fn group_weight(&self) -> f64 {
        match *self {
            Penalty::GroupLasso { lambda } => lambda,
            Penalty::SparseGroupLasso { lambda1, .. } => lambda1,
        }
    }

    /// Weight on the 1-norm; zero for the group lasso.
    pub fn l1_weight(&self) -> f64 {
        match *self {
            Penalty::GroupLasso { .. } => 0.0,
            Penalty::SparseGroupLasso { lambda2, .. } => lambda2,
        }
    }

    pub fn value(&self, beta: &Coefficients) -> f64 {
        let mut v = self.group_weight() * beta.sum_group_norms();
        let l1 = self.l1_weight();
        if l1 != 0.0 {
            v += l1 * beta.values().iter().map(|b| b.abs()).sum::<f64>();
        }
        v
    }
}

/// Coefficient vector carrying the same group partition as its problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    values: DVector<f64>,
    group_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Coefficients {
    pub fn zeros(problem: &GroupedProblem) -> Self {
        Self::from_parts(DVector::zeros(problem.p()), problem.group_sizes.clone())
    }

    pub fn from_vec(problem: &GroupedProblem, values: Vec<f64>) -> Result<Self> {
        if values.len() != problem.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: problem.p(),
                got: values.len(),
            });
        }
        Ok(Self::from_parts(
            DVector::from_vec(values),
            problem.group_sizes.clone(),
        ))
    }

    fn from_parts(values: DVector<f64>, group_sizes: Vec<usize>) -> Self {
        let mut offsets = vec![0];
        for s in &group_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self {
            values,
            group_sizes,
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn group(&self, k: usize) -> &[f64] {
        &self.values.as_slice()[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn group_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.offsets[k]..self.offsets[k + 1];
        &mut self.values.as_mut_slice()[r]
    }

    pub fn group_view(&self, k: usize) -> DVectorView<'_, f64> {
        self.values.rows(self.offsets[k], self.group_sizes[k])
    }

    pub fn group_norm(&self, k: usize) -> f64 {
        norm2(self.group(k))
    }

    pub fn sum_group_norms(&self) -> f64 {
        (0..self.num_groups()).map(|k| self.group_norm(k)).sum()
    }

    pub fn is_group_zero(&self, k: usize) -> bool {
        self.group(k).iter().all(|&v| v == 0.0)
    }

    /// Indices of groups with at least one nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        (0..self.num_groups())
            .filter(|&k| !self.is_group_zero(k))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Coefficients) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `R_k = y - sum_{l != k} X_l beta_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialResidual(pub DVector<f64>);

impl PartialResidual {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `sign(x) * max(|x| - t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    let m = x.abs() - t;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `1/2 ||y - X beta||^2` plus the penalty.
pub fn objective(problem: &GroupedProblem, penalty: &Penalty, beta: &Coefficients) -> Result<f64> {
    problem.check_coefficients(beta)?;
    let r = problem.residual(beta);
    Ok(0.5 * r.norm_squared() + penalty.value(beta))
}

/// Direct evaluation of `R_k`.
pub fn partial_residual(
    problem: &GroupedProblem,
    beta: &Coefficients,
    k: usize,
) -> Result<PartialResidual> {
    problem.check_group(k)?;
    problem.check_coefficients(beta)?;
    let mut r = problem.y.clone();
    for l in (0..problem.num_groups()).filter(|&l| l != k) {
        if !beta.is_group_zero(l) {
            r -= problem.group_design(l) * beta.group_view(l);
        }
    }
    Ok(PartialResidual(r))
}

/// Full residual `y - X beta`, kept current across group updates.
///
/// `take_partial` adds back group k's contribution; `commit` subtracts the new
/// one. A solver calls `refresh` once per sweep to discard accumulated drift.
#[derive(Debug, Clone)]
pub(crate) struct ResidualTracker {
    r: DVector<f64>,
}

impl ResidualTracker {
    pub fn new(problem: &GroupedProblem, beta: &Coefficients) -> Self {
        Self {
            r: problem.residual(beta),
        }
    }

    pub fn refresh(&mut self, problem: &GroupedProblem, beta: &Coefficients) {
        self.r = problem.residual(beta);
    }

    pub fn full(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn take_partial(
        &self,
        problem: &GroupedProblem,
        beta: &Coefficients,
        k: usize,
    ) -> PartialResidual {
        let mut rk = self.r.clone();
        if !beta.is_group_zero(k) {
            rk += problem.group_design(k) * beta.group_view(k);
        }
        PartialResidual(rk)
    }

    pub fn commit(
        &mut self,
        problem: &GroupedProblem,
        k: usize,
        partial: PartialResidual,
        new_group: &DVector<f64>,
    ) {
        let mut r = partial.0;
        if new_group.iter().any(|&v| v != 0.0) {
            r -= problem.group_design(k) * new_group;
        }
        self.r = r;
    }
}

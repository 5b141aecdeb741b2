//! Python bindings. Coefficients cross the boundary as flat lists of floats
//! ordered group by group; penalties are given as `lam` (group lasso) or
//! `lambda1` and `lambda2` (sparse group lasso).

use grouplasso::diagnostics::{
    accuracy_bounds, certificate as core_certificate, certificate_tolerance,
};
use grouplasso::linesearch::{solve_secular as core_solve_secular, LineSearchProblem};
use grouplasso::model::{objective, Coefficients, GroupedProblem, Penalty};
use grouplasso::oracle::{fista_solve, OracleOptions};
use grouplasso::simgen::{penalty_ladder, sample_problem, SimulationConfig};
use grouplasso::sls::{self, SolveOptions};
use grouplasso::{ssls, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::GroupOutOfRange { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Penalty from keyword arguments.
pub fn make_penalty(
    lam: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
) -> PyResult<Penalty> {
    match (lam, lambda1, lambda2) {
        (Some(l), None, None) => Penalty::group(l).map_err(to_py),
        (None, Some(a), Some(b)) => Penalty::sparse_group(a, b).map_err(to_py),
        _ => Err(PyValueError::new_err(
            "give lam, or both lambda1 and lambda2",
        )),
    }
}

/// Grouped regression data: design rows, response, group sizes.
#[pyclass(name = "Problem", frozen)]
pub struct PyProblem {
    inner: GroupedProblem,
}

impl PyProblem {
    fn coefficients(&self, beta: Vec<f64>) -> PyResult<Coefficients> {
        Coefficients::from_vec(&self.inner, beta).map_err(to_py)
    }
}

#[pymethods]
impl PyProblem {
    #[new]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, group_sizes: Vec<usize>) -> PyResult<Self> {
        let inner = GroupedProblem::from_rows(&x, &y, group_sizes).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn group_sizes(&self) -> Vec<usize> {
        self.inner.group_sizes().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().as_slice().to_vec()
    }

    /// Design matrix as a list of rows.
    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        let d = self.inner.design();
        (0..d.nrows())
            .map(|i| d.row(i).iter().cloned().collect())
            .collect()
    }

    /// Smallest group lasso penalty with an all-zero solution.
    fn lambda_max(&self) -> f64 {
        sls::lambda_max(&self.inner)
    }

    #[pyo3(signature = (beta, lam=None, lambda1=None, lambda2=None))]
    fn objective(
        &self,
        beta: Vec<f64>,
        lam: Option<f64>,
        lambda1: Option<f64>,
        lambda2: Option<f64>,
    ) -> PyResult<f64> {
        let pen = make_penalty(lam, lambda1, lambda2)?;
        objective(&self.inner, &pen, &self.coefficients(beta)?).map_err(to_py)
    }

    fn fitted(&self, beta: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .fitted(&self.coefficients(beta)?)
            .as_slice()
            .to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(n={}, p={}, group_sizes={:?})",
            self.inner.n(),
            self.inner.p(),
            self.inner.group_sizes()
        )
    }
}

/// Result of an exact block coordinate descent solve.
#[pyclass(name = "Solution", frozen, get_all)]
pub struct PySolution {
    beta: Vec<f64>,
    sweeps: usize,
    converged: bool,
    /// Objective at the start and after every sweep.
    objective_per_sweep: Vec<f64>,
    wall_seconds: f64,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(sweeps={}, converged={})",
            self.sweeps, self.converged
        )
    }
}

/// Solve with SLS (group lasso) or SSLS (sparse group lasso).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (problem, lam=None, lambda1=None, lambda2=None, tol=1e-8, max_sweeps=100_000, initial=None))]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    lam: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    tol: f64,
    max_sweeps: usize,
    initial: Option<Vec<f64>>,
) -> PyResult<PySolution> {
    let pen = make_penalty(lam, lambda1, lambda2)?;
    let initial = initial.map(|b| problem.coefficients(b)).transpose()?;
    let options = SolveOptions {
        tol,
        max_sweeps,
        initial,
    };
    let sol = py
        .detach(|| grouplasso::fit(&problem.inner, &pen, &options))
        .map_err(to_py)?;
    Ok(PySolution {
        beta: sol.beta.as_slice().to_vec(),
        sweeps: sol.trace.sweeps,
        converged: sol.trace.converged,
        objective_per_sweep: sol.trace.objective_per_sweep.clone(),
        wall_seconds: sol.trace.wall_time.as_secs_f64(),
    })
}

/// Warm-started path; returns `[(lambda, beta), ...]`. Uses the ladder
/// `lambda_max * 2^-i` unless `lambdas` is given; `lambda2` switches to the
/// sparse group lasso with that fixed 1-norm weight.
#[pyfunction]
#[pyo3(signature = (problem, lambdas=None, ladder_length=5, lambda2=None, tol=1e-8))]
fn path(
    py: Python<'_>,
    problem: &PyProblem,
    lambdas: Option<Vec<f64>>,
    ladder_length: usize,
    lambda2: Option<f64>,
    tol: f64,
) -> PyResult<Vec<(f64, Vec<f64>)>> {
    let lambdas = match lambdas {
        Some(l) => l,
        None => {
            penalty_ladder(&problem.inner, ladder_length)
                .map_err(to_py)?
                .values
        }
    };
    let options = SolveOptions::default().with_tol(tol);
    let points = py
        .detach(|| match lambda2 {
            Some(l2) => sls::solve_sparse_path(&problem.inner, &lambdas, l2, &options),
            None => sls::solve_path(&problem.inner, &lambdas, &options),
        })
        .map_err(to_py)?;
    Ok(points
        .into_iter()
        .map(|pt| (pt.lambda, pt.solution.beta.as_slice().to_vec()))
        .collect())
}

/// Minimum-norm subgradient and accuracy bounds at `beta`.
#[pyfunction]
#[pyo3(signature = (problem, beta, lam=None, lambda1=None, lambda2=None))]
fn certificate<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    beta: Vec<f64>,
    lam: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let pen = make_penalty(lam, lambda1, lambda2)?;
    let b = problem.coefficients(beta)?;
    let cert = core_certificate(&problem.inner, &pen, &b).map_err(to_py)?;
    let bounds = accuracy_bounds(&problem.inner, &pen, &b, &cert, None).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("w", cert.w.as_slice().to_vec())?;
    d.set_item("w_norm", cert.w_norm)?;
    d.set_item("tolerance", certificate_tolerance(&problem.inner))?;
    d.set_item("bound_objective", bounds.bound_objective)?;
    d.set_item("bound_lse", bounds.bound_lse)?;
    d.set_item(
        "objective",
        objective(&problem.inner, &pen, &b).map_err(to_py)?,
    )?;
    Ok(d)
}

/// Reference solve by accelerated proximal gradient; returns
/// `(beta, iterations, converged)`.
#[pyfunction]
#[pyo3(signature = (problem, lam=None, lambda1=None, lambda2=None, tol=1e-10, max_iters=1_000_000))]
fn fista(
    py: Python<'_>,
    problem: &PyProblem,
    lam: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    tol: f64,
    max_iters: usize,
) -> PyResult<(Vec<f64>, usize, bool)> {
    let pen = make_penalty(lam, lambda1, lambda2)?;
    let opts = OracleOptions {
        tol,
        max_iters,
        ..OracleOptions::default()
    };
    let (b, rep) = py
        .detach(|| fista_solve(&problem.inner, &pen, &opts))
        .map_err(to_py)?;
    Ok((b.as_slice().to_vec(), rep.iterations, rep.converged))
}

/// Simulated problem with Kronecker-structured covariance; returns
/// `(problem, true_beta)`.
#[pyfunction]
#[pyo3(signature = (n=50, k=10, group_size=10, a=0.5, b=0.5, seed=0))]
fn simulate(
    n: usize,
    k: usize,
    group_size: usize,
    a: f64,
    b: f64,
    seed: u64,
) -> PyResult<(PyProblem, Vec<f64>)> {
    let cfg = SimulationConfig::new(n, k, group_size, a, b, seed).map_err(to_py)?;
    let (p, truth) = sample_problem(&cfg).map_err(to_py)?;
    Ok((PyProblem { inner: p }, truth.as_slice().to_vec()))
}

/// Root `r` of `sum v_j^2 / (d_j r + lam)^2 = 1` and the rotated solution.
#[pyfunction]
fn solve_secular(d: Vec<f64>, v: Vec<f64>, lam: f64) -> PyResult<(f64, Vec<f64>)> {
    let lsp = LineSearchProblem::new(d, v, lam).map_err(to_py)?;
    let res = core_solve_secular(&lsp).map_err(to_py)?;
    Ok((res.r, res.alpha_rotated))
}

/// Size limit for groups under the sparse group lasso solver.
#[pyfunction]
fn max_signed_group() -> usize {
    ssls::MAX_SIGNED_GROUP
}

#[pymodule]
pub fn pygrouplasso(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(path, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(fista, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_secular, m)?)?;
    m.add_function(wrap_pyfunction!(max_signed_group, m)?)?;
    m.add("RNG_NAME", grouplasso::simgen::RNG_NAME)?;
    Ok(())
}

//! Simulated grouped designs with Kronecker-structured covariance
//! `Sigma = B (x) C`, where `B` couples groups and `C` couples coordinates
//! inside a group, plus geometric penalty ladders.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Coefficients, GroupedProblem};
use crate::sls::{bound_from_solution, lambda_max};

/// Name of the generator used by `sample_problem`, for run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// The nine (a, b) correlation structures of the default benchmark grid.
pub const DEFAULT_AB_GRID: [(f64, f64); 9] = [
    (0.2, 0.2),
    (0.2, 0.5),
    (0.2, 0.8),
    (0.5, 0.2),
    (0.5, 0.5),
    (0.5, 0.8),
    (0.8, 0.2),
    (0.8, 0.5),
    (0.8, 0.8),
];

/// Default group counts of the benchmark grid.
pub const DEFAULT_KS: [usize; 4] = [10, 20, 40, 80];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub k: usize,
    pub group_size: usize,
    /// Within-group correlation.
    pub a: f64,
    /// Between-group similarity.
    pub b: f64,
    pub noise_scale_factor: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 50,
            k: 10,
            group_size: 10,
            a: 0.5,
            b: 0.5,
            noise_scale_factor: 0.01,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn new(n: usize, k: usize, group_size: usize, a: f64, b: f64, seed: u64) -> Result<Self> {
        let c = Self {
            n,
            k,
            group_size,
            a,
            b,
            seed,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.group_size == 0 {
            return Err(Error::InvalidInput(
                "n, K and group size must be at least 1".into(),
            ));
        }
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0, 1), got {v}"
                )));
            }
        }
        if !(self.noise_scale_factor >= 0.0 && self.noise_scale_factor.is_finite()) {
            return Err(Error::InvalidInput(
                "noise scale factor must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.k * self.group_size
    }

    /// `beta0^T Sigma beta0` for the two-active-group truth.
    pub fn signal_variance(&self) -> f64 {
        let g = self.group_size as f64;
        let inner = g + g * (g - 1.0) * self.a;
        if self.k >= 2 {
            (2.0 + 2.0 * self.b) * inner
        } else {
            inner
        }
    }

    /// Noise variance `c^2 = noise_scale_factor * beta0^T Sigma beta0`.
    pub fn noise_variance(&self) -> f64 {
        self.noise_scale_factor * self.signal_variance()
    }
}

/// One point of the benchmark grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub a: f64,
    pub b: f64,
    pub k: usize,
}

impl Scenario {
    pub fn config(&self, n: usize, group_size: usize, seed: u64) -> Result<SimulationConfig> {
        SimulationConfig::new(n, self.k, group_size, self.a, self.b, seed)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={},b={},K={}", self.a, self.b, self.k)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut a, mut b, mut k) = (None, None, None);
        for part in s.split(',') {
            let (key, val) = part.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("malformed scenario component '{part}'"))
            })?;
            let bad = || Error::InvalidInput(format!("bad value in scenario component '{part}'"));
            match key.trim() {
                "a" => a = Some(val.trim().parse::<f64>().map_err(|_| bad())?),
                "b" => b = Some(val.trim().parse::<f64>().map_err(|_| bad())?),
                "K" | "k" => k = Some(val.trim().parse::<usize>().map_err(|_| bad())?),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown scenario key '{other}'"
                    )))
                }
            }
        }
        match (a, b, k) {
            (Some(a), Some(b), Some(k)) => {
                SimulationConfig::new(1, k, 1, a, b, 0)?;
                Ok(Scenario { a, b, k })
            }
            _ => Err(Error::InvalidInput(format!(
                "scenario '{s}' needs a, b and K"
            ))),
        }
    }
}

/// Default scenario grid: every (a, b) pair crossed with every K.
pub fn default_scenarios() -> Vec<Scenario> {
    DEFAULT_AB_GRID
        .iter()
        .flat_map(|&(a, b)| DEFAULT_KS.iter().map(move |&k| Scenario { a, b, k }))
        .collect()
}

/// `(1 - c) I + c 11^T` of size `m`.
pub fn compound_symmetry(m: usize, c: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { c })
}

/// Symmetric square root of `(1 - c) I + c 11^T`, in closed form.
pub fn compound_symmetry_sqrt(m: usize, c: f64) -> DMatrix<f64> {
    let base = (1.0 - c).sqrt();
    let top = (1.0 + (m as f64 - 1.0) * c).sqrt();
    let off = (top - base) / m as f64;
    DMatrix::from_fn(m, m, |i, j| if i == j { base + off } else { off })
}

/// Explicit `Sigma` built entry by entry from the block pattern.
pub fn explicit_covariance(config: &SimulationConfig) -> DMatrix<f64> {
    let g = config.group_size;
    let p = config.p();
    DMatrix::from_fn(p, p, |i, j| {
        let within = if i % g == j % g { 1.0 } else { config.a };
        let between = if i / g == j / g { 1.0 } else { config.b };
        within * between
    })
}

/// `F = B^{1/2} (x) C^{1/2}`, so `F F^T = Sigma`.
pub fn covariance_factor(config: &SimulationConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let bh = compound_symmetry_sqrt(config.k, config.b);
    let ch = compound_symmetry_sqrt(config.group_size, config.a);
    Ok(bh.kronecker(&ch))
}

/// Lower Cholesky factor of an arbitrary positive definite covariance.
pub fn cholesky_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::InvalidInput("covariance must be square".into()));
    }
    sigma
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))
}

/// True coefficients: ones on the first two groups, zero elsewhere.
pub fn true_beta(problem: &GroupedProblem) -> Coefficients {
    let mut beta = Coefficients::zeros(problem);
    for k in 0..problem.num_groups().min(2) {
        beta.group_mut(k).iter_mut().for_each(|v| *v = 1.0);
    }
    beta
}

/// Draw `(X, y)` with rows `N(0, Sigma)` and `y ~ N(X beta0, c^2 I)`.
pub fn sample_problem(config: &SimulationConfig) -> Result<(GroupedProblem, Coefficients)> {
    let factor = covariance_factor(config)?;
    sample_with_factor(config, &factor)
}

/// As `sample_problem`, with a caller-supplied factor `F` (`F F^T = Sigma`).
pub fn sample_with_factor(
    config: &SimulationConfig,
    factor: &DMatrix<f64>,
) -> Result<(GroupedProblem, Coefficients)> {
    config.validate()?;
    let p = config.p();
    if factor.nrows() != p || factor.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "covariance factor size",
            expected: p,
            got: factor.nrows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Z is n x p standard normal, drawn row by row; X = Z F^T
    let z = DMatrix::from_fn(config.n, p, |_, _| 0.0);
    let mut z = z;
    for i in 0..config.n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let x = z * factor.transpose();
    let c = config.noise_variance().sqrt();
    let mut beta0 = DVector::zeros(p);
    for j in 0..p.min(2 * config.group_size) {
        beta0[j] = 1.0;
    }
    let mut y = &x * &beta0;
    for i in 0..config.n {
        let e: f64 = StandardNormal.sample(&mut rng);
        y[i] += c * e;
    }
    let problem = GroupedProblem::new(x, y, vec![config.group_size; config.k])?;
    let truth = true_beta(&problem);
    Ok((problem, truth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyLadder {
    /// Strictly decreasing positive penalties.
    pub values: Vec<f64>,
    /// `sum_k ||beta_k||` at each penalty, once solved.
    pub bounds: Option<Vec<f64>>,
}

/// `lambda_max * 2^-i` for `i = 1..=length`.
pub fn penalty_ladder(problem: &GroupedProblem, length: usize) -> Result<PenaltyLadder> {
    if length == 0 {
        return Err(Error::InvalidInput(
            "ladder length must be at least 1".into(),
        ));
    }
    let lmax = lambda_max(problem);
    if !(lmax > 0.0) {
        return Err(Error::Degenerate("lambda_max is zero: X^T y = 0".into()));
    }
    let values = (1..=length).map(|i| lmax * 0.5f64.powi(i as i32)).collect();
    Ok(PenaltyLadder {
        values,
        bounds: None,
    })
}

/// Fill `bounds` with `sum_k ||beta_k||` of each solution.
pub fn bounds_for_ladder(
    ladder: &PenaltyLadder,
    solutions: &[Coefficients],
) -> Result<PenaltyLadder> {
    if solutions.len() != ladder.values.len() {
        return Err(Error::DimensionMismatch {
            what: "solutions per ladder value",
            expected: ladder.values.len(),
            got: solutions.len(),
        });
    }
    Ok(PenaltyLadder {
        values: ladder.values.clone(),
        bounds: Some(solutions.iter().map(bound_from_solution).collect()),
    })
}

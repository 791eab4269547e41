//! Return moments and portfolio weight solvers.

mod box_qp;
mod closed_form;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use box_qp::{min_attainable_iv, project_onto_polytope, solve_box_constrained, BoxSolution};
pub use closed_form::{solve_markowitz, solve_robust, solve_with_riskfree};

pub const DEFAULT_LOWER: f64 = 0.01;
pub const DEFAULT_UPPER: f64 = 0.40;
pub const DEFAULT_SHRINKAGE: f64 = 0.2;
pub const DEFAULT_KAPPA: f64 = 0.1;
pub const DEFAULT_RISK_AVERSION: f64 = 1.0;

const RIDGE: f64 = 1e-8;
const MIN_RCOND: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("window {window} exceeds the {available} available observations")]
    WindowTooLarge { window: usize, available: usize },
    #[error("estimation window must be at least 2, got {0}")]
    DegenerateWindow(usize),
    #[error("missing return for asset {asset} at row {row}")]
    MissingData { row: usize, asset: usize },
    #[error("shrinkage intensity must lie in [0, 1], got {0}")]
    InvalidIntensity(f64),
    #[error("covariance is singular after regularization (reciprocal condition {rcond:.3e})")]
    SingularCovariance { rcond: f64 },
    #[error("target return {target} is unattainable when every asset has mean {mean}")]
    TargetUnattainable { target: f64, mean: f64 },
    #[error("no asset has an expected return different from the risk-free rate {rf}")]
    NoExcessReturn { rf: f64 },
    #[error("bounds [{lower}, {upper}] are infeasible for {n} assets with weights summing to 1")]
    InfeasibleConstraints { n: usize, lower: f64, upper: f64 },
    #[error("IV cap {cap} is below the minimum attainable portfolio IV {min}")]
    InfeasibleIvCap { cap: f64, min: f64 },
    #[error("invalid `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },
    #[error("solver stopped after {iterations} iterations with KKT residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> OptimizerError {
    OptimizerError::InvalidInput {
        field,
        reason: reason.into(),
    }
}

/// Per-period mean and covariance of asset returns.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub assets: Vec<String>,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub window: usize,
}

impl MomentEstimate {
    /// Builds an estimate directly, mostly for tests and hand problems.
    pub fn from_parts(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self, OptimizerError> {
        let n = mean.len();
        if n == 0 {
            return Err(invalid("mean", "no assets"));
        }
        if covariance.shape() != (n, n) {
            return Err(invalid(
                "covariance",
                format!("expected {n}x{n}, got {:?}", covariance.shape()),
            ));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("covariance", "non-finite entry"));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(invalid("covariance", "not symmetric"));
        }
        Ok(Self {
            assets: (0..n).map(|i| format!("asset_{i}")).collect(),
            mean: DVector::from_vec(mean),
            covariance,
            window: 0,
        })
    }

    pub fn with_assets(mut self, assets: Vec<String>) -> Self {
        assert_eq!(
            assets.len(),
            self.n(),
            "asset names must match the moment dimension"
        );
        self.assets = assets;
        self
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    pub fn with_covariance(&self, covariance: DMatrix<f64>) -> Self {
        Self {
            covariance,
            ..self.clone()
        }
    }

    /// Mean return of the equal-weight portfolio, the default static target.
    pub fn equal_weight_mean(&self) -> f64 {
        self.mean.mean()
    }

    pub fn variance_of(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        (w.transpose() * &self.covariance * &w)[(0, 0)]
    }

    pub fn mean_of(&self, w: &[f64]) -> f64 {
        self.mean.iter().zip(w).map(|(m, w)| m * w).sum()
    }
}

/// Sample mean and covariance (denominator `window - 1`) over the trailing
/// `window` rows of a T x n return matrix.
pub fn estimate_moments(
    returns: &DMatrix<f64>,
    window: usize,
) -> Result<MomentEstimate, OptimizerError> {
    let (t, n) = returns.shape();
    if n == 0 {
        return Err(invalid("returns", "no assets"));
    }
    if window < 2 {
        return Err(OptimizerError::DegenerateWindow(window));
    }
    if window > t {
        return Err(OptimizerError::WindowTooLarge {
            window,
            available: t,
        });
    }
    let rows = returns.rows(t - window, window);
    for (idx, v) in rows.iter().enumerate() {
        if !v.is_finite() {
            let (r, c) = (idx % window, idx / window);
            return Err(OptimizerError::MissingData {
                row: t - window + r,
                asset: c,
            });
        }
    }
    let mean = DVector::from_iterator(n, rows.column_iter().map(|c| c.sum() / window as f64));
    let mut centred = rows.clone_owned();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let mut covariance = centred.transpose() * &centred / (window as f64 - 1.0);
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(MomentEstimate {
        assets: (0..n).map(|i| format!("asset_{i}")).collect(),
        mean,
        covariance,
        window,
    })
}

/// `(1 - delta) * cov + delta * (tr(cov) / n) * I`.
pub fn shrink_covariance(cov: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>, OptimizerError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(OptimizerError::InvalidIntensity(delta));
    }
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(invalid("covariance", "must be square and non-empty"));
    }
    let target = cov.trace() / n as f64;
    let mut out = cov * (1.0 - delta);
    for i in 0..n {
        out[(i, i)] += delta * target;
    }
    Ok(out)
}

/// Inverse of `cov + 1e-8 * tr(cov)/n * I`, refused when still numerically singular.
pub(crate) fn regularized_inverse(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, OptimizerError> {
    let n = cov.nrows();
    let trace = cov.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(OptimizerError::SingularCovariance { rcond: 0.0 });
    }
    let mut reg = cov.clone();
    for i in 0..n {
        reg[(i, i)] += RIDGE * trace / n as f64;
    }
    let eig = SymmetricEigen::new(reg);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let rcond = min / max;
    if !(rcond >= MIN_RCOND) {
        return Err(OptimizerError::SingularCovariance {
            rcond: rcond.max(0.0),
        });
    }
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
    let v = &eig.eigenvectors;
    let inv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

pub(crate) fn largest_eigenvalue(cov: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(cov.clone()).eigenvalues.max().max(0.0)
}

/// Bounds on each weight, plus an optional cap on the weighted portfolio IV.
/// Weights always sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioConstraints {
    pub lower: f64,
    pub upper: f64,
    pub iv_cap: Option<f64>,
}

impl Default for PortfolioConstraints {
    fn default() -> Self {
        Self {
            lower: DEFAULT_LOWER,
            upper: DEFAULT_UPPER,
            iv_cap: None,
        }
    }
}

impl PortfolioConstraints {
    pub fn validate(&self, n: usize) -> Result<(), OptimizerError> {
        let infeasible = || OptimizerError::InfeasibleConstraints {
            n,
            lower: self.lower,
            upper: self.upper,
        };
        if !(self.lower >= 0.0) || !(self.upper > self.lower) || !self.upper.is_finite() {
            return Err(infeasible());
        }
        let nf = n as f64;
        if n == 0 || nf * self.lower > 1.0 + 1e-12 || nf * self.upper < 1.0 - 1e-12 {
            return Err(infeasible());
        }
        if let Some(cap) = self.iv_cap {
            if !(cap > 0.0) || !cap.is_finite() {
                return Err(invalid("iv_cap", format!("must be positive, got {cap}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub universe: Vec<String>,
    pub weights: Vec<f64>,
    /// Weight held in the risk-free asset; zero unless the problem has one.
    pub cash: f64,
    pub objective_value: f64,
}

impl WeightVector {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.cash
    }

    pub fn weight_of(&self, ric: &str) -> Option<f64> {
        self.universe
            .iter()
            .position(|r| r == ric)
            .map(|i| self.weights[i])
    }
}

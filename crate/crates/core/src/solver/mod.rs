//! Joint additive fit on a screened covariate set.
//!
//! Each retained covariate gets a centered B-spline block. A group-lasso
//! fit under the mass-matrix norm supplies initial coefficients and
//! adaptive weights; an iterated ridge (local quadratic approximation)
//! then minimizes
//!
//! ```text
//! ½‖y − Zb‖² + n Σ λ₁ w₁ⱼ ‖bⱼ‖_A + n Σ λ₂ w₂ⱼ ‖bⱼ‖_D
//! ```
//!
//! classifying blocks whose A-norm vanishes as zero and blocks whose
//! D-norm vanishes as linear. Tuning parameters are picked by eBIC.

mod design;
mod group_lasso;
mod lqa;
mod path;

pub use design::AdditiveDesign;
pub use group_lasso::{group_lasso_init, GroupLassoFit};
pub use lqa::{lqa_fit, penalized_objective};
pub use path::{fit_path, initial_estimate, loocv_pe, run_pipeline, LoocvResult, PipelineConfig, PipelineFit};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::splines::{quad_norm, SplineBasis, SplineError};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SolverError {
    #[error("covariate {column}: {source}")]
    Spline {
        column: usize,
        #[source]
        source: SplineError,
    },

    #[error("design has {rows} rows but response has {len} entries")]
    DimensionMismatch { rows: usize, len: usize },

    #[error("empty design: no covariates")]
    NoCovariates,

    #[error("linear system singular after jitter (lambda1 = {lambda1}, lambda2 = {lambda2})")]
    NumericalFailure { lambda1: f64, lambda2: f64 },

    #[error("new data has {got} columns, fit expects {expected}")]
    MissingColumn { expected: usize, got: usize },

    #[error("invalid penalty configuration: {0}")]
    InvalidConfig(String),

    #[error("screening failed: {0}")]
    Screening(#[from] crate::screening::ScreenError),

    #[error("leave-one-out needs at least 10 observations, got {0}")]
    TooFewForLoocv(usize),
}

/// A tuning grid, either absolute or as multiples of a data-driven scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub values: Vec<f64>,
    pub relative: bool,
}

impl LambdaGrid {
    /// `count` log-spaced multipliers from `lo` to `hi`, relative.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Self {
        let values = if count == 1 {
            vec![hi]
        } else {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        };
        Self {
            values,
            relative: true,
        }
    }

    pub fn absolute(values: Vec<f64>) -> Self {
        Self {
            values,
            relative: false,
        }
    }

    pub fn resolve(&self, scale: f64) -> Vec<f64> {
        if self.relative {
            self.values.iter().map(|v| v * scale).collect()
        } else {
            self.values.clone()
        }
    }

    fn validate(&self, name: &str) -> Result<(), SolverError> {
        if self.values.is_empty() {
            return Err(SolverError::InvalidConfig(format!("{name} grid is empty")));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SolverError::InvalidConfig(format!(
                "{name} grid must be strictly positive"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Relative grids scale with `max_j ‖Wⱼᵀy‖/n` (the smallest λ₀ that
    /// zeroes every block).
    pub lambda0_grid: LambdaGrid,
    /// Relative grids scale with `‖Zᵀy‖∞ / n`.
    pub lambda1_grid: LambdaGrid,
    pub lambda2_grid: LambdaGrid,
    pub drop_threshold: f64,
    pub weight_cap: f64,
    pub max_iter: usize,
    pub conv_tol: f64,
    pub ridge_jitter: f64,
    pub init_max_sweeps: usize,
    pub init_tol: f64,
    /// `false` gives the single-penalty sparse additive fit: λ₂ = 0 and no
    /// linear classification.
    pub identify_linear: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            lambda0_grid: LambdaGrid::log_spaced(1e-3, 1.0, 20),
            lambda1_grid: LambdaGrid::log_spaced(1e-4, 1.0, 10),
            lambda2_grid: LambdaGrid::log_spaced(1e-4, 1.0, 10),
            drop_threshold: 1e-6,
            weight_cap: 1e8,
            max_iter: 100,
            conv_tol: 1e-4,
            ridge_jitter: 1e-8,
            init_max_sweeps: 1000,
            init_tol: 1e-6,
            identify_linear: true,
        }
    }
}

impl PenaltyConfig {
    pub fn sparse_additive() -> Self {
        Self {
            identify_linear: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.lambda0_grid.validate("lambda0")?;
        self.lambda1_grid.validate("lambda1")?;
        if self.identify_linear {
            self.lambda2_grid.validate("lambda2")?;
        }
        if !(self.drop_threshold > 0.0) {
            return Err(SolverError::InvalidConfig("drop_threshold must be positive".into()));
        }
        if !(self.weight_cap > 0.0) {
            return Err(SolverError::InvalidConfig("weight_cap must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Adaptive weights from the initial estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum ComponentClass {
    Zero,
    /// Component equals `slope * x + offset` on the basis domain.
    Linear { slope: f64, offset: f64 },
    Nonlinear,
}

impl ComponentClass {
    pub fn name(&self) -> &'static str {
        match self {
            ComponentClass::Zero => "zero",
            ComponentClass::Linear { .. } => "linear",
            ComponentClass::Nonlinear => "nonlinear",
        }
    }

    pub fn is_nonzero(&self) -> bool {
        !matches!(self, ComponentClass::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    /// Spline coefficients per block; zero blocks are all zero and linear
    /// blocks lie in the null space of their roughness matrix.
    pub blocks: Vec<Vec<f64>>,
    /// Training column means of each block's design, subtracted at prediction.
    pub centering: Vec<Vec<f64>>,
    pub classification: Vec<ComponentClass>,
    pub lambda: (f64, f64),
    pub lambda0: Option<f64>,
    pub ebic: f64,
    pub rss: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn num_nonlinear(&self) -> usize {
        self.classification
            .iter()
            .filter(|c| matches!(c, ComponentClass::Nonlinear))
            .count()
    }

    pub fn num_linear(&self) -> usize {
        self.classification
            .iter()
            .filter(|c| matches!(c, ComponentClass::Linear { .. }))
            .count()
    }

    pub fn num_nonzero(&self) -> usize {
        self.classification.iter().filter(|c| c.is_nonzero()).count()
    }

    /// Centered contribution of block `j` at `x` (clamped to its domain).
    pub fn component_value(&self, basis: &SplineBasis, j: usize, x: f64) -> f64 {
        if !self.classification[j].is_nonzero() {
            return 0.0;
        }
        let shift: f64 = self.centering[j]
            .iter()
            .zip(&self.blocks[j])
            .map(|(m, b)| m * b)
            .sum();
        basis.eval_spline(&self.blocks[j], x) - shift
    }
}

const EBIC_RSS_FLOOR: f64 = 1e-12;

/// Extended BIC with `d1` nonlinear and `d2` linear components among `d`.
pub fn ebic(rss: f64, n: usize, k: usize, d: usize, d1: usize, d2: usize) -> f64 {
    let nf = n as f64;
    let nk = nf / k as f64;
    (rss / nf).max(EBIC_RSS_FLOOR).ln()
        + d1 as f64 * nk.ln() / nk
        + d2 as f64 * nf.ln() / nf
        + ((d1 * k + d2) as f64 / nf) * (d.max(1) as f64).ln()
}

/// Reciprocal block norms of the initial estimate, capped.
pub fn adaptive_weights(
    initial: &[DVector<f64>],
    design: &AdditiveDesign,
    cfg: &PenaltyConfig,
) -> Weights {
    let weight = |norm: f64| {
        if norm < cfg.drop_threshold {
            cfg.weight_cap
        } else {
            (1.0 / norm).min(cfg.weight_cap)
        }
    };
    let mut w1 = Vec::with_capacity(initial.len());
    let mut w2 = Vec::with_capacity(initial.len());
    for (j, b) in initial.iter().enumerate() {
        let g = &design.grams[j];
        w1.push(weight(quad_norm(&g.mass, b)));
        w2.push(weight(quad_norm(&g.roughness, b)));
    }
    Weights { w1, w2 }
}

/// Predictions `μ + Σ fⱼ(xⱼ)` for new rows whose columns follow the
/// fitted block order.
pub fn predict(
    fit: &FitResult,
    bases: &[SplineBasis],
    x_new: &DMatrix<f64>,
) -> Result<Vec<f64>, SolverError> {
    let d = fit.blocks.len();
    if x_new.ncols() != d || bases.len() != d {
        return Err(SolverError::MissingColumn {
            expected: d,
            got: x_new.ncols().min(bases.len()),
        });
    }
    let mut out = vec![fit.intercept; x_new.nrows()];
    for (j, basis) in bases.iter().enumerate() {
        if !fit.classification[j].is_nonzero() {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += fit.component_value(basis, j, x_new[(i, j)]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ebic_arithmetic() {
        assert_abs_diff_eq!(ebic(400.0, 400, 6, 16, 0, 0), 0.0, epsilon = 1e-15);
        let nk: f64 = 400.0 / 6.0;
        let direct = 2.0 * nk.ln() / nk + 3.0 * 400f64.ln() / 400.0 + (15.0 / 400.0) * 16f64.ln();
        let v = ebic(400.0, 400, 6, 16, 2, 3);
        assert_abs_diff_eq!(v, direct, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.2749, epsilon = 5e-5);
        assert!(ebic(400.0, 400, 6, 16, 2, 4) > v);
        // exact interpolation is floored, not -inf
        assert!(ebic(0.0, 400, 6, 16, 0, 0).is_finite());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = LambdaGrid::log_spaced(1e-4, 1.0, 10);
        assert_eq!(g.values.len(), 10);
        assert_abs_diff_eq!(g.values[0], 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(g.values[9], 1.0, epsilon = 1e-14);
        assert_eq!(g.resolve(2.0)[9], 2.0);
        assert!(LambdaGrid::absolute(vec![]).validate("x").is_err());
        assert!(LambdaGrid::absolute(vec![0.0]).validate("x").is_err());
    }
}

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::group_lasso::{fit_at, GroupLassoFit, WhitenedProblem};
use super::{adaptive_weights, lqa_fit, predict, AdditiveDesign, FitResult, PenaltyConfig, SolverError};
use crate::screening::{self, ActiveSet, Method, ScreeningConfig};
use crate::splines::SplineBasis;

/// Group-lasso initializer with λ₀ picked along a warm-started path by
/// `log(rss/n) + (#nonzero blocks)·K·log(n)/n`.
pub fn initial_estimate(design: &AdditiveDesign, cfg: &PenaltyConfig) -> GroupLassoFit {
    let nf = design.n() as f64;
    let k = design.num_basis;
    let problem = WhitenedProblem::new(design, cfg.ridge_jitter);
    let mut lambda0s = cfg.lambda0_grid.resolve(problem.lambda_max());
    lambda0s.sort_by(|a, b| b.total_cmp(a));
    let mut warm: Option<DVector<f64>> = None;
    let mut best_init = None;
    let mut best_crit = f64::INFINITY;
    for &lambda0 in &lambda0s {
        let fit = fit_at(&problem, lambda0, warm.as_ref(), cfg);
        warm = Some(problem.whiten_blocks(&fit.blocks));
        let rss = design.rss(&fit.blocks);
        let crit = (rss / nf).max(1e-300).ln() + (fit.num_nonzero() * k) as f64 * nf.ln() / nf;
        // strict improvement keeps the larger λ₀ on ties
        if crit < best_crit {
            best_crit = crit;
            best_init = Some(fit);
        }
    }
    best_init.expect("lambda0 grid is nonempty")
}

/// Full tuning path: the initializer, then the (λ₁, λ₂) grid by eBIC.
pub fn fit_path(design: &AdditiveDesign, cfg: &PenaltyConfig) -> Result<FitResult, SolverError> {
    cfg.validate()?;
    let init = initial_estimate(design, cfg);
    let weights = adaptive_weights(&init.blocks, design, cfg);

    let scale = design.lambda_scale();
    let lambda1s = cfg.lambda1_grid.resolve(scale);
    let lambda2s = if cfg.identify_linear {
        cfg.lambda2_grid.resolve(scale)
    } else {
        vec![0.0]
    };
    let grid: Vec<(f64, f64)> = lambda1s
        .iter()
        .flat_map(|&l1| lambda2s.iter().map(move |&l2| (l1, l2)))
        .collect();

    let fits = grid
        .par_iter()
        .map(|&(l1, l2)| lqa_fit(design, &init.blocks, &weights, l1, l2, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut best = fits
        .into_iter()
        .min_by(|a, b| {
            a.ebic
                .total_cmp(&b.ebic)
                .then(b.lambda.0.total_cmp(&a.lambda.0))
                .then(b.lambda.1.total_cmp(&a.lambda.1))
        })
        .expect("tuning grid is nonempty");
    best.lambda0 = Some(init.lambda0);
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub screening: ScreeningConfig,
    pub penalty: PenaltyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::Ncrs,
            screening: ScreeningConfig::default(),
            penalty: PenaltyConfig::default(),
        }
    }
}

/// Screening followed by the penalized fit.
#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub active: ActiveSet,
    pub bases: Vec<SplineBasis>,
    pub fit: FitResult,
}

impl PipelineFit {
    /// Predicts from rows holding all p original covariates.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>, SolverError> {
        if let Some(&bad) = self.active.indices.iter().find(|&&j| j >= x.ncols()) {
            return Err(SolverError::MissingColumn {
                expected: bad + 1,
                got: x.ncols(),
            });
        }
        let sub = x.select_columns(&self.active.indices);
        predict(&self.fit, &self.bases, &sub)
    }
}

pub fn run_pipeline(
    x: &DMatrix<f64>,
    y: &[f64],
    cfg: &PipelineConfig,
) -> Result<PipelineFit, SolverError> {
    let scores = screening::score(cfg.method, x, y, &cfg.screening)?;
    let active = screening::select_active(&scores, cfg.screening.rule)?;
    if active.indices.is_empty() {
        return Err(SolverError::NoCovariates);
    }
    let sub = x.select_columns(&active.indices);
    let design = AdditiveDesign::new(&sub, y, &cfg.screening.basis)?;
    let fit = fit_path(&design, &cfg.penalty)?;
    Ok(PipelineFit {
        active,
        bases: design.bases,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    /// Mean squared prediction error over the folds that succeeded.
    pub pe: f64,
    pub folds: usize,
    pub failed_folds: Vec<usize>,
}

impl LoocvResult {
    pub fn had_failures(&self) -> bool {
        !self.failed_folds.is_empty()
    }
}

/// Leave-one-out prediction error of the whole pipeline, refitting
/// screening and the penalized fit for every held-out row.
pub fn loocv_pe(
    x: &DMatrix<f64>,
    y: &[f64],
    cfg: &PipelineConfig,
) -> Result<LoocvResult, SolverError> {
    let n = y.len();
    if n < 10 {
        return Err(SolverError::TooFewForLoocv(n));
    }
    if x.nrows() != n {
        return Err(SolverError::DimensionMismatch { rows: x.nrows(), len: n });
    }
    let outcomes: Vec<Result<f64, SolverError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let x_train = x.select_rows(&keep);
            let y_train: Vec<f64> = keep.iter().map(|&r| y[r]).collect();
            let model = run_pipeline(&x_train, &y_train, cfg)?;
            let row = x.rows(i, 1).clone_owned();
            let pred = model.predict(&row)?[0];
            Ok((y[i] - pred).powi(2))
        })
        .collect();

    let mut total = 0.0;
    let mut folds = 0;
    let mut failed_folds = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(err) => {
                total += err;
                folds += 1;
            }
            Err(e) => {
                log::warn!("leave-one-out fold {i} failed: {e}");
                failed_folds.push(i);
            }
        }
    }
    let pe = if folds > 0 { total / folds as f64 } else { f64::NAN };
    Ok(LoocvResult {
        pe,
        folds,
        failed_folds,
    })
}

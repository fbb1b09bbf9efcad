//! Marginal screening utilities.
//!
//! Every method maps an `n x p` design and a response to one nonnegative
//! score per covariate; larger means more useful. NCRS combines a marginal
//! B-spline regression of `y` on each covariate with the empirical CDF of
//! `y`; the others (SIS, NIS, SIRS, CR-SIS) are the usual competitors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::splines::{BasisSpec, SplineBasis, SplineError};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ScreenError {
    #[error("empty response")]
    EmptyResponse,

    #[error("non-finite response value at row {0}")]
    NonFiniteResponse(usize),

    #[error("design has {rows} rows but response has {len} entries")]
    DimensionMismatch { rows: usize, len: usize },

    #[error("marginal fit needs more than {num_basis} observations, got {n}")]
    TooFewObservations { n: usize, num_basis: usize },

    #[error("covariate {column}: {source}")]
    Spline {
        column: usize,
        #[source]
        source: SplineError,
    },

    #[error("invalid threshold rule: c = {c}, alpha = {alpha}")]
    InvalidThreshold { c: f64, alpha: f64 },

    #[error("unknown screening method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ncrs")]
    Ncrs,
    #[serde(rename = "sis")]
    Sis,
    #[serde(rename = "nis")]
    Nis,
    #[serde(rename = "sirs")]
    Sirs,
    #[serde(rename = "cr-sis")]
    CrSis,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ncrs,
        Method::Sis,
        Method::Nis,
        Method::Sirs,
        Method::CrSis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ncrs => "ncrs",
            Method::Sis => "sis",
            Method::Nis => "nis",
            Method::Sirs => "sirs",
            Method::CrSis => "cr-sis",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Ncrs => "NCRS",
            Method::Sis => "SIS",
            Method::Nis => "NIS",
            Method::Sirs => "SIRS",
            Method::CrSis => "CR-SIS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ScreenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ncrs" => Ok(Method::Ncrs),
            "sis" => Ok(Method::Sis),
            "nis" => Ok(Method::Nis),
            "sirs" => Ok(Method::Sirs),
            "cr-sis" | "crsis" => Ok(Method::CrSis),
            _ => Err(ScreenError::UnknownMethod(s.to_string())),
        }
    }
}

/// How many covariates a top-d rule keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSize {
    Fixed(usize),
    /// `multiplier * floor(n / ln n)`.
    NOverLogN(usize),
}

impl ModelSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            ModelSize::Fixed(d) => d,
            ModelSize::NOverLogN(m) => m * default_model_size(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    TopD(ModelSize),
    /// Keep every covariate with score `>= c * n^(-alpha)`.
    Threshold { c: f64, alpha: f64 },
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::TopD(ModelSize::NOverLogN(1))
    }
}

/// Screening settings. The theory constants behind the threshold rule
/// (the moment bound and the tail-bound rate) have no runtime role; only
/// `c` and `alpha` of the threshold are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    pub rule: SelectionRule,
    pub basis: BasisSpec,
    /// Use the sample-covariance form of NCRS; `false` gives the raw
    /// second-moment form.
    pub centered: bool,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            rule: SelectionRule::default(),
            basis: BasisSpec::default(),
            centered: true,
        }
    }
}

/// `floor(n / ln n)`.
pub fn default_model_size(n: usize) -> usize {
    if n < 3 {
        return n;
    }
    let n = n as f64;
    (n / n.ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScores {
    pub method: Method,
    pub scores: Vec<f64>,
    pub n: usize,
    pub centered: bool,
    /// Columns that were constant (or had too few distinct values for the
    /// spline fit) and received a fallback score.
    pub degenerate: Vec<usize>,
}

impl UtilityScores {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Covariate indices by decreasing score, ties to the smaller index.
    pub fn ranking(&self) -> Vec<usize> {
        rank_indices(&self.scores)
    }
}

pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    /// Zero-based covariate indices by decreasing score.
    pub indices: Vec<usize>,
    pub rule: SelectionRule,
    pub d_effective: usize,
    /// The requested size exceeded p and was capped.
    pub capped: bool,
}

/// Positions `i` with `y_j <= y_i` counted, divided by n.
pub fn ecdf_values(y: &[f64]) -> Result<Vec<f64>, ScreenError> {
    let n = y.len();
    if n == 0 {
        return Err(ScreenError::EmptyResponse);
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(ScreenError::NonFiniteResponse(pos));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        let value = end as f64 / n as f64;
        for &i in &order[start..end] {
            out[i] = value;
        }
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalFit {
    pub fitted: Vec<f64>,
    /// Constant covariate; fitted values are the response mean.
    pub degenerate: bool,
}

const MARGINAL_RIDGE: f64 = 1e-8;

/// Least-squares regression of `y` on the B-spline basis of one covariate.
pub fn marginal_fit(x: &[f64], y: &[f64], spec: &BasisSpec) -> Result<MarginalFit, ScreenError> {
    marginal_fit_column(x, y, spec, 0)
}

fn marginal_fit_column(
    x: &[f64],
    y: &[f64],
    spec: &BasisSpec,
    column: usize,
) -> Result<MarginalFit, ScreenError> {
    let n = y.len();
    if x.len() != n {
        return Err(ScreenError::DimensionMismatch {
            rows: x.len(),
            len: n,
        });
    }
    if n <= spec.num_basis {
        return Err(ScreenError::TooFewObservations {
            n,
            num_basis: spec.num_basis,
        });
    }
    let basis = match SplineBasis::build(x, spec) {
        Ok(b) => b,
        Err(SplineError::DuplicateKnots { .. }) => {
            let mean = y.iter().sum::<f64>() / n as f64;
            return Ok(MarginalFit {
                fitted: vec![mean; n],
                degenerate: true,
            });
        }
        Err(source) => return Err(ScreenError::Spline { column, source }),
    };

    let k = basis.num_basis();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut rows = vec![0.0; n * k];
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let row = &mut rows[i * k..(i + 1) * k];
        basis.eval_into(xi, row);
        for a in 0..k {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            rhs[a] += ra * yi;
            for b in a..k {
                gram[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            for a in 0..k {
                gram[(a, a)] += MARGINAL_RIDGE;
            }
            match gram.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    let mean = y.iter().sum::<f64>() / n as f64;
                    return Ok(MarginalFit {
                        fitted: vec![mean; n],
                        degenerate: true,
                    });
                }
            }
        }
    };
    let fitted = rows
        .chunks_exact(k)
        .map(|row| row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum())
        .collect();
    Ok(MarginalFit {
        fitted,
        degenerate: false,
    })
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<(), ScreenError> {
    if y.is_empty() {
        return Err(ScreenError::EmptyResponse);
    }
    if x.nrows() != y.len() {
        return Err(ScreenError::DimensionMismatch {
            rows: x.nrows(),
            len: y.len(),
        });
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(ScreenError::NonFiniteResponse(pos));
    }
    Ok(())
}

fn column(x: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Column standardized to mean 0 and unit (population) variance, or `None`
/// if it has zero variance.
pub fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    let m = mean(v);
    let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64;
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let sd = var.sqrt();
    Some(v.iter().map(|a| (a - m) / sd).collect())
}

fn collect_scores(
    method: Method,
    n: usize,
    centered: bool,
    per_column: Vec<(f64, bool)>,
) -> UtilityScores {
    let degenerate: Vec<usize> = per_column
        .iter()
        .enumerate()
        .filter_map(|(j, &(_, d))| d.then_some(j))
        .collect();
    if !degenerate.is_empty() {
        log::warn!(
            "{}: {} degenerate covariate(s) scored by fallback",
            method.label(),
            degenerate.len()
        );
    }
    UtilityScores {
        method,
        scores: per_column.into_iter().map(|(s, _)| s).collect(),
        n,
        centered,
        degenerate,
    }
}

/// NCRS: squared covariance between the marginal spline fit and the ECDF of y.
pub fn ncrs_scores(
    x: &DMatrix<f64>,
    y: &[f64],
    cfg: &ScreeningConfig,
) -> Result<UtilityScores, ScreenError> {
    check_inputs(x, y)?;
    let n = y.len();
    let g = ecdf_values(y)?;
    let g_mean = mean(&g);
    let centered = cfg.centered;
    let per_column = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let fit = marginal_fit_column(column(x, j), y, &cfg.basis, j)?;
            let m_mean = if centered { mean(&fit.fitted) } else { 0.0 };
            let g_shift = if centered { g_mean } else { 0.0 };
            let moment = fit
                .fitted
                .iter()
                .zip(&g)
                .map(|(m, gi)| (m - m_mean) * (gi - g_shift))
                .sum::<f64>()
                / n as f64;
            Ok((moment * moment, fit.degenerate))
        })
        .collect::<Result<Vec<_>, ScreenError>>()?;
    Ok(collect_scores(Method::Ncrs, n, centered, per_column))
}

/// CR-SIS: squared mean of standardized covariate times ECDF of y.
pub fn cr_sis_scores(x: &DMatrix<f64>, y: &[f64]) -> Result<UtilityScores, ScreenError> {
    check_inputs(x, y)?;
    let n = y.len();
    let g = ecdf_values(y)?;
    let per_column = (0..x.ncols())
        .into_par_iter()
        .map(|j| match standardize(column(x, j)) {
            Some(z) => {
                let m = z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                (m * m, false)
            }
            None => (0.0, true),
        })
        .collect();
    Ok(collect_scores(Method::CrSis, n, false, per_column))
}

/// SIS: squared Pearson correlation.
pub fn sis_scores(x: &DMatrix<f64>, y: &[f64]) -> Result<UtilityScores, ScreenError> {
    check_inputs(x, y)?;
    let n = y.len();
    let y_std = standardize(y);
    let per_column = (0..x.ncols())
        .into_par_iter()
        .map(|j| match (standardize(column(x, j)), &y_std) {
            (Some(z), Some(ys)) => {
                let r = z.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                ((r * r).min(1.0), false)
            }
            (None, _) => (0.0, true),
            (Some(_), None) => (0.0, false),
        })
        .collect();
    Ok(collect_scores(Method::Sis, n, false, per_column))
}

/// NIS: mean squared deviation of the marginal spline fit from the mean of y.
pub fn nis_scores(
    x: &DMatrix<f64>,
    y: &[f64],
    spec: &BasisSpec,
) -> Result<UtilityScores, ScreenError> {
    check_inputs(x, y)?;
    let n = y.len();
    let y_mean = mean(y);
    let per_column = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let fit = marginal_fit_column(column(x, j), y, spec, j)?;
            let s = fit
                .fitted
                .iter()
                .map(|m| (m - y_mean) * (m - y_mean))
                .sum::<f64>()
                / n as f64;
            Ok((s, fit.degenerate))
        })
        .collect::<Result<Vec<_>, ScreenError>>()?;
    Ok(collect_scores(Method::Nis, n, true, per_column))
}

/// SIRS: `(1/n) sum_k [(1/n) sum_i x_ij 1(y_i < y_k)]^2` on standardized
/// columns, in O(n log n + np).
pub fn sirs_scores(x: &DMatrix<f64>, y: &[f64]) -> Result<UtilityScores, ScreenError> {
    check_inputs(x, y)?;
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    // groups of tied responses in sorted order
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        groups.push((start, end));
        start = end;
    }
    let nf = n as f64;
    let per_column = (0..x.ncols())
        .into_par_iter()
        .map(|j| match standardize(column(x, j)) {
            Some(z) => {
                let mut below = 0.0;
                let mut total = 0.0;
                for &(s, e) in &groups {
                    let inner = below / nf;
                    total += (e - s) as f64 * inner * inner;
                    below += order[s..e].iter().map(|&i| z[i]).sum::<f64>();
                }
                (total / nf, false)
            }
            None => (0.0, true),
        })
        .collect();
    Ok(collect_scores(Method::Sirs, n, false, per_column))
}

/// Scores every covariate with `method`.
pub fn score(
    method: Method,
    x: &DMatrix<f64>,
    y: &[f64],
    cfg: &ScreeningConfig,
) -> Result<UtilityScores, ScreenError> {
    match method {
        Method::Ncrs => ncrs_scores(x, y, cfg),
        Method::Sis => sis_scores(x, y),
        Method::Nis => nis_scores(x, y, &cfg.basis),
        Method::Sirs => sirs_scores(x, y),
        Method::CrSis => cr_sis_scores(x, y),
    }
}

/// Applies the selection rule to a score vector.
pub fn select_active(
    scores: &UtilityScores,
    rule: SelectionRule,
) -> Result<ActiveSet, ScreenError> {
    let p = scores.len();
    let ranking = scores.ranking();
    match rule {
        SelectionRule::TopD(size) => {
            let requested = size.resolve(scores.n);
            let capped = requested > p;
            if capped {
                log::warn!("requested model size {requested} exceeds p = {p}; capped");
            }
            let d = requested.min(p);
            Ok(ActiveSet {
                indices: ranking[..d].to_vec(),
                rule,
                d_effective: d,
                capped,
            })
        }
        SelectionRule::Threshold { c, alpha } => {
            if !(c > 0.0) || !(0.0..0.5).contains(&alpha) {
                return Err(ScreenError::InvalidThreshold { c, alpha });
            }
            let cut = c * (scores.n as f64).powf(-alpha);
            let indices: Vec<usize> = ranking
                .into_iter()
                .filter(|&j| scores.scores[j] >= cut)
                .collect();
            Ok(ActiveSet {
                d_effective: indices.len(),
                indices,
                rule,
                capped: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn scores_of(v: &[f64], n: usize) -> UtilityScores {
        UtilityScores {
            method: Method::Ncrs,
            scores: v.to_vec(),
            n,
            centered: true,
            degenerate: vec![],
        }
    }

    #[test]
    fn ecdf_small_cases() {
        assert_eq!(ecdf_values(&[3.0, 1.0, 2.0]).unwrap(), vec![1.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(ecdf_values(&[4.0; 5]).unwrap(), vec![1.0; 5]);
        assert_eq!(ecdf_values(&[]), Err(ScreenError::EmptyResponse));
        assert_eq!(
            ecdf_values(&[1.0, 2.0, 2.0, 0.0]).unwrap(),
            vec![0.5, 1.0, 1.0, 0.25]
        );
    }

    #[test]
    fn ecdf_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = normals(&mut rng, 50);
        let fast = ecdf_values(&y).unwrap();
        for i in 0..50 {
            let count = y.iter().filter(|&&v| v <= y[i]).count();
            assert_eq!(fast[i], count as f64 / 50.0);
        }
    }

    #[test]
    fn marginal_fit_reproduces_constants_and_lines() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let spec = BasisSpec::default();
        let fit = marginal_fit(&x, &[5.0; 50], &spec).unwrap();
        assert!(fit.fitted.iter().all(|v| (v - 5.0).abs() < 1e-8));
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = marginal_fit(&x, &y, &spec).unwrap();
        for (a, b) in fit.fitted.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn marginal_fit_matches_dense_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (2.0 * std::f64::consts::PI * v).sin() + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let spec = BasisSpec::default();
        let fit = marginal_fit(&x, &y, &spec).unwrap();
        let basis = SplineBasis::build(&x, &spec).unwrap();
        let z = basis.design_block(&x);
        let svd = z.clone().svd(true, true);
        let coef = svd.solve(&DVector::from_vec(y.clone()), 1e-14).unwrap();
        let oracle = &z * coef;
        for i in 0..200 {
            assert_abs_diff_eq!(fit.fitted[i], oracle[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_covariate_is_degenerate() {
        let fit = marginal_fit(&[2.0; 20], &(0..20).map(|i| i as f64).collect::<Vec<_>>(), &BasisSpec::default()).unwrap();
        assert!(fit.degenerate);
        assert!(fit.fitted.iter().all(|&v| v == 9.5));
    }

    #[test]
    fn cr_sis_zero_column_and_rank_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let mut x = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        x.column_mut(2).fill(0.0);
        let y = normals(&mut rng, n);
        let s = cr_sis_scores(&x, &y).unwrap();
        assert_eq!(s.scores[2], 0.0);
        assert_eq!(s.degenerate, vec![2]);
        let ey: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        assert_eq!(cr_sis_scores(&x, &ey).unwrap().scores, s.scores);
    }

    #[test]
    fn sis_noiseless_and_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(20, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..20).map(|i| 3.0 * x[(i, 0)]).collect();
        assert_abs_diff_eq!(sis_scores(&x, &y).unwrap().scores[0], 1.0, epsilon = 1e-12);

        let y = normals(&mut rng, 20);
        let s = sis_scores(&x, &y).unwrap();
        let ym = mean(&y);
        for j in 0..5 {
            let c = column(&x, j);
            let cm = mean(c);
            let sxy: f64 = c.iter().zip(&y).map(|(a, b)| (a - cm) * (b - ym)).sum();
            let sxx: f64 = c.iter().map(|a| (a - cm).powi(2)).sum();
            let syy: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
            assert_abs_diff_eq!(s.scores[j], sxy * sxy / (sxx * syy), epsilon = 1e-12);
        }
    }

    #[test]
    fn nis_constant_response_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(30, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = nis_scores(&x, &[1.5; 30], &BasisSpec::default()).unwrap();
        assert!(s.scores.iter().all(|&v| v < 1e-16));
    }

    #[test]
    fn sirs_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, p) = (30, 4);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut y = normals(&mut rng, n);
        y[7] = y[3]; // a tie
        let fast = sirs_scores(&x, &y).unwrap();
        for j in 0..p {
            let z = standardize(column(&x, j)).unwrap();
            let mut omega = 0.0;
            for k in 0..n {
                let mut inner = 0.0;
                for i in 0..n {
                    if y[i] < y[k] {
                        inner += z[i];
                    }
                }
                inner /= n as f64;
                omega += inner * inner;
            }
            omega /= n as f64;
            assert_abs_diff_eq!(fast.scores[j], omega, epsilon = 1e-12);
        }
        let cubed: Vec<f64> = y.iter().map(|v| v * v * v + 2.0).collect();
        assert_eq!(sirs_scores(&x, &cubed).unwrap().scores, fast.scores);
    }

    #[test]
    fn select_top_d_and_ties() {
        let s = scores_of(&[0.9, 0.1, 0.5], 3);
        let a = select_active(&s, SelectionRule::TopD(ModelSize::Fixed(2))).unwrap();
        assert_eq!(a.indices, vec![0, 2]);
        let s = scores_of(&[0.2; 6], 6);
        let a = select_active(&s, SelectionRule::TopD(ModelSize::Fixed(3))).unwrap();
        assert_eq!(a.indices, vec![0, 1, 2]);
        let a = select_active(&s, SelectionRule::TopD(ModelSize::Fixed(10))).unwrap();
        assert!(a.capped);
        assert_eq!(a.d_effective, 6);
    }

    #[test]
    fn default_size_arithmetic() {
        assert_eq!(default_model_size(200), 37);
        assert_eq!(default_model_size(400), 66);
        assert_eq!(ModelSize::NOverLogN(2).resolve(30), 16);
    }

    #[test]
    fn threshold_rule() {
        let s = scores_of(&[0.3, 0.05, 0.2, 0.01], 100);
        // cut = 1.0 * 100^-0.25 ≈ 0.316 / 2 with c = 0.5 → 0.158
        let a = select_active(&s, SelectionRule::Threshold { c: 0.5, alpha: 0.25 }).unwrap();
        assert_eq!(a.indices, vec![0, 2]);
        assert!(select_active(&s, SelectionRule::Threshold { c: 1.0, alpha: 0.5 }).is_err());
    }

    #[test]
    fn unknown_method_name() {
        assert_eq!("CR-SIS".parse::<Method>().unwrap(), Method::CrSis);
        assert!("lasso".parse::<Method>().is_err());
    }
}

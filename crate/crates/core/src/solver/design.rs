use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::splines::{center_columns, BasisSpec, GramPair, SplineBasis};

/// Centered spline design for the covariates kept by screening, with the
/// cross-products the solvers reuse.
#[derive(Debug, Clone)]
pub struct AdditiveDesign {
    pub bases: Vec<SplineBasis>,
    pub grams: Vec<GramPair>,
    /// `n x dK`, columns centered.
    pub z: DMatrix<f64>,
    pub centering: Vec<Vec<f64>>,
    pub y_mean: f64,
    pub y_centered: DVector<f64>,
    /// `ZᵀZ`.
    pub zz: DMatrix<f64>,
    /// `Zᵀy` (with centered y).
    pub zy: DVector<f64>,
    /// `K x 2` coefficient bases of `{1, x}` per block.
    pub linear_coef: Vec<DMatrix<f64>>,
    pub num_basis: usize,
}

impl AdditiveDesign {
    /// `x` holds the retained covariates as columns.
    pub fn new(x: &DMatrix<f64>, y: &[f64], spec: &BasisSpec) -> Result<Self, SolverError> {
        let (n, d) = x.shape();
        if y.len() != n {
            return Err(SolverError::DimensionMismatch { rows: n, len: y.len() });
        }
        if d == 0 {
            return Err(SolverError::NoCovariates);
        }
        let k = spec.num_basis;
        let mut bases = Vec::with_capacity(d);
        let mut z = DMatrix::zeros(n, d * k);
        let mut centering = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let basis = SplineBasis::build(&col, spec)
                .map_err(|source| SolverError::Spline { column: j, source })?;
            let mut block = basis.design_block(&col);
            centering.push(center_columns(&mut block));
            z.view_mut((0, j * k), (n, k)).copy_from(&block);
            bases.push(basis);
        }
        let grams = bases.iter().map(|b| b.gram_matrices()).collect();
        let linear_coef = bases.iter().map(|b| b.linear_coefficients()).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let y_centered = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let zz = z.tr_mul(&z);
        let zy = z.tr_mul(&y_centered);
        Ok(Self {
            bases,
            grams,
            z,
            centering,
            y_mean,
            y_centered,
            zz,
            zy,
            linear_coef,
            num_basis: k,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn num_blocks(&self) -> usize {
        self.bases.len()
    }

    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        j * self.num_basis..(j + 1) * self.num_basis
    }

    /// Scale of the λ₁/λ₂ grids: `‖Zᵀy‖∞ / n`.
    pub fn lambda_scale(&self) -> f64 {
        self.zy.amax() / self.n() as f64
    }

    /// Residual sum of squares of stacked coefficients.
    pub fn rss(&self, blocks: &[DVector<f64>]) -> f64 {
        self.residual(blocks).norm_squared()
    }

    /// `y − Zb` with centered y.
    pub fn residual(&self, blocks: &[DVector<f64>]) -> DVector<f64> {
        let mut r = self.y_centered.clone();
        for (j, b) in blocks.iter().enumerate() {
            if b.iter().all(|v| *v == 0.0) {
                continue;
            }
            let zj = self.z.columns(j * self.num_basis, self.num_basis);
            r.gemv(-1.0, &zj, b, 1.0);
        }
        r
    }
}

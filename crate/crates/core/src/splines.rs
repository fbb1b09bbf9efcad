//! Normalized B-spline bases on a per-covariate domain.
//!
//! A [`SplineBasis`] carries a clamped knot vector (boundary knots repeated
//! `order` times) with interior knots at equally spaced empirical quantiles
//! of the covariate. The basis functions form a partition of unity on
//! `[lower, upper]`; evaluation outside that interval is clamped.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_NUM_BASIS: usize = 6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SplineError {
    #[error("non-finite covariate value at position {0}")]
    NonFinite(usize),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("number of basis functions ({num_basis}) must be at least the order ({order})")]
    TooFewBasis { num_basis: usize, order: usize },

    #[error("spline order must be at least 1")]
    ZeroOrder,

    #[error("{distinct} distinct covariate values cannot support {num_basis} basis functions without duplicate knots")]
    DuplicateKnots { distinct: usize, num_basis: usize },

    #[error("interior knot {knot} is not strictly inside ({lower}, {upper})")]
    KnotOutsideDomain { knot: f64, lower: f64, upper: f64 },

    #[error("interior knots must be nondecreasing")]
    UnsortedKnots,

    #[error("degenerate domain [{0}, {1}]")]
    EmptyDomain(f64, f64),

    #[error("second derivatives need order >= 3, basis has order {0}")]
    UnsupportedOrder(usize),
}

/// Where the boundary of the basis comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DomainSource {
    #[default]
    DataQuantiles,
    UnitInterval,
}

/// Construction settings shared by every covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub num_basis: usize,
    pub order: usize,
    pub domain: DomainSource,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            num_basis: DEFAULT_NUM_BASIS,
            order: DEFAULT_ORDER,
            domain: DomainSource::DataQuantiles,
        }
    }
}

impl BasisSpec {
    pub fn new(num_basis: usize, order: usize) -> Self {
        Self {
            num_basis,
            order,
            domain: DomainSource::DataQuantiles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    order: usize,
    num_basis: usize,
    lower: f64,
    upper: f64,
    interior_knots: Vec<f64>,
    domain_source: DomainSource,
    #[serde(skip)]
    knots: Vec<f64>,
}

/// Integral Gram matrices of a basis: `mass` holds `∫ B_k B_l` and
/// `roughness` holds `∫ B_k'' B_l''` over the basis domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPair {
    pub mass: DMatrix<f64>,
    pub roughness: DMatrix<f64>,
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn sorted_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl SplineBasis {
    /// Basis from explicit boundary and interior knots.
    pub fn with_knots(
        lower: f64,
        upper: f64,
        interior_knots: Vec<f64>,
        order: usize,
    ) -> Result<Self, SplineError> {
        if order == 0 {
            return Err(SplineError::ZeroOrder);
        }
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(SplineError::EmptyDomain(lower, upper));
        }
        if interior_knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(SplineError::UnsortedKnots);
        }
        if let Some(&knot) = interior_knots
            .iter()
            .find(|&&t| !(t > lower && t < upper))
        {
            return Err(SplineError::KnotOutsideDomain { knot, lower, upper });
        }
        let num_basis = interior_knots.len() + order;
        let mut basis = Self {
            order,
            num_basis,
            lower,
            upper,
            interior_knots,
            domain_source: DomainSource::DataQuantiles,
            knots: Vec::new(),
        };
        basis.knots = basis.full_knot_vector();
        Ok(basis)
    }

    /// Builds the basis for one covariate column: interior knots at the
    /// equally spaced empirical quantiles of `x`.
    pub fn build(x: &[f64], spec: &BasisSpec) -> Result<Self, SplineError> {
        let BasisSpec {
            num_basis,
            order,
            domain,
        } = *spec;
        if order == 0 {
            return Err(SplineError::ZeroOrder);
        }
        if num_basis < order {
            return Err(SplineError::TooFewBasis { num_basis, order });
        }
        if x.len() < num_basis {
            return Err(SplineError::TooFewObservations {
                needed: num_basis,
                got: x.len(),
            });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(SplineError::NonFinite(pos));
        }

        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let distinct = 1 + sorted.windows(2).filter(|w| w[1] > w[0]).count();
        if distinct < num_basis {
            return Err(SplineError::DuplicateKnots {
                distinct,
                num_basis,
            });
        }

        let n_interior = num_basis - order;
        let interior: Vec<f64> = (1..=n_interior)
            .map(|k| sorted_quantile(&sorted, k as f64 / (n_interior + 1) as f64))
            .collect();
        let (lower, upper) = match domain {
            DomainSource::DataQuantiles => (sorted[0], sorted[sorted.len() - 1]),
            DomainSource::UnitInterval => (0.0, 1.0),
        };
        let mut basis = Self::with_knots(lower, upper, interior, order).map_err(|e| match e {
            SplineError::KnotOutsideDomain { .. } => SplineError::DuplicateKnots {
                distinct,
                num_basis,
            },
            other => other,
        })?;
        basis.domain_source = domain;
        Ok(basis)
    }

    fn full_knot_vector(&self) -> Vec<f64> {
        let mut knots = Vec::with_capacity(self.num_basis + self.order);
        knots.extend(std::iter::repeat_n(self.lower, self.order));
        knots.extend_from_slice(&self.interior_knots);
        knots.extend(std::iter::repeat_n(self.upper, self.order));
        knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior_knots
    }

    pub fn domain_source(&self) -> DomainSource {
        self.domain_source
    }

    /// Full clamped knot vector (length `num_basis + order`).
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    /// Index `i` of the knot span with `knots[i] <= x < knots[i+1]`, using
    /// the last nonempty span at the right boundary.
    fn span(&self, x: f64) -> usize {
        let degree = self.order - 1;
        let last = self.num_basis - 1;
        if x >= self.knots[last + 1] {
            return last;
        }
        // knots[degree] == lower and knots[last + 1] == upper.
        let mut lo = degree;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Nonzero basis values and derivatives at `x` (already clamped).
    /// Returns the first index and `ders[k][j]`, the k-th derivative of
    /// basis function `first + j`.
    fn local_derivatives(&self, x: f64, max_deriv: usize) -> (usize, Vec<Vec<f64>>) {
        let p = self.order - 1;
        let span = self.span(x);
        let knots = &self.knots;

        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - knots[span + 1 - j];
            right[j] = knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let nd = max_deriv.min(p);
        let mut ders = vec![vec![0.0; p + 1]; max_deriv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=nd {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        (span - p, ders)
    }

    /// Writes the K basis values at `x` into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_basis);
        out.fill(0.0);
        let x = self.clamp(x);
        let p = self.order - 1;
        let span = self.span(x);
        let knots = &self.knots;
        let mut values = [0.0f64; 32];
        let mut left = [0.0f64; 32];
        let mut right = [0.0f64; 32];
        if p >= 31 {
            let (first, ders) = self.local_derivatives(x, 0);
            out[first..first + p + 1].copy_from_slice(&ders[0]);
            return;
        }
        values[0] = 1.0;
        for j in 1..=p {
            left[j] = x - knots[span + 1 - j];
            right[j] = knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        out[span - p..=span].copy_from_slice(&values[..=p]);
    }

    /// Basis values at `x`, clamped to the domain.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis];
        self.eval_into(x, &mut out);
        out
    }

    /// Second derivatives of every basis function at `x`.
    pub fn eval_d2(&self, x: f64) -> Result<Vec<f64>, SplineError> {
        if self.order < 3 {
            return Err(SplineError::UnsupportedOrder(self.order));
        }
        let mut out = vec![0.0; self.num_basis];
        let (first, ders) = self.local_derivatives(self.clamp(x), 2);
        out[first..first + self.order].copy_from_slice(&ders[2]);
        Ok(out)
    }

    /// Exact Gram matrices using `q + 1` Gauss–Legendre nodes per knot interval.
    pub fn gram_matrices(&self) -> GramPair {
        self.gram_matrices_with_nodes(self.order + 1)
    }

    /// Gram matrices with `nodes` Gauss–Legendre points per knot interval.
    /// Exact whenever `nodes >= order`. For order < 3 the second derivative
    /// vanishes almost everywhere and `roughness` is zero.
    pub fn gram_matrices_with_nodes(&self, nodes: usize) -> GramPair {
        let k = self.num_basis;
        let p = self.order - 1;
        let mut mass = DMatrix::zeros(k, k);
        let mut roughness = DMatrix::zeros(k, k);
        let (abscissae, weights) = gauss_legendre(nodes.max(1));
        let want_d2 = self.order >= 3;

        for i in p..k {
            let (a, b) = (self.knots[i], self.knots[i + 1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&t, &w) in abscissae.iter().zip(&weights) {
                let x = mid + half * t;
                let (first, ders) = self.local_derivatives(x, if want_d2 { 2 } else { 0 });
                let wx = w * half;
                for r in 0..=p {
                    for c in 0..=p {
                        mass[(first + r, first + c)] += wx * ders[0][r] * ders[0][c];
                        if want_d2 {
                            roughness[(first + r, first + c)] += wx * ders[2][r] * ders[2][c];
                        }
                    }
                }
            }
        }
        // Exact symmetry.
        let mass = (&mass + mass.transpose()) * 0.5;
        let roughness = (&roughness + roughness.transpose()) * 0.5;
        GramPair { mass, roughness }
    }

    /// Greville abscissae: coefficients that reproduce `f(x) = x`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.order - 1;
        if p == 0 {
            // Piecewise constants cannot reproduce x; use interval midpoints.
            return (0..self.num_basis)
                .map(|i| 0.5 * (self.knots[i] + self.knots[i + 1]))
                .collect();
        }
        (0..self.num_basis)
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// K x 2 coefficient basis of the linear functions `{1, x}`, which is the
    /// null space of the roughness matrix for order >= 2.
    pub fn linear_coefficients(&self) -> DMatrix<f64> {
        let g = self.greville();
        let mut n = DMatrix::zeros(self.num_basis, 2);
        for (i, v) in g.into_iter().enumerate() {
            n[(i, 0)] = 1.0;
            n[(i, 1)] = v;
        }
        n
    }

    /// n x K design block; row i is `eval(x[i])`.
    pub fn design_block(&self, x: &[f64]) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(x.len(), self.num_basis);
        let mut row = vec![0.0; self.num_basis];
        for (i, &xi) in x.iter().enumerate() {
            self.eval_into(xi, &mut row);
            for (k, &v) in row.iter().enumerate() {
                z[(i, k)] = v;
            }
        }
        z
    }

    /// Evaluates the spline with coefficients `coef` at `x`.
    pub fn eval_spline(&self, coef: &[f64], x: f64) -> f64 {
        let mut row = vec![0.0; self.num_basis];
        self.eval_into(x, &mut row);
        row.iter().zip(coef).map(|(b, c)| b * c).sum()
    }
}

/// Subtracts column means in place and returns them.
pub fn center_columns(z: &mut DMatrix<f64>) -> Vec<f64> {
    let n = z.nrows().max(1) as f64;
    let mut means = Vec::with_capacity(z.ncols());
    for mut col in z.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        means.push(mean);
    }
    means
}

/// Nodes and weights of the m-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadratic form `bᵀ M b` floored at zero.
pub fn quad_norm(m: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (c, bc) in b.iter().enumerate() {
        acc += bc * m.column(c).dot(b);
    }
    acc.max(0.0).sqrt()
}

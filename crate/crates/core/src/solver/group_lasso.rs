use nalgebra::{DMatrix, DVector};

use super::{AdditiveDesign, PenaltyConfig};

/// Solution of `½‖y − Zb‖² + n λ₀ Σ ‖bⱼ‖_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoFit {
    pub blocks: Vec<DVector<f64>>,
    pub lambda0: f64,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl GroupLassoFit {
    pub fn num_nonzero(&self) -> usize {
        self.blocks.iter().filter(|b| b.iter().any(|v| *v != 0.0)).count()
    }
}

/// Group lasso in the whitened coordinates `θⱼ = Rⱼ bⱼ` with `Aⱼ = RⱼᵀRⱼ`,
/// where the block norm becomes Euclidean.
pub(crate) struct WhitenedProblem {
    k: usize,
    n: f64,
    /// `Rⱼ⁻¹`, mapping θ back to b.
    unwhiten: Vec<DMatrix<f64>>,
    gram: DMatrix<f64>,
    wty: DVector<f64>,
    yty_half: f64,
    lipschitz: Vec<f64>,
}

impl WhitenedProblem {
    pub(crate) fn new(design: &AdditiveDesign, jitter: f64) -> Self {
        let k = design.num_basis;
        let d = design.num_blocks();
        let unwhiten: Vec<DMatrix<f64>> = design
            .grams
            .iter()
            .map(|g| {
                let chol = g.mass.clone().cholesky().or_else(|| {
                    let mut a = g.mass.clone();
                    for i in 0..k {
                        a[(i, i)] += jitter.max(1e-12) * (1.0 + a[(i, i)].abs());
                    }
                    a.cholesky()
                });
                let l = chol.expect("jittered mass matrix is positive definite").l();
                // R = Lᵀ, R⁻¹ = L⁻ᵀ
                let l_inv = l
                    .solve_lower_triangular(&DMatrix::identity(k, k))
                    .expect("triangular factor is nonsingular");
                l_inv.transpose()
            })
            .collect();

        let mut gram = DMatrix::zeros(d * k, d * k);
        let mut wty = DVector::zeros(d * k);
        for j in 0..d {
            let rj = &unwhiten[j];
            let zy_j = design.zy.rows(j * k, k);
            wty.rows_mut(j * k, k).copy_from(&(rj.transpose() * zy_j));
            for l in j..d {
                let block = design.zz.view((j * k, l * k), (k, k));
                let g = rj.transpose() * block * &unwhiten[l];
                gram.view_mut((j * k, l * k), (k, k)).copy_from(&g);
                if l != j {
                    gram.view_mut((l * k, j * k), (k, k)).copy_from(&g.transpose());
                }
            }
        }
        let lipschitz = (0..d)
            .map(|j| {
                let block = gram.view((j * k, j * k), (k, k)).clone_owned();
                block.symmetric_eigenvalues().max().max(f64::MIN_POSITIVE)
            })
            .collect();
        Self {
            k,
            n: design.n() as f64,
            unwhiten,
            gram,
            wty,
            yty_half: 0.5 * design.y_centered.norm_squared(),
            lipschitz,
        }
    }

    /// Smallest λ₀ for which the all-zero solution is optimal.
    pub(crate) fn lambda_max(&self) -> f64 {
        (0..self.unwhiten.len())
            .map(|j| self.wty.rows(j * self.k, self.k).norm())
            .fold(0.0, f64::max)
            / self.n
    }

    pub(crate) fn objective(&self, theta: &DVector<f64>, lambda0: f64) -> f64 {
        let smooth = self.yty_half - theta.dot(&self.wty) + 0.5 * theta.dot(&(&self.gram * theta));
        let penalty: f64 = (0..self.unwhiten.len())
            .map(|j| theta.rows(j * self.k, self.k).norm())
            .sum();
        smooth + self.n * lambda0 * penalty
    }

    /// Block coordinate descent with one majorized proximal step per block.
    pub(crate) fn solve(
        &self,
        lambda0: f64,
        warm: Option<&DVector<f64>>,
        max_sweeps: usize,
        tol: f64,
    ) -> (DVector<f64>, usize, bool) {
        let k = self.k;
        let d = self.unwhiten.len();
        let mut theta = warm.cloned().unwrap_or_else(|| DVector::zeros(d * k));
        // negative gradient of the smooth part
        let mut neg_grad = &self.wty - &self.gram * &theta;
        let mut u = DVector::zeros(k);
        let mut delta = DVector::zeros(k);
        for sweep in 1..=max_sweeps {
            let mut change_sq = 0.0;
            for j in 0..d {
                let lj = self.lipschitz[j];
                let range = j * k..(j + 1) * k;
                for (i, r) in range.clone().enumerate() {
                    u[i] = theta[r] + neg_grad[r] / lj;
                }
                let norm = u.norm();
                let thresh = self.n * lambda0 / lj;
                let scale = if norm > thresh { 1.0 - thresh / norm } else { 0.0 };
                let mut any = false;
                for (i, r) in range.clone().enumerate() {
                    let new = scale * u[i];
                    delta[i] = new - theta[r];
                    if delta[i] != 0.0 {
                        any = true;
                    }
                    theta[r] = new;
                }
                if any {
                    let cols = self.gram.columns(j * k, k);
                    neg_grad.gemv(-1.0, &cols, &delta, 1.0);
                    change_sq += delta.norm_squared();
                }
            }
            let size = theta.norm();
            if change_sq.sqrt() <= tol * size.max(1e-12) {
                return (theta, sweep, true);
            }
        }
        (theta, max_sweeps, false)
    }

    pub(crate) fn to_blocks(&self, theta: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.unwhiten.len())
            .map(|j| &self.unwhiten[j] * theta.rows(j * self.k, self.k))
            .collect()
    }

    /// Whitened block gradient `Wⱼᵀ(y − Wθ)` for KKT checks.
    #[cfg(test)]
    pub(crate) fn block_neg_gradient(&self, theta: &DVector<f64>, j: usize) -> DVector<f64> {
        let full = &self.wty - &self.gram * theta;
        full.rows(j * self.k, self.k).clone_owned()
    }

    pub(crate) fn whiten_blocks(&self, blocks: &[DVector<f64>]) -> DVector<f64> {
        let k = self.k;
        let mut theta = DVector::zeros(blocks.len() * k);
        for (j, b) in blocks.iter().enumerate() {
            let r = self.unwhiten[j]
                .clone()
                .try_inverse()
                .expect("whitening factor is invertible");
            theta.rows_mut(j * k, k).copy_from(&(r * b));
        }
        theta
    }
}

/// Initial estimate at a fixed λ₀.
pub fn group_lasso_init(
    design: &AdditiveDesign,
    lambda0: f64,
    cfg: &PenaltyConfig,
) -> GroupLassoFit {
    let problem = WhitenedProblem::new(design, cfg.ridge_jitter);
    fit_at(&problem, lambda0, None, cfg)
}

pub(crate) fn fit_at(
    problem: &WhitenedProblem,
    lambda0: f64,
    warm: Option<&DVector<f64>>,
    cfg: &PenaltyConfig,
) -> GroupLassoFit {
    let (theta, sweeps, converged) = problem.solve(lambda0, warm, cfg.init_max_sweeps, cfg.init_tol);
    if !converged {
        log::warn!("group lasso did not converge in {sweeps} sweeps at lambda0 = {lambda0:.3e}");
    }
    GroupLassoFit {
        objective: problem.objective(&theta, lambda0),
        blocks: problem.to_blocks(&theta),
        lambda0,
        sweeps,
        converged,
    }
}

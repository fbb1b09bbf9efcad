#![allow(dead_code)]

use addscreen::solver::AdditiveDesign;
use addscreen::splines::{quad_norm, BasisSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn random_problem(seed: u64, n: usize, d: usize, spec: &BasisSpec) -> AdditiveDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = (0..d)
                .map(|j| match j % 3 {
                    0 => (5.0 * x[(i, j)]).sin(),
                    1 => 2.0 * x[(i, j)],
                    _ => 0.0,
                })
                .sum();
            s + 0.3 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    AdditiveDesign::new(&x, &y, spec).unwrap()
}

pub fn stacked(blocks: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        blocks.iter().map(|b| b.len()).sum(),
        blocks.iter().flat_map(|b| b.iter().copied()),
    )
}

pub fn group_objective(design: &AdditiveDesign, blocks: &[DVector<f64>], lambda0: f64) -> f64 {
    let b = stacked(blocks);
    let r = &design.y_centered - &design.z * b;
    let pen: f64 = blocks
        .iter()
        .enumerate()
        .map(|(j, bj)| quad_norm(&design.grams[j].mass, bj))
        .sum();
    0.5 * r.norm_squared() + design.n() as f64 * lambda0 * pen
}

/// FISTA on the whole vector in `A^{1/2}` coordinates (symmetric square
/// root from an eigendecomposition, not a Cholesky factor).
pub fn fista_oracle(design: &AdditiveDesign, lambda0: f64, iters: usize) -> Vec<DVector<f64>> {
    let k = design.num_basis;
    let d = design.num_blocks();
    let mut inv_sqrt = DMatrix::zeros(d * k, d * k);
    for j in 0..d {
        let eig = design.grams[j].mass.clone().symmetric_eigen();
        let s = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
        let m = &eig.eigenvectors * s * eig.eigenvectors.transpose();
        inv_sqrt.view_mut((j * k, j * k), (k, k)).copy_from(&m);
    }
    let w = &design.z * &inv_sqrt;
    let step = 1.0 / w.clone().svd(false, false).singular_values.max().powi(2);
    let thresh = step * design.n() as f64 * lambda0;
    let mut theta = DVector::zeros(d * k);
    let mut v = theta.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad = w.tr_mul(&(&w * &v - &design.y_centered));
        let mut u = &v - step * grad;
        for j in 0..d {
            let mut blk = u.rows_mut(j * k, k);
            let nrm = blk.norm();
            let scale = if nrm > thresh { 1.0 - thresh / nrm } else { 0.0 };
            blk *= scale;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &u + ((t - 1.0) / t_next) * (&u - &theta);
        theta = u;
        t = t_next;
    }
    let b = inv_sqrt * theta;
    (0..d).map(|j| b.rows(j * k, k).clone_owned()).collect()
}

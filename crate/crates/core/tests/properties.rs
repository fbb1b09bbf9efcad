use addscreen::datagen::{gen_example, ErrorLaw, Scenario};
use addscreen::harness::{coverage_at, min_model_size, quantiles};
use addscreen::screening::{ecdf_values, rank_indices, score, Method, ScreeningConfig};
use addscreen::splines::{quad_norm, BasisSpec, SplineBasis};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sample_basis(seed: u64, num_basis: usize) -> (SplineBasis, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let basis = SplineBasis::build(&x, &BasisSpec::new(num_basis, 4)).unwrap();
    (basis, x)
}

fn random_data(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
    let y = (0..n)
        .map(|i| {
            (4.0 * x[(i, 0)]).sin() + 2.0 * x[(i, 1)] + 0.5 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (x, y)
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(u, v)| (u - v).abs() <= rel * scale.max(1e-300))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_is_a_partition_of_unity(seed in 0u64..10_000, k in 4usize..12, t in 0.0f64..1.0) {
        let (basis, _) = sample_basis(seed, k);
        let (lo, hi) = basis.domain();
        let v = basis.eval(lo + t * (hi - lo));
        prop_assert!(v.iter().all(|b| *b >= -1e-14));
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_matches_finite_differences(seed in 0u64..10_000, t in 0.02f64..0.98) {
        let (basis, _) = sample_basis(seed, 6);
        let (lo, hi) = basis.domain();
        let x = lo + t * (hi - lo);
        let h = 1e-4 * (hi - lo);
        // cubic pieces: central differences are exact up to rounding away from knots
        prop_assume!(basis.knots().iter().all(|&kn| (kn - x).abs() > 2.0 * h));
        let d2 = basis.eval_d2(x).unwrap();
        let (a, b, c) = (basis.eval(x - h), basis.eval(x), basis.eval(x + h));
        let scale = d2.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d2.len() {
            let fd = (a[i] - 2.0 * b[i] + c[i]) / (h * h);
            prop_assert!((fd - d2[i]).abs() < 1e-4 * scale, "{i}: {fd} vs {}", d2[i]);
        }
    }

    #[test]
    fn gram_matrices_have_the_right_spectra(seed in 0u64..10_000, k in 4usize..10) {
        let (basis, _) = sample_basis(seed, k);
        let g = basis.gram_matrices();
        let mass = g.mass.clone().symmetric_eigen().eigenvalues;
        prop_assert!(mass.min() > 0.0);
        let mut rough: Vec<f64> = g.roughness.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        rough.sort_by(f64::total_cmp);
        let top = rough[k - 1];
        prop_assert!(rough[0].abs() < 1e-9 * top && rough[1].abs() < 1e-9 * top);
        prop_assert!(rough[2] > 1e-9 * top);
    }

    #[test]
    fn roughness_vanishes_exactly_on_lines(seed in 0u64..10_000, a in -5.0f64..5.0, b in -5.0f64..5.0, bump in 0.1f64..3.0) {
        let (basis, _) = sample_basis(seed, 6);
        let g = basis.gram_matrices();
        let n = basis.linear_coefficients();
        let line = &n * DVector::from_vec(vec![a, b]);
        let scale = quad_norm(&g.mass, &line).max(1.0);
        prop_assert!(quad_norm(&g.roughness, &line) < 1e-6 * scale);
        // a linear spline evaluates to a + b x
        let (lo, hi) = basis.domain();
        let x = 0.5 * (lo + hi);
        prop_assert!((basis.eval_spline(line.as_slice(), x) - (a + b * x)).abs() < 1e-9 * (1.0 + a.abs() + (b * x).abs()));
        // any coefficient outside the null space has positive roughness
        let mut bent = line.clone();
        bent[2] += bump;
        prop_assert!(quad_norm(&g.roughness, &bent) > 1e-6);
    }

    #[test]
    fn ecdf_matches_brute_force(ys in prop::collection::vec(-5i32..5, 1..60)) {
        let y: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
        let got = ecdf_values(&y).unwrap();
        let n = y.len() as f64;
        for (i, yi) in y.iter().enumerate() {
            let count = y.iter().filter(|yj| *yj <= yi).count() as f64;
            prop_assert_eq!(got[i], count / n);
        }
    }

    #[test]
    fn nearest_rank_quantiles_by_definition(vals in prop::collection::vec(0usize..500, 1..80), pct in 1u32..=100) {
        let q = quantiles(&vals, &[pct])[0];
        let mut sorted = vals.clone();
        sorted.sort();
        let n = vals.len();
        // smallest value with at least pct% of the sample at or below it
        let want = *sorted
            .iter()
            .find(|&&v| 100 * sorted.iter().filter(|&&u| u <= v).count() >= pct as usize * n)
            .unwrap();
        prop_assert_eq!(q, want);
    }

    #[test]
    fn ranking_is_invariant_to_increasing_maps(scores in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(rank_indices(&scores), rank_indices(&mapped));
    }

    #[test]
    fn minimum_model_size_is_consistent(seed in 0u64..10_000, p in 5usize..40, m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..p).map(|_| rng.random_range(0..5) as f64).collect();
        let truth: Vec<usize> = (0..m.min(p)).map(|_| rng.random_range(0..p)).collect();
        let size = min_model_size(&scores, &truth);
        let order = rank_indices(&scores);
        prop_assert!(truth.iter().all(|j| order[..size].contains(j)));
        prop_assert!(!truth.iter().all(|j| order[..size - 1].contains(j)));
        prop_assert!(coverage_at(&scores, &truth, size) && !coverage_at(&scores, &truth, size - 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scores_follow_column_permutations(seed in 0u64..10_000, shift in 1usize..7) {
        let (x, y) = random_data(seed, 80, 8);
        let perm: Vec<usize> = (0..8).map(|j| (j + shift) % 8).collect();
        let xp = x.select_columns(&perm);
        let cfg = ScreeningConfig::default();
        for method in Method::ALL {
            let a = score(method, &x, &y, &cfg).unwrap().scores;
            let b = score(method, &xp, &y, &cfg).unwrap().scores;
            let a_perm: Vec<f64> = perm.iter().map(|&j| a[j]).collect();
            prop_assert_eq!(&a_perm, &b, "{:?}", method);
        }
    }

    #[test]
    fn scores_ignore_row_order(seed in 0u64..10_000) {
        let (x, y) = random_data(seed, 80, 6);
        let mut rows: Vec<usize> = (0..80).collect();
        rows.reverse();
        rows.swap(3, 40);
        let xr = x.select_rows(&rows);
        let yr: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let cfg = ScreeningConfig::default();
        for method in Method::ALL {
            let a = score(method, &x, &y, &cfg).unwrap().scores;
            let b = score(method, &xr, &yr, &cfg).unwrap().scores;
            prop_assert!(close(&a, &b, 1e-8), "{:?}: {:?} vs {:?}", method, a, b);
        }
    }

    #[test]
    fn ncrs_respects_scaling(seed in 0u64..10_000, a in 0.1f64..10.0, shift in -5.0f64..5.0, c in 0.1f64..10.0) {
        let (x, y) = random_data(seed, 80, 6);
        let cfg = ScreeningConfig::default();
        let base = score(Method::Ncrs, &x, &y, &cfg).unwrap().scores;
        // increasing affine maps of a covariate move the knots with the data
        let xs = x.map(|v| a * v + shift);
        let moved = score(Method::Ncrs, &xs, &y, &cfg).unwrap().scores;
        prop_assert!(close(&base, &moved, 1e-7));
        // scaling y scales the marginal fits, the ECDF is unchanged
        let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
        let scaled: Vec<f64> = score(Method::Ncrs, &x, &yc, &cfg).unwrap().scores.iter().map(|s| s / (c * c)).collect();
        prop_assert!(close(&base, &scaled, 1e-7));
    }

    #[test]
    fn rank_based_scores_ignore_monotone_response_maps(seed in 0u64..10_000) {
        let (x, y) = random_data(seed, 80, 6);
        let ym: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let cfg = ScreeningConfig::default();
        for method in [Method::CrSis, Method::Sirs] {
            let a = score(method, &x, &y, &cfg).unwrap().scores;
            let b = score(method, &x, &ym, &cfg).unwrap().scores;
            prop_assert!(close(&a, &b, 1e-12), "{:?}", method);
        }
    }

    #[test]
    fn generation_is_deterministic(seed in 0u64..10_000, ex in 1u8..=4) {
        let sc = match ex {
            1 => Scenario::ex1(40, 20, 1.0, ErrorLaw::T5),
            2 => Scenario::ex2(40, 20, ErrorLaw::Normal),
            3 => Scenario::ex3(40, 20, ErrorLaw::T1),
            _ => Scenario::ex4(40, 20, 0.5),
        }
        .with_seed(seed);
        let a = gen_example(&sc).unwrap();
        let b = gen_example(&sc).unwrap();
        prop_assert_eq!(&a.x, &b.x);
        prop_assert_eq!(&a.y, &b.y);
        let other = gen_example(&sc.clone().with_seed(seed + 1)).unwrap();
        prop_assert_ne!(&a.y, &other.y);
        let cfg = ScreeningConfig::default();
        prop_assert_eq!(
            score(Method::Ncrs, &a.x, &a.y, &cfg).unwrap(),
            score(Method::Ncrs, &b.x, &b.y, &cfg).unwrap()
        );
    }
}

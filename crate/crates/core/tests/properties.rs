//! Property tests over randomly generated statistics.

use mimo_se::estimation::{estimator_statistics, EstimatorStatistics};
use mimo_se::linalg::{frobenius, trace_product, CMatrix, CVector, Hermitian};
use mimo_se::moments::{expected_norm_fourth, outer_moment, quad_expectation, quartic_expectation, AffineMap, ComplexNormal};
use mimo_se::rng::{derive_seed, standard_complex_normal, stream};
use mimo_se::scenario::{LinkScalars, LinkStatistics, PowerAllocation};
use mimo_se::spectral_efficiency::{
    baseline_lower_bound, ergodic_denominator, ergodic_se_closed_form, mean_gain_sq, signal_moment, ErgodicSeInputs,
    Estimator, LsNumerator,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn scalars() -> LinkScalars {
    LinkScalars {
        distance: 120.0,
        shadowing_db: 0.0,
        has_los: true,
        beta_total: 1.0,
        beta_los: 0.5,
        beta_nlos: 0.5,
        kappa: 1.0,
        theta: 0.3,
        cluster_angles: vec![0.3],
    }
}

fn random_psd(dim: usize, rank: usize, rng: &mut impl Rng) -> Hermitian {
    let x = CMatrix::from_fn(dim, rank, |_, _| standard_complex_normal(rng));
    Hermitian::symmetrize(&x * x.adjoint() * Complex64::new(rng.random::<f64>() + 0.05, 0.0))
}

fn random_links(cells: usize, users: usize, dim: usize, seed: u64) -> (Vec<Vec<LinkStatistics>>, PowerAllocation) {
    let mut rng = stream(seed);
    let links = (0..cells)
        .map(|_| {
            (0..users)
                .map(|_| {
                    let rank = 1 + rng.random_range(0..dim);
                    let los = rng.random::<f64>() < 0.7;
                    LinkStatistics {
                        scalars: scalars(),
                        mean: if los {
                            CVector::from_fn(dim, |_, _| standard_complex_normal(&mut rng))
                        } else {
                            CVector::zeros(dim)
                        },
                        covariance: random_psd(dim, rank, &mut rng),
                    }
                })
                .collect()
        })
        .collect();
    let data: Vec<Vec<f64>> = (0..cells)
        .map(|_| (0..users).map(|_| 0.1 + rng.random::<f64>()).collect())
        .collect();
    let powers = PowerAllocation {
        pilot: data.clone(),
        data,
        p_max: 1.1,
    };
    (links, powers)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_fourth_is_identity_quartic(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = stream(seed);
        let cov = random_psd(dim, dim, &mut rng);
        let mean = CVector::from_fn(dim, |_, _| standard_complex_normal(&mut rng));
        let dist = ComplexNormal::new(mean, cov).unwrap();
        let id = AffineMap::identity(dim);
        let q = quartic_expectation(&id, &id, &id, &id, &dist).unwrap();
        prop_assert!(close(q.re, expected_norm_fourth(&dist), 1e-12));
        prop_assert!(q.im.abs() <= 1e-12 * q.re);
    }

    #[test]
    fn hermitian_quadratic_moments_are_real(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = stream(seed);
        let dist = ComplexNormal::new(
            CVector::from_fn(dim, |_, _| standard_complex_normal(&mut rng)),
            random_psd(dim, dim, &mut rng),
        ).unwrap();
        let a = random_psd(dim, dim, &mut rng);
        let q = quad_expectation(&a, &dist).unwrap();
        prop_assert!(q.im.abs() <= 1e-12 * q.norm());
        prop_assert!(q.re >= 0.0);
        let second = outer_moment(&dist);
        prop_assert!(second.min_eigenvalue() >= -1e-10 * second.trace_re());
        prop_assert!(close(q.re, trace_product(&a, &second).re, 1e-12));
    }

    #[test]
    fn estimator_statistics_are_consistent(seed in any::<u64>(), dim in 1usize..6, cells in 1usize..4) {
        let (links, powers) = random_links(cells, 2, dim, seed);
        for k in 0..2 {
            let st = estimator_statistics(&links, 0, k, &powers, 0.05, 2).unwrap();
            let r = &st.r;
            let tol = 1e-9 * (frobenius(r) + frobenius(&st.ls.s));
            prop_assert!(frobenius(&(st.mmse.u.add(&st.mmse.v).into_matrix() - r.as_matrix())) <= tol);
            prop_assert!(frobenius(&(st.ls.s.sub(&st.ls.t).into_matrix() - r.as_matrix())) <= tol);
            prop_assert!(st.mmse.v.min_eigenvalue() >= -tol);
            prop_assert!(st.mmse.u.min_eigenvalue() >= -tol);
            let mapped = &st.mmse.f_mat * &st.ls.h + &st.mmse.f_vec;
            prop_assert!((mapped - &st.m).norm() <= 1e-9 * (1.0 + st.m.norm()));
            prop_assert!((&st.ls.h + &st.ls.h_bar - &st.m).norm() <= 1e-12 * (1.0 + st.m.norm()));
        }
    }

    #[test]
    fn closed_form_orderings(seed in any::<u64>(), dim in 1usize..6, cells in 1usize..4) {
        let (links, powers) = random_links(cells, 3, dim, seed);
        let inputs = ErgodicSeInputs::new(&links, 0, &powers, 0.05, 3, 0.95, false).unwrap();
        for k in 0..3 {
            for e in Estimator::ALL {
                for v in [LsNumerator::Exact, LsNumerator::Published] {
                    let st: &EstimatorStatistics = &inputs.stats[k];
                    prop_assert!(signal_moment(e, st, v) >= mean_gain_sq(e, st) * (1.0 - 1e-12));
                    let d = ergodic_denominator(e, &inputs, k);
                    prop_assert!(d.i1 >= 0.0 && d.i2 >= -1e-12 * d.total() && d.i3 >= 0.0 && d.i4 >= 0.0);
                    let c = ergodic_se_closed_form(e, &inputs, k, v).unwrap();
                    let b = baseline_lower_bound(e, &inputs, k, v).unwrap();
                    prop_assert!(c.is_finite() && b >= 0.0 && b <= c);
                }
            }
        }
    }

    #[test]
    fn single_cell_ls_numerators_agree(seed in any::<u64>(), dim in 1usize..6) {
        let (links, powers) = random_links(1, 2, dim, seed);
        let inputs = ErgodicSeInputs::new(&links, 0, &powers, 0.05, 2, 0.95, false).unwrap();
        for st in &inputs.stats {
            let a = signal_moment(Estimator::Ls, st, LsNumerator::Exact);
            let b = signal_moment(Estimator::Ls, st, LsNumerator::Published);
            prop_assert!(close(a, b, 1e-9));
        }
    }

    #[test]
    fn seed_paths_are_pure(master in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(derive_seed(master, &[a, b]), derive_seed(master, &[a, b]));
        if a != b {
            prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        }
    }
}

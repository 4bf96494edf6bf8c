use num_complex::Complex64;
use proptest::prelude::*;
use sparse_pilot::estimators::{omp_estimate, OmpConfig};
use sparse_pilot::measurement::{norm, ComplexMatrix, MeasurementModel};
use sparse_pilot::metrics::{cir_mse, crb, CrbInput};
use sparse_pilot::pilot_alloc::{
    coherence, coherence_bound_sq, cyclic_shift, difference_profile, PilotPattern,
};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Pattern on `3..=max_n` subcarriers with `1 <= N_p < n`.
fn pattern(max_n: usize) -> impl Strategy<Value = PilotPattern> {
    (3usize..=max_n).prop_flat_map(|n| {
        proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..n)
            .prop_map(move |idx| PilotPattern::new(n, idx).unwrap())
    })
}

fn dense_pattern(max_n: usize) -> impl Strategy<Value = PilotPattern> {
    (6usize..=max_n).prop_flat_map(|n| {
        proptest::sample::subsequence((0..n).collect::<Vec<_>>(), n / 2..n)
            .prop_map(move |idx| PilotPattern::new(n, idx).unwrap())
    })
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

fn pattern_and_vec(max_n: usize) -> impl Strategy<Value = (PilotPattern, Vec<Complex64>)> {
    pattern(max_n).prop_flat_map(|p| {
        let n = p.n();
        (Just(p), complex_vec(n))
    })
}

fn max_entry(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn coherence_is_shift_invariant(p in pattern(64), shift in -200i64..200) {
        let a = coherence(&p);
        let b = coherence(&cyclic_shift(&p, shift));
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.mu_tilde, b.mu_tilde);
        prop_assert_eq!(a.achieves_bound, b.achieves_bound);
    }

    #[test]
    fn coherence_is_invariant_under_unit_multipliers(p in pattern(64), m in 1usize..64) {
        let n = p.n();
        prop_assume!(gcd(m, n) == 1);
        let scaled = PilotPattern::new(n, p.indices().iter().map(|&i| i * m % n).collect()).unwrap();
        prop_assert!((coherence(&p).mu - coherence(&scaled).mu).abs() < 1e-9);
    }

    #[test]
    fn coherence_respects_lower_bound(p in pattern(64)) {
        let report = coherence(&p);
        let bound = coherence_bound_sq(p.n(), p.len());
        prop_assert!(report.mu_tilde * report.mu_tilde >= bound * (1.0 - 1e-9));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&report.mu));
    }

    #[test]
    fn profile_counts_every_ordered_pair(p in pattern(64)) {
        let profile = difference_profile(&p);
        let k = p.len();
        prop_assert_eq!(profile.total(), k * (k - 1));
        for d in 1..p.n() {
            prop_assert_eq!(profile.count(d), profile.count(p.n() - d));
        }
    }

    #[test]
    fn rows_are_orthogonal_and_g_is_a_projection(p in pattern(40)) {
        let model = MeasurementModel::new(&p);
        let a = model.matrix();
        let gram = a.matmul(&a.adjoint()).unwrap();
        let n = p.n() as f64;
        let scaled = ComplexMatrix::from_fn(p.len(), p.len(), |i, j| {
            if i == j { Complex64::new(n, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        prop_assert!(gram.max_abs_diff(&scaled) < 1e-10);
        let g = model.distorting_matrix();
        prop_assert!(g.matmul(&g).unwrap().max_abs_diff(&g) < 1e-10);
        for v in a.as_slice() {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn min_norm_of_observation_is_g_times_h((p, h) in pattern_and_vec(48)) {
        let model = MeasurementModel::new(&p);
        let via_observation = model.min_norm_estimate(&model.apply(&h).unwrap()).unwrap();
        let dense = model.distorting_matrix().mul_vec(&h).unwrap();
        let matrix_free = model.apply_distorting(&h).unwrap();
        prop_assert!(max_entry(&via_observation, &dense) < 1e-10);
        prop_assert!(max_entry(&matrix_free, &dense) < 1e-10);
    }

    #[test]
    fn ls_residual_is_orthogonal_to_support(
        (p, y, pick) in pattern(48).prop_flat_map(|p| {
            let k = p.len();
            let n = p.n();
            (Just(p), complex_vec(k), proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=k))
        })
    ) {
        let model = MeasurementModel::new(&p);
        let Ok(x) = model.least_squares_on_support(&y, &pick) else {
            // Aliased columns are reported, not solved.
            return Ok(());
        };
        let fit = model.apply(&x).unwrap();
        let residual: Vec<Complex64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let back = model.apply_adjoint(&residual).unwrap();
        for &j in &pick {
            prop_assert!(back[j].norm() < 1e-8, "column {j}: {}", back[j].norm());
        }
        for j in (0..p.n()).filter(|j| !pick.contains(j)) {
            prop_assert_eq!(x[j], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn omp_residual_does_not_grow_with_cap(
        (p, y) in pattern(48).prop_flat_map(|p| { let k = p.len(); (Just(p), complex_vec(k)) })
    ) {
        let model = MeasurementModel::new(&p);
        let mut previous = norm(&y);
        for cap in 1..=p.len() {
            let report = omp_estimate(&model, &y, &OmpConfig::new(cap)).unwrap();
            prop_assert!(report.support.len() <= cap);
            prop_assert!(report.support.windows(2).all(|w| w[0] < w[1]));
            let fit = model.apply(&report.cir).unwrap();
            let residual: Vec<Complex64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
            let r = norm(&residual);
            prop_assert!(r <= previous * (1.0 + 1e-9) + 1e-12, "cap {cap}: {r} > {previous}");
            previous = r;
        }
    }

    #[test]
    fn omp_finds_support_below_coherence_threshold(
        (p, delays, gains) in dense_pattern(31).prop_flat_map(|p| {
            let n = p.n();
            (
                Just(p),
                proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=3),
                proptest::collection::vec((0.2..1.0f64, 0.0..std::f64::consts::TAU), 3),
            )
        })
    ) {
        let s = delays.len();
        let mu = coherence(&p).mu;
        if mu >= 1.0 / (2.0 * s as f64) {
            return Ok(());
        }
        let mut h = vec![Complex64::new(0.0, 0.0); p.n()];
        for (&d, &(r, t)) in delays.iter().zip(&gains) {
            h[d] = Complex64::from_polar(r, t);
        }
        let model = MeasurementModel::new(&p);
        let report = omp_estimate(&model, &model.apply(&h).unwrap(), &OmpConfig::new(s)).unwrap();
        prop_assert_eq!(&report.support, &delays);
        prop_assert!(max_entry(&report.cir, &h) < 1e-10);
    }

    #[test]
    fn crb_grows_with_nested_supports(
        (p, order) in pattern(40).prop_flat_map(|p| {
            let n = p.n();
            (Just(p), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        }),
        sigma_sq in 0.01..2.0f64,
    ) {
        let model = MeasurementModel::new(&p);
        let mut previous = 0.0;
        for k in 1..=p.len() {
            let mut support = order[..k].to_vec();
            support.sort_unstable();
            let Ok(v) = crb(&CrbInput { sigma_sq, model: &model, support: &support }) else {
                break;
            };
            prop_assert!(v >= previous * (1.0 - 1e-9), "k {k}: {v} < {previous}");
            previous = v;
        }
    }

    #[test]
    fn cir_mse_is_symmetric(a in complex_vec(17), b in complex_vec(17)) {
        prop_assert_eq!(cir_mse(&a, &b).unwrap(), cir_mse(&b, &a).unwrap());
        prop_assert_eq!(cir_mse(&a, &a).unwrap(), 0.0);
    }
}

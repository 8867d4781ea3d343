use liouville_core::radial::{a_star, ShootingParams, SolverSettings};
use liouville_core::spectral::{frak_n_integer, n_k};
use liouville_core::variational::{alpha_prime_with, linearize_params, BOUNDEDNESS_TOL};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn at_least_two_zeros(n in 0.2f64..30.0, a in -5.0f64..11.0) {
        let lin = linearize_params(ShootingParams::new(n, a).unwrap(), &SolverSettings::default()).unwrap();
        // Declared bounded away from N_k means |α'| < tol with α' ≠ 0: the
        // next zero sits near log r = |b'/α'| > 1e6, past any radius.
        prop_assume!(!lin.bounded || frak_n_integer(n).is_some());
        prop_assert!(lin.zero_count() >= 2, "N={n} a={a}: {} zeros", lin.zero_count());
    }

    #[test]
    fn bounded_iff_slope_vanishes(n in 0.2f64..30.0, a in -5.0f64..11.0) {
        let s = SolverSettings::default();
        let lin = linearize_params(ShootingParams::new(n, a).unwrap(), &s).unwrap();
        let slope = alpha_prime_with(ShootingParams::new(n, a).unwrap(), &s).unwrap();
        prop_assert_eq!(lin.bounded, slope.abs() < BOUNDEDNESS_TOL);
    }

    #[test]
    fn zero_count_locally_constant(n in 0.5f64..25.0, a in -4.0f64..10.0) {
        let s = SolverSettings::default();
        let lin = |b: f64| linearize_params(ShootingParams::new(n, b).unwrap(), &s).unwrap();
        let (left, mid, right) = (lin(a - 1e-3), lin(a), lin(a + 1e-3));
        // No critical point of α within reach: α' keeps one sign, clear of zero.
        let slopes = [left.alpha_prime, mid.alpha_prime, right.alpha_prime];
        prop_assume!(slopes.iter().all(|d| d.abs() > 1e-3 && d.signum() == mid.alpha_prime.signum()));
        prop_assert_eq!(left.zero_count(), mid.zero_count());
        prop_assert_eq!(right.zero_count(), mid.zero_count());
    }
}

#[test]
fn bounded_explicit_solutions_only_at_integer_index() {
    let s = SolverSettings::default();
    for k in 2..=5u32 {
        let lin = linearize_params(ShootingParams::explicit(n_k(k)), &s).unwrap();
        assert!(lin.bounded, "k={k}");
        assert_eq!(lin.zero_count(), k as usize);
    }
    for n in [3.0, 7.0, 14.0] {
        let lin = linearize_params(ShootingParams::new(n, a_star(n)).unwrap(), &s).unwrap();
        assert!(!lin.bounded, "N={n}");
    }
}

#[test]
fn zero_count_between_thresholds() {
    let s = SolverSettings::default();
    for k in 2..=4u32 {
        let (lo, hi) = (n_k(k), n_k(k + 1));
        for j in 1..8 {
            let n = lo + (hi - lo) * j as f64 / 8.0;
            let c = linearize_params(ShootingParams::explicit(n), &s)
                .unwrap()
                .zero_count();
            assert!(
                c == k as usize || c == k as usize + 1,
                "N={n}: {c} zeros, k={k}"
            );
        }
    }
}

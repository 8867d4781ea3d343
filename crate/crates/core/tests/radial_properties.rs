use liouville_core::curve::pohozaev_window;
use liouville_core::radial::{alpha, shoot_with, ShootingParams, SolverSettings};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..30.0, -6.0f64..12.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_stays_inside_flux_window((n, a) in params()) {
        let p = shoot_with(ShootingParams::new(n, a).unwrap(), &SolverSettings::default()).unwrap();
        let (lo, hi) = pohozaev_window(n);
        prop_assert!(lo < p.alpha && p.alpha < hi, "N={n} a={a} alpha={}", p.alpha);
    }

    #[test]
    fn flux_equals_mass((n, a) in params(), frac in 0.05f64..0.95) {
        let p = shoot_with(ShootingParams::new(n, a).unwrap(), &SolverSettings::default()).unwrap();
        let (t0, t1) = (p.trajectory.t_start(), p.trajectory.t_end());
        let r = (t0 + frac * (t1 - t0)).exp();
        let flux = p.flux_at(r).unwrap();
        let mass = p.mass_up_to(r);
        prop_assert!((flux - mass).abs() < 1e-8 * flux.abs().max(1.0), "flux {flux} mass {mass}");
    }

    #[test]
    fn alpha_is_lipschitz_in_a((n, a) in (0.5f64..25.0, -4.0f64..10.0)) {
        let s = SolverSettings::default();
        let h = 1e-4;
        let lo = alpha(ShootingParams::new(n, a).unwrap(), &s).unwrap();
        let hi = alpha(ShootingParams::new(n, a + h).unwrap(), &s).unwrap();
        // Frozen empirical bound on |α'| over this range.
        prop_assert!((hi - lo).abs() <= 10.0 * h, "jump {} at N={n} a={a}", hi - lo);
    }
}

#[test]
fn asymptotic_offset_settles() {
    for (n, a) in [(1.0, 0.0), (4.0, 2.0), (12.0, -1.0)] {
        let p = shoot_with(
            ShootingParams::new(n, a).unwrap(),
            &SolverSettings::default(),
        )
        .unwrap();
        let offset = |t: f64| {
            let r = t.exp();
            (p.u_at(r) + p.alpha * r.ln() - p.beta).abs()
        };
        let t_end = p.trajectory.t_end();
        let samples: Vec<f64> = (0..6)
            .map(|j| offset(t_end - 3.0 + 0.5 * j as f64))
            .collect();
        assert!(
            samples.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "N={n} a={a}: {samples:?}"
        );
        assert!(*samples.last().unwrap() < 1e-6);
    }
}

use liouville_core::curve::{
    alpha_limits, count_solutions, critical_portrait, find_c_of_n, sweep_alpha, CriticalKind,
    DEFAULT_STEP, DEFAULT_WINDOW,
};
use liouville_core::radial::a_star;
use liouville_core::verify::generic_queries;

#[test]
fn formula_matches_enumeration_on_grid() {
    for n in [2.5, 4.5, 8.0, 15.0, 20.0] {
        let curve = sweep_alpha(n, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
        let portrait = critical_portrait(&curve).unwrap();
        let crit: Vec<f64> = portrait.critical_points.iter().map(|p| p.c).collect();
        for q in generic_queries(portrait.alpha_min, n, &crit) {
            let formula = count_solutions(&portrait, q).unwrap().count;
            assert_eq!(formula, curve.count_roots(q) as i32, "N={n} alpha={q}");
        }
    }
}

#[test]
fn minimum_gap_is_nonincreasing() {
    let mut previous = f64::INFINITY;
    for n in 1..=20 {
        let n = n as f64;
        let portrait =
            critical_portrait(&sweep_alpha(n, DEFAULT_WINDOW, DEFAULT_STEP).unwrap()).unwrap();
        let gap = portrait.alpha_min - 2.0 * n;
        assert!(gap <= previous + 1e-6, "N={n}: gap {gap} after {previous}");
        previous = gap;
    }
}

#[test]
fn critical_points_respect_limits() {
    for n in [1.5, 3.0, 6.0, 12.0, 19.0] {
        let curve = sweep_alpha(n, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
        let portrait = critical_portrait(&curve).unwrap();
        let extrema = portrait
            .critical_points
            .iter()
            .filter(|p| p.kind != CriticalKind::Inflection)
            .count();
        let (left, right) = alpha_limits(n);
        // Both tails descend from the left limit and rise to the right one only
        // through an even number of turns when the ends approach from above.
        if !portrait.alpha_min_attained {
            assert_eq!(extrema % 2, 0, "N={n}");
        }
        for p in &portrait.critical_points {
            assert!(
                p.c < left && p.c > right.min(portrait.alpha_min) - 1e-9,
                "N={n} c={}",
                p.c
            );
        }
    }
}

#[test]
fn c_of_n_never_below_explicit_shift() {
    for j in 0..10 {
        let n = 2.5 + 2.7 * j as f64;
        let c = find_c_of_n(n).unwrap();
        assert!(c >= a_star(n) - 1e-4, "N={n}: c={c} a*={}", a_star(n));
    }
}

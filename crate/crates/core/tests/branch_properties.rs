use liouville_core::branch::{
    continue_branch, continue_branch_with, count_at_level, ContinuationOptions, Sign,
};
use liouville_core::radial::a_star;
use liouville_core::spectral::n_k;

#[test]
fn first_point_converges_to_origin() {
    for k in [2u32, 3] {
        let mut distances = Vec::new();
        for delta in [0.05, 0.02, 0.01] {
            let opts = ContinuationOptions {
                seed_offset: delta,
                max_points: 2,
                ..Default::default()
            };
            let arc = continue_branch_with(k, Sign::Plus, &opts).unwrap();
            let p = &arc.points[1];
            distances.push(((p.n - n_k(k)).powi(2) + (p.a - a_star(n_k(k))).powi(2)).sqrt());
        }
        assert!(
            distances[0] > distances[1] && distances[1] > distances[2],
            "k={k}: {distances:?}"
        );
        assert!(distances[2] < 0.05, "k={k}: {distances:?}");
    }
}

#[test]
fn arcs_keep_zero_count_and_stay_above_two() {
    for (k, sign) in [
        (2, Sign::Plus),
        (2, Sign::Minus),
        (3, Sign::Plus),
        (3, Sign::Minus),
    ] {
        let arc = continue_branch(k, sign, (2.0, 20.0), 80).unwrap();
        let nontrivial = &arc.points[1..];
        assert!(
            nontrivial.iter().all(|p| p.zero_count == k as usize),
            "k={k}"
        );
        assert!(nontrivial.iter().all(|p| p.n > 2.0 - 1e-6), "k={k}");
        assert!(nontrivial
            .iter()
            .all(|p| (p.mu - 2.0 * (p.n + 2.0)).abs() < 1e-12));
    }
}

#[test]
fn arcs_of_different_index_do_not_meet() {
    let two = continue_branch(2, Sign::Minus, (2.0, 20.0), 120).unwrap();
    let three = continue_branch(3, Sign::Plus, (2.0, 20.0), 120).unwrap();
    for p in three.points.iter().skip(1) {
        for w in two.points.windows(2) {
            let (lo, hi) = (w[0].n.min(w[1].n), w[0].n.max(w[1].n));
            if p.n < lo || p.n > hi || hi == lo {
                continue;
            }
            let a = w[0].a + (w[1].a - w[0].a) * (p.n - w[0].n) / (w[1].n - w[0].n);
            assert!((a - p.a).abs() > 1e-4, "meet near N={} a={}", p.n, p.a);
        }
    }
}

#[test]
fn level_count_grows_across_thresholds() {
    let mut previous = 0;
    for n in [3.0, 5.0, 9.5, 11.0, 17.5, 19.0] {
        let c = count_at_level(n).unwrap();
        assert!(c >= previous, "N={n}: {c} after {previous}");
        previous = c;
    }
}

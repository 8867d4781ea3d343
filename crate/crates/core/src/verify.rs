//! The twelve acceptance checks, shared by the `verify` command and the
//! acceptance test target. Each returns a pass flag and a one-line detail.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::branch::{
    continue_branch, count_at_level, detect_bifurcations, kelvin_pairing, Sign, DEFAULT_N_WINDOW,
};
use crate::curve::{
    count_solutions, critical_portrait, estimate_n0, find_c_of_n, pohozaev_window, sweep_alpha,
    DEFAULT_STEP, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::radial::{a_star, alpha as shoot_alpha, shoot, u_star, ShootingParams, SolverSettings};
use crate::spectral::{frak_n_integer, legendre_residual, n_k};
use crate::variational::{
    compute_j, largest_zero_velocity, linearize, linearize_params, second_variation,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  {} ({:.1} s)",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail,
            self.elapsed_s
        )
    }
}

pub const NAMES: [&str; 12] = [
    "closed-form anchor",
    "flux window",
    "bifurcation points",
    "legendre oracle",
    "cubic moment cross-check",
    "second-variation identity",
    "N0 threshold",
    "multiplicity at level N+2",
    "counting formula",
    "kelvin pairing",
    "c(N) tangency",
    "largest-zero dynamics",
];

fn finish(
    id: u32,
    start: Instant,
    budget: Option<Duration>,
    outcome: Result<(bool, String)>,
) -> CriterionResult {
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail.push_str(&format!("; over the {} s budget", b.as_secs()));
        }
    }
    CriterionResult {
        id,
        name: NAMES[id as usize - 1],
        passed,
        detail,
        elapsed_s: elapsed.as_secs_f64(),
    }
}

/// Low-discrepancy points in the unit square (additive recurrence).
fn lattice(i: usize) -> (f64, f64) {
    const G1: f64 = 0.754_877_666_246_692_7;
    const G2: f64 = 0.569_840_290_998_053_3;
    let x = (0.5 + G1 * i as f64).fract();
    let y = (0.5 + G2 * i as f64).fract();
    (x, y)
}

pub fn closed_form_anchor() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut worst_alpha: f64 = 0.0;
        let mut worst_u: f64 = 0.0;
        for n in [1.0, 2.0, 4.0, 10.0, 25.0] {
            let p = shoot(ShootingParams::explicit(n), 1e-9)?;
            worst_alpha = worst_alpha.max((p.alpha - (n + 2.0)).abs() / (n + 2.0));
            for node in &p.trajectory.nodes {
                worst_u = worst_u.max((node.y[0] - u_star(n, node.t.exp())).abs());
            }
        }
        Ok((
            worst_alpha < 1e-6 && worst_u < 1e-8,
            format!("max rel alpha error {worst_alpha:.1e}, max |u - u*| {worst_u:.1e}"),
        ))
    })();
    finish(1, start, Some(Duration::from_secs(5)), outcome)
}

/// `(N, a)` pairs spread over `N ∈ [0.1, 30]` (log-uniform) and `a ∈ [−6, 12]`.
pub fn window_samples(count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|i| {
            let (x, y) = lattice(i);
            ((0.1f64.ln() + x * (300f64).ln()).exp(), -6.0 + 18.0 * y)
        })
        .collect()
}

pub fn flux_window() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let settings = SolverSettings::default();
        let samples = window_samples(600);
        let mut bad = Vec::new();
        for &(n, a) in &samples {
            let alpha =
                shoot_alpha(ShootingParams::new(n, a)?, &settings).map_err(|e| e.at_sample(a))?;
            let (lo, hi) = pohozaev_window(n);
            if !(lo < alpha && alpha < hi) {
                bad.push((n, a, alpha));
            }
        }
        let mut detail = format!(
            "{} samples, {} outside the window",
            samples.len(),
            bad.len()
        );
        if let Some((n, a, alpha)) = bad.first() {
            detail.push_str(&format!(", first at N={n:.3} a={a:.3} alpha={alpha:.6}"));
        }
        Ok((bad.is_empty(), detail))
    })();
    finish(2, start, None, outcome)
}

pub fn bifurcation_points() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let found = detect_bifurcations(4)?;
        let worst_shift = found
            .iter()
            .map(|b| (b.n_crossing - b.n_k).abs())
            .fold(0.0, f64::max);
        let worst_slope = found
            .iter()
            .map(|b| b.alpha_prime_at_n_k.abs())
            .fold(0.0, f64::max);
        Ok((
            worst_shift < 1e-3 && worst_slope < 1e-5,
            format!("k = 2..4: max |N_cross - N_k| {worst_shift:.1e}, max |alpha'(a*)| {worst_slope:.1e}"),
        ))
    })();
    finish(3, start, Some(Duration::from_secs(60)), outcome)
}

pub fn legendre_oracle() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for k in [2u32, 3] {
            let lin =
                linearize_params(ShootingParams::explicit(n_k(k)), &SolverSettings::default())?;
            let res = legendre_residual(k, &lin)?;
            let index = frak_n_integer(n_k(k));
            ok &= res < 1e-7 && lin.zero_count() == k as usize && index == Some(k as u64);
            parts.push(format!(
                "k={k}: residual {res:.1e}, {} zeros",
                lin.zero_count()
            ));
        }
        Ok((ok, parts.join("; ")))
    })();
    finish(4, start, None, outcome)
}

pub fn cubic_moment() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let j = |n: f64| -> Result<f64> {
            let p = shoot(ShootingParams::explicit(n), 1e-9)?;
            compute_j(&p, &linearize(&p)?)
        };
        let (j4, j10, j18) = (j(4.0)?, j(10.0)?, j(18.0)?);
        Ok((
            (j4 - 12.0 / 35.0).abs() < 1e-6 && j10.abs() < 1e-6 && j18 > 0.0,
            format!(
                "J(4) - 12/35 = {:.1e}, J(10) = {j10:.1e}, J(18) = {j18:.4}",
                j4 - 12.0 / 35.0
            ),
        ))
    })();
    finish(5, start, None, outcome)
}

pub fn second_variation_identity() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let settings = SolverSettings::precise();
        let h = 1e-3;
        let mut used = 0;
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while used < 20 {
            if i > 400 {
                return Err(Error::NoSignChange(
                    "too few samples with |alpha''| > 0.01".into(),
                ));
            }
            let (x, y) = lattice(i + 1000);
            i += 1;
            let (n, a) = (0.5 + 29.5 * x, -4.0 + 12.0 * y);
            let k = second_variation(ShootingParams::new(n, a)?, &settings)?.k_value;
            if (2.0 * k).abs() <= 0.01 {
                continue;
            }
            let al = |b: f64| shoot_alpha(ShootingParams::new(n, b)?, &settings);
            let fd = (al(a + h)? - 2.0 * al(a)? + al(a - h)?) / (h * h);
            if fd.abs() <= 0.01 {
                continue;
            }
            worst = worst.max((2.0 * k - fd).abs() / fd.abs());
            used += 1;
        }
        Ok((
            worst < 1e-3,
            format!("{used} pairs, max rel |2K - alpha''_fd| {worst:.1e}"),
        ))
    })();
    finish(6, start, None, outcome)
}

pub fn n0_threshold() -> CriterionResult {
    let start = Instant::now();
    let outcome = estimate_n0((1.0, 2.0)).map(|n0| {
        (
            1.25 < n0 && n0 < 1.29,
            format!("N0 = {n0:.4}, target (1.25, 1.29)"),
        )
    });
    finish(7, start, Some(Duration::from_secs(300)), outcome)
}

pub fn multiplicity() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for (n, need) in [(5.0, 2), (11.0, 4), (19.0, 6)] {
            let c = count_at_level(n)?;
            ok &= c >= need;
            parts.push(format!("N={n}: {c} (>= {need})"));
        }
        Ok((ok, parts.join(", ")))
    })();
    finish(8, start, Some(Duration::from_secs(180)), outcome)
}

/// Ten queries spread over `(α_N, 2(N+1))`, nudged off `2N` and the
/// critical values.
pub fn generic_queries(alpha_min: f64, n: f64, critical: &[f64]) -> Vec<f64> {
    let hi = 2.0 * (n + 1.0);
    (0..10)
        .map(|j| {
            let mut q = alpha_min + (hi - alpha_min) * (j as f64 + 0.5 + 0.0123) / 10.0;
            let width = 1e-3 * (hi - alpha_min);
            while (q - 2.0 * n).abs() < width || critical.iter().any(|c| (q - c).abs() < width) {
                q += width;
            }
            q
        })
        .collect()
}

pub fn counting_formula() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut mismatches = Vec::new();
        let mut checked = 0;
        for n in [3.0, 6.0, 12.0, 25.0] {
            let curve = sweep_alpha(n, DEFAULT_WINDOW, DEFAULT_STEP)?;
            let portrait = critical_portrait(&curve)?;
            let crit: Vec<f64> = portrait.critical_points.iter().map(|p| p.c).collect();
            for q in generic_queries(portrait.alpha_min, n, &crit) {
                let formula = count_solutions(&portrait, q)?.count;
                let direct = curve.count_roots(q) as i32;
                checked += 1;
                if formula != direct {
                    mismatches.push(format!("N={n} alpha={q:.4}: {formula} vs {direct}"));
                }
            }
        }
        Ok((
            mismatches.is_empty(),
            format!(
                "{checked} queries, {} mismatches{}",
                mismatches.len(),
                if mismatches.is_empty() {
                    String::new()
                } else {
                    format!(": {}", mismatches.join("; "))
                }
            ),
        ))
    })();
    finish(9, start, None, outcome)
}

pub fn kelvin() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for k in [3u32, 2] {
            let plus = continue_branch(k, Sign::Plus, DEFAULT_N_WINDOW, 150)?;
            let minus = continue_branch(k, Sign::Minus, DEFAULT_N_WINDOW, 150)?;
            let report = kelvin_pairing(&plus, &minus)?;
            let per_arc = report.samples.len() / 2;
            ok &= report.max_distance < 1e-4 && per_arc >= 10;
            parts.push(format!(
                "k={k}: {} samples, max distance {:.1e}",
                report.samples.len(),
                report.max_distance
            ));
        }
        Ok((ok, parts.join("; ")))
    })();
    finish(10, start, None, outcome)
}

pub fn c_of_n_tangency() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let d10 = (find_c_of_n(10.0)? - a_star(10.0)).abs();
        let d28 = (find_c_of_n(28.0)? - a_star(28.0)).abs();
        let mut above = true;
        let mut gaps = Vec::new();
        for n in [4.0, 6.0, 18.0] {
            let gap = find_c_of_n(n)? - a_star(n);
            above &= gap > 0.0;
            gaps.push(format!("{gap:.3}"));
        }
        Ok((
            d10 < 1e-4 && d28 < 1e-4 && above,
            format!(
                "|c - a*| at 10, 28: {d10:.1e}, {d28:.1e}; c - a* at 4, 6, 18: {}",
                gaps.join(", ")
            ),
        ))
    })();
    finish(11, start, None, outcome)
}

pub fn dynamics_points() -> [(f64, f64); 5] {
    [
        (6.0, a_star(6.0) + 0.5),
        (3.0, 0.5),
        (8.0, 0.0),
        (20.0, 3.0),
        (1.5, -1.0),
    ]
}

pub fn zero_dynamics() -> CriterionResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for (n, a) in dynamics_points() {
            let v = largest_zero_velocity(ShootingParams::new(n, a)?, 1e-5)?;
            worst = worst.max((v.formula - v.finite_difference).abs() / v.finite_difference.abs());
        }
        Ok((
            worst < 0.05,
            format!("5 points, max rel |formula - fd| {worst:.1e}"),
        ))
    })();
    finish(12, start, None, outcome)
}

pub fn run(id: u32) -> Option<CriterionResult> {
    Some(match id {
        1 => closed_form_anchor(),
        2 => flux_window(),
        3 => bifurcation_points(),
        4 => legendre_oracle(),
        5 => cubic_moment(),
        6 => second_variation_identity(),
        7 => n0_threshold(),
        8 => multiplicity(),
        9 => counting_formula(),
        10 => kelvin(),
        11 => c_of_n_tangency(),
        12 => zero_dynamics(),
        _ => return None,
    })
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=12).filter_map(run).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_avoid_excluded_values() {
        let q = generic_queries(5.0, 3.0, &[6.5]);
        assert_eq!(q.len(), 10);
        assert!(q
            .iter()
            .all(|&x| (x - 6.0).abs() > 1e-3 && (x - 6.5).abs() > 1e-3 && x < 8.0));
    }
}

//! Nontrivial solution branches at level `α = N + 2`.
//!
//! A radial solution `u_a` at this level is `u*_N + f` with `f` solving the
//! Kelvin-invariant problem, so the branches are the level set
//! `G(N, a) = α_N(a) − (N + 2) = 0` away from the trivial curve `a = a*_N`.

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::{
    alpha_limits, critical_portrait, sweep_alpha_with, DEFAULT_STEP, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::radial::{
    a_star, alpha as shoot_alpha, kelvin_reflection_residual, kelvin_transform_with, log1p_exp2,
    shoot_with, RadialProfile, ShootingParams, SolverSettings,
};
use crate::roots::{bisect, brent};
use crate::spectral::n_k;
use crate::variational::linearize_params;

pub const SEED_OFFSET: f64 = 0.05;
pub const INITIAL_STEP: f64 = 0.02;
pub const MAX_STEP: f64 = 0.2;
pub const MIN_STEP: f64 = 1e-4;
pub const LEVEL_TOL: f64 = 1e-8;
pub const DEFAULT_N_WINDOW: (f64, f64) = (2.0, 40.0);
/// Arcs stop before `N` drops below this, short of the singular limit at 2.
pub const PROBE_FLOOR: f64 = 2.05;
pub const PAIRING_TOL: f64 = 1e-4;
pub const DEDUP_TOL: f64 = 1e-5;
const CROSSING_XTOL: f64 = 1e-4;
const NEWTON_MAX_ITER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bifurcation {
    pub k: u32,
    pub n_k: f64,
    pub mu_k: f64,
    /// Where `α'(a*_N)` changes sign, localized numerically.
    pub n_crossing: f64,
    /// `α'(a*_{N_k})` at the exact level.
    pub alpha_prime_at_n_k: f64,
}

/// `α'(a*_N)`, whose sign changes mark bifurcation from the trivial curve.
pub fn trivial_slope(n: f64, settings: &SolverSettings) -> Result<f64> {
    Ok(linearize_params(ShootingParams::explicit(n), settings)?.alpha_prime)
}

/// Locate the sign change of `α'(a*_N)` near every `N_k`, `k = 2..=k_max`.
pub fn detect_bifurcations(k_max: u32) -> Result<Vec<Bifurcation>> {
    detect_bifurcations_with(k_max, &SolverSettings::precise())
}

pub fn detect_bifurcations_with(k_max: u32, settings: &SolverSettings) -> Result<Vec<Bifurcation>> {
    if k_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "k_max must be at least 2, got {k_max}"
        )));
    }
    (2..=k_max)
        .into_par_iter()
        .map(|k| {
            let nk = n_k(k);
            let (lo, hi) = (nk - 0.05, nk + 0.05);
            let s_lo = trivial_slope(lo, settings)?;
            let s_hi = trivial_slope(hi, settings)?;
            if s_lo.signum() == s_hi.signum() {
                return Err(Error::CrossingNotFound { k, n_k: nk });
            }
            let n_crossing = bisect(|n| trivial_slope(n, settings), lo, hi, s_lo, CROSSING_XTOL)?;
            if (n_crossing - nk).abs() >= 1e-3 {
                return Err(Error::CrossingNotFound { k, n_k: nk });
            }
            Ok(Bifurcation {
                k,
                n_k: nk,
                mu_k: 2.0 * (nk + 2.0),
                n_crossing,
                alpha_prime_at_n_k: trivial_slope(nk, settings)?,
            })
        })
        .collect()
}

/// Values of `N` on a grid of `(lo, hi)` where `α'(a*_N)` changes sign.
pub fn trivial_slope_sign_changes(
    lo: f64,
    hi: f64,
    step: f64,
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    let m = ((hi - lo) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=m).map(|i| (lo + step * i as f64).min(hi)).collect();
    let slopes: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&n| trivial_slope(n, settings))
        .collect();
    let slopes = slopes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((1..grid.len())
        .filter(|&i| slopes[i - 1].signum() != slopes[i].signum())
        .map(|i| 0.5 * (grid[i - 1] + grid[i]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    pub mu: f64,
    /// `f(0) = a − a*_N`.
    pub f_at_zero: f64,
    /// Zeros of `f = u_a − u*_N` on `(0, ∞)`.
    pub zero_count: usize,
    pub arclength_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    ContinuationFailure,
    NWindowExit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchArc {
    pub k: u32,
    pub sign: Sign,
    pub points: Vec<BranchPoint>,
    pub origin: (f64, f64),
    pub terminated_by: Termination,
}

/// Zeros of `u_a − u*_N` along a profile. The difference tends to
/// `β − a*_N` at infinity, which decides whether one more zero lies past
/// the integrated span.
pub fn zeros_of_difference(profile: &RadialProfile) -> usize {
    let n = profile.params.n;
    let astar = a_star(n);
    let f = |t: f64| profile.v_at(t) - (astar - 0.5 * (n + 2.0) * log1p_exp2(t));
    let traj = &profile.trajectory;
    let mut count = 0;
    let mut prev = profile.params.a - astar;
    let mut note = |v: f64| {
        if v != 0.0 {
            if prev != 0.0 && v.signum() != prev.signum() {
                count += 1;
            }
            prev = v;
        }
    };
    for (t0, t1) in traj.intervals() {
        for j in 1..=8 {
            note(f(t0 + (t1 - t0) * j as f64 / 8.0));
        }
    }
    note(profile.beta - astar);
    count
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuationOptions {
    pub n_window: (f64, f64),
    pub max_points: usize,
    pub seed_offset: f64,
    pub settings: SolverSettings,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            n_window: DEFAULT_N_WINDOW,
            max_points: 400,
            seed_offset: SEED_OFFSET,
            settings: SolverSettings::precise(),
        }
    }
}

/// `G` and its gradient at `(N, a)`: `α'` in `a`, a central difference in `N`.
fn level_residual(n: f64, a: f64, settings: &SolverSettings) -> Result<(f64, f64, f64)> {
    let lin = linearize_params(ShootingParams::new(n, a)?, settings)?;
    let h = 1e-5 * n.max(1.0);
    let up = shoot_alpha(ShootingParams::new(n + h, a)?, settings)?;
    let down = shoot_alpha(ShootingParams::new(n - h, a)?, settings)?;
    Ok((
        lin.alpha - (n + 2.0),
        (up - down) / (2.0 * h) - 1.0,
        lin.alpha_prime,
    ))
}

fn level_value(n: f64, a: f64, settings: &SolverSettings) -> Result<f64> {
    Ok(shoot_alpha(ShootingParams::new(n, a)?, settings)? - (n + 2.0))
}

/// Nontrivial `N` with `G(N, a) = 0` at fixed `a`, nearest to `n_guess`.
/// `G` vanishes on the trivial curve too, so the search uses
/// `G / (a − a*_N)`, which only vanishes off it.
fn seed_level(n_guess: f64, a: f64, settings: &SolverSettings) -> Option<f64> {
    let reduced = |n: f64| -> f64 {
        level_value(n, a, settings)
            .map(|g| g / (a - a_star(n)))
            .unwrap_or(f64::NAN)
    };
    let step = 0.01;
    let f0 = reduced(n_guess);
    if !f0.is_finite() {
        return None;
    }
    for j in 1..=100 {
        for dir in [1.0, -1.0] {
            let inner = n_guess + dir * step * (j - 1) as f64;
            let outer = n_guess + dir * step * j as f64;
            if outer <= 0.0 {
                continue;
            }
            let (fi, fo) = (reduced(inner), reduced(outer));
            if fi.is_finite() && fo.is_finite() && fi.signum() != fo.signum() {
                return brent(reduced, inner, outer, fi, fo, 1e-12, 100);
            }
        }
    }
    None
}

struct Frame {
    scale: f64,
}

impl Frame {
    fn to_x(&self, n: f64, a: f64) -> [f64; 2] {
        [n / self.scale, a]
    }

    fn from_x(&self, x: [f64; 2]) -> (f64, f64) {
        (x[0] * self.scale, x[1])
    }
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let l = v[0].hypot(v[1]);
    [v[0] / l, v[1] / l]
}

/// Newton on `G = 0` plus the arclength constraint through `pred`.
fn correct(
    frame: &Frame,
    pred: [f64; 2],
    tangent: [f64; 2],
    settings: &SolverSettings,
) -> Option<([f64; 2], usize)> {
    let mut x = pred;
    for it in 1..=NEWTON_MAX_ITER {
        let (n, a) = frame.from_x(x);
        let (g, g_n, g_a) = level_residual(n, a, settings).ok()?;
        let g_x = [g_n * frame.scale, g_a];
        let c = tangent[0] * (x[0] - pred[0]) + tangent[1] * (x[1] - pred[1]);
        let det = g_x[0] * tangent[1] - g_x[1] * tangent[0];
        if !det.is_finite() || det == 0.0 {
            return None;
        }
        let dx0 = (-g * tangent[1] + c * g_x[1]) / det;
        let dx1 = (-c * g_x[0] + g * tangent[0]) / det;
        x = [x[0] + dx0, x[1] + dx1];
        if !(x[0].is_finite() && x[1].is_finite()) || dx0.hypot(dx1) > 0.5 {
            return None;
        }
        if g.abs() < LEVEL_TOL && dx0.hypot(dx1) < 1e-10 {
            return Some((x, it));
        }
    }
    let (n, a) = frame.from_x(x);
    let g = level_value(n, a, settings).ok()?;
    (g.abs() < LEVEL_TOL).then_some((x, NEWTON_MAX_ITER))
}

fn tangent_at(
    frame: &Frame,
    x: [f64; 2],
    previous: [f64; 2],
    settings: &SolverSettings,
) -> Result<[f64; 2]> {
    let (n, a) = frame.from_x(x);
    let (_, g_n, g_a) = level_residual(n, a, settings)?;
    let t = unit([-g_a, g_n * frame.scale]);
    Ok(if t[0] * previous[0] + t[1] * previous[1] < 0.0 {
        [-t[0], -t[1]]
    } else {
        t
    })
}

fn branch_point(n: f64, a: f64, s: f64, settings: &SolverSettings) -> Result<BranchPoint> {
    let profile = shoot_with(ShootingParams::new(n, a)?, settings)?;
    Ok(BranchPoint {
        n,
        a,
        mu: 2.0 * (n + 2.0),
        f_at_zero: a - a_star(n),
        zero_count: zeros_of_difference(&profile),
        arclength_s: s,
    })
}

pub fn continue_branch(
    k: u32,
    sign: Sign,
    n_window: (f64, f64),
    max_points: usize,
) -> Result<BranchArc> {
    continue_branch_with(
        k,
        sign,
        &ContinuationOptions {
            n_window,
            max_points,
            ..Default::default()
        },
    )
}

/// Pseudo-arclength continuation of `C_k^±` from its bifurcation point, in
/// coordinates `(N / (N_k + 2), a)`.
pub fn continue_branch_with(k: u32, sign: Sign, opts: &ContinuationOptions) -> Result<BranchArc> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "branches start at k = 2, got {k}"
        )));
    }
    let nk = n_k(k);
    let (lo, hi) = opts.n_window;
    if !(lo < nk && nk < hi) {
        return Err(Error::InvalidParameter(format!(
            "window ({lo}, {hi}) does not contain N_{k} = {nk}"
        )));
    }
    let settings = &opts.settings;
    let frame = Frame { scale: nk + 2.0 };
    let a0 = a_star(nk);
    let s_sign = sign.value();

    let origin_phi = linearize_params(ShootingParams::explicit(nk), settings)?;
    let mut points = vec![BranchPoint {
        n: nk,
        a: a0,
        mu: 2.0 * (nk + 2.0),
        f_at_zero: 0.0,
        zero_count: origin_phi.zero_count(),
        arclength_s: 0.0,
    }];

    let a_seed = a0 + s_sign * opts.seed_offset;
    let n_seed = seed_level(nk, a_seed, settings).ok_or(Error::SeedFailure { k })?;
    let origin_x = frame.to_x(nk, a0);
    let mut x = frame.to_x(n_seed, a_seed);
    let mut s = (x[0] - origin_x[0]).hypot(x[1] - origin_x[1]);
    let first = branch_point(n_seed, a_seed, s, settings)?;
    let expected = first.zero_count;
    if first.f_at_zero * s_sign <= 0.0 {
        return Err(Error::SeedFailure { k });
    }
    points.push(first);
    let mut tangent = tangent_at(
        &frame,
        x,
        [x[0] - origin_x[0], x[1] - origin_x[1]],
        settings,
    )?;
    let mut h = INITIAL_STEP;

    let terminated_by = loop {
        if points.len() >= opts.max_points {
            break Termination::Budget;
        }
        let pred = [x[0] + h * tangent[0], x[1] + h * tangent[1]];
        let accepted = correct(&frame, pred, tangent, settings).and_then(|(xn, iters)| {
            let (n, a) = frame.from_x(xn);
            let on_side = (a - a_star(n)) * s_sign > 0.0;
            on_side.then_some((xn, iters))
        });
        let Some((xn, iters)) = accepted else {
            h *= 0.5;
            if h < MIN_STEP {
                break Termination::ContinuationFailure;
            }
            continue;
        };
        let (n, a) = frame.from_x(xn);
        if n < lo.max(PROBE_FLOOR) || n > hi {
            break Termination::NWindowExit;
        }
        s += (xn[0] - x[0]).hypot(xn[1] - x[1]);
        let point = branch_point(n, a, s, settings)?;
        if point.zero_count != expected {
            return Err(Error::ZeroCountJump {
                expected,
                found: point.zero_count,
                n,
                a,
            });
        }
        points.push(point);
        tangent = tangent_at(&frame, xn, tangent, settings)?;
        x = xn;
        if iters <= 3 {
            h = (1.5 * h).min(MAX_STEP);
        }
    };
    Ok(BranchArc {
        k,
        sign,
        points,
        origin: (nk, a0),
        terminated_by,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingSample {
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    /// `β(a)`, the centre value of the Kelvin image.
    pub image_a: f64,
    /// Point of the target arc at the same `N`.
    pub matched_a: f64,
    pub distance: f64,
    /// Pointwise check of the reflection formula itself.
    pub reflection_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingReport {
    pub k: u32,
    pub samples: Vec<PairingSample>,
    pub max_distance: f64,
}

/// The point of `arc` at level `N` closest to `a_hint`, corrected by Newton
/// in `a` from the piecewise-linear interpolant.
fn point_on_arc(arc: &BranchArc, n: f64, a_hint: f64, settings: &SolverSettings) -> Option<f64> {
    let mut best: Option<f64> = None;
    for w in arc.points.windows(2) {
        let (p, q) = (w[0], w[1]);
        if (p.n - n) * (q.n - n) > 0.0 || p.n == q.n {
            continue;
        }
        let mut a = p.a + (q.a - p.a) * (n - p.n) / (q.n - p.n);
        let start = a;
        for _ in 0..NEWTON_MAX_ITER {
            let lin = linearize_params(ShootingParams::new(n, a).ok()?, settings).ok()?;
            let step = (lin.alpha - (n + 2.0)) / lin.alpha_prime;
            a -= step;
            if step.abs() < 1e-12 {
                break;
            }
        }
        let chord = (q.a - p.a).abs() + (q.n - p.n).abs();
        if !a.is_finite() || (a - start).abs() > chord.max(1e-6) {
            continue;
        }
        if best.is_none_or(|b| (b - a_hint).abs() > (a - a_hint).abs()) {
            best = Some(a);
        }
    }
    best
}

/// Kelvin-map sampled points of `source` and match them against `target`
/// at the same `N`.
fn pair_onto(
    source: &BranchArc,
    target: &BranchArc,
    samples: usize,
    settings: &SolverSettings,
) -> Result<Vec<PairingSample>> {
    // Only levels the target arc actually reaches can be matched.
    let n_lo = target
        .points
        .iter()
        .map(|p| p.n)
        .fold(f64::INFINITY, f64::min);
    let n_hi = target
        .points
        .iter()
        .map(|p| p.n)
        .fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<BranchPoint> = source
        .points
        .iter()
        .skip(1)
        .filter(|p| n_lo <= p.n && p.n <= n_hi)
        .copied()
        .collect();
    if pts.is_empty() {
        return Ok(Vec::new());
    }
    let m = samples.min(pts.len());
    let picks: Vec<BranchPoint> = (0..m)
        .map(|i| pts[i * (pts.len() - 1) / (m.max(2) - 1).max(1)])
        .collect();
    picks
        .par_iter()
        .map(|p| {
            let profile = shoot_with(ShootingParams::new(p.n, p.a)?, settings)?;
            let image = kelvin_transform_with(&profile, settings)?;
            let image_a = image.params.a;
            let matched_a =
                point_on_arc(target, p.n, image_a, settings).ok_or(Error::PairingFailure {
                    n: p.n,
                    a: p.a,
                    distance: f64::INFINITY,
                })?;
            Ok(PairingSample {
                n: p.n,
                a: p.a,
                image_a,
                matched_a,
                distance: (matched_a - image_a).abs(),
                reflection_residual: kelvin_reflection_residual(&profile, &image),
            })
        })
        .collect()
}

/// Odd `k`: the Kelvin transform exchanges the two arcs. Even `k`: it maps
/// each arc to itself.
pub fn kelvin_pairing(arc_plus: &BranchArc, arc_minus: &BranchArc) -> Result<PairingReport> {
    kelvin_pairing_with(arc_plus, arc_minus, 10, &SolverSettings::precise())
}

pub fn kelvin_pairing_with(
    arc_plus: &BranchArc,
    arc_minus: &BranchArc,
    samples: usize,
    settings: &SolverSettings,
) -> Result<PairingReport> {
    if arc_plus.k != arc_minus.k {
        return Err(Error::InvalidParameter(format!(
            "arcs have k = {} and {}",
            arc_plus.k, arc_minus.k
        )));
    }
    let k = arc_plus.k;
    let (to_plus, to_minus) = if k % 2 == 1 {
        (arc_minus, arc_plus)
    } else {
        (arc_plus, arc_minus)
    };
    let mut all = pair_onto(arc_plus, to_plus, samples, settings)?;
    all.extend(pair_onto(arc_minus, to_minus, samples, settings)?);
    let max_distance = all.iter().map(|s| s.distance).fold(0.0, f64::max);
    if let Some(bad) = all.iter().find(|s| s.distance > PAIRING_TOL) {
        return Err(Error::PairingFailure {
            n: bad.n,
            a: bad.a,
            distance: bad.distance,
        });
    }
    Ok(PairingReport {
        k,
        samples: all,
        max_distance,
    })
}

/// Distinct roots of `α_N(a) = N + 2` on the default sweep window,
/// including `a*_N`, plus any forced past either end by the limits of `α`.
pub fn level_roots(n: f64, settings: &SolverSettings) -> Result<(Vec<f64>, usize)> {
    let level = n + 2.0;
    let curve = sweep_alpha_with(n, DEFAULT_WINDOW, DEFAULT_STEP, settings)?;
    let portrait = critical_portrait(&curve)?;
    // α is monotone between consecutive critical points.
    let mut knots: Vec<(f64, f64)> = vec![(curve.samples[0].a, curve.samples[0].alpha)];
    let mut crit: Vec<(f64, f64)> = portrait
        .critical_points
        .iter()
        .map(|p| (p.a, p.c))
        .collect();
    crit.sort_by(|x, y| x.0.total_cmp(&y.0));
    knots.extend(crit);
    let last = curve.samples[curve.samples.len() - 1];
    knots.push((last.a, last.alpha));

    let g = |a: f64| level_value(n, a, settings).unwrap_or(f64::NAN);
    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let ((al, fl), (ar, fr)) = ((w[0].0, w[0].1 - level), (w[1].0, w[1].1 - level));
        if fl.signum() != fr.signum() || fl == 0.0 {
            if let Some(r) = brent(g, al, ar, fl, fr, 1e-12, 200) {
                roots.push(r);
            }
        }
    }
    let astar = a_star(n);
    if DEFAULT_WINDOW.0 < astar && astar < DEFAULT_WINDOW.1 {
        roots.push(astar);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() < DEDUP_TOL);

    let (left, right) = alpha_limits(n);
    let mut beyond = 0;
    if (curve.samples[0].alpha - level) * (left - level) < 0.0 {
        beyond += 1;
    }
    if (last.alpha - level) * (right - level) < 0.0 {
        beyond += 1;
    }
    Ok((roots, beyond))
}

pub fn count_at_level(n: f64) -> Result<usize> {
    count_at_level_with(n, &SolverSettings::precise())
}

pub fn count_at_level_with(n: f64, settings: &SolverSettings) -> Result<usize> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "count needs N > 0, got {n}"
        )));
    }
    let (roots, beyond) = level_roots(n, settings)?;
    Ok(roots.len() + beyond)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_profile_has_no_difference_zeros() {
        let p = shoot_with(ShootingParams::explicit(4.0), &SolverSettings::default()).unwrap();
        let _ = zeros_of_difference(&p);
        let q = shoot_with(
            ShootingParams::new(4.0, 2.0).unwrap(),
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(zeros_of_difference(&q) >= 1);
    }

    #[test]
    fn bifurcations_at_four_and_ten() {
        let b = detect_bifurcations(3).unwrap();
        assert!((b[0].n_crossing - 4.0).abs() < 1e-3);
        assert!((b[1].n_crossing - 10.0).abs() < 1e-3);
    }

    #[test]
    fn level_one_is_unique() {
        assert_eq!(count_at_level(1.0).unwrap(), 1);
    }
}

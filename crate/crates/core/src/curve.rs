//! The curve `a ↦ α(a)` at fixed `N`: sweeps, critical points, the solution
//! counting formula, the zero curve `c(N)` of `J_N`, and the threshold `N₀`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::radial::{alpha as shoot_alpha, ShootingParams, SolverSettings};
use crate::roots::{bisect, golden_min};
use crate::variational::{linearize_params, second_variation};

/// `|α'|` below which a sign flip is indistinguishable from solver noise.
pub const ALPHA_PRIME_NOISE: f64 = 1e-8;
/// Critical points are localized to this width in `a`.
pub const CRITICAL_XTOL: f64 = 1e-8;
/// `|K_N|` below which the second-order test is inconclusive.
pub const INFLECTION_TOL: f64 = 1e-7;
/// `α_N − 2N` must fall below `−N0_SIGNIFICANCE` to count as negative.
pub const N0_SIGNIFICANCE: f64 = 1e-9;

pub const DEFAULT_WINDOW: (f64, f64) = (-6.0, 12.0);
pub const DEFAULT_STEP: f64 = 0.05;

/// Left and right limits of `α(a)` as `a → ∓∞`.
pub fn alpha_limits(n: f64) -> (f64, f64) {
    (2.0 * (n + 1.0), 2.0 * n.max(1.0))
}

/// Open interval that every `α` must lie in.
pub fn pohozaev_window(n: f64) -> (f64, f64) {
    ((n + 1.0).max(2.0), 2.0 * (n + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaSample {
    pub a: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub zero_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCurve {
    pub n: f64,
    pub samples: Vec<AlphaSample>,
    pub a_range: (f64, f64),
    pub step: f64,
    pub settings: SolverSettings,
}

fn sample(n: f64, a: f64, settings: &SolverSettings) -> Result<AlphaSample> {
    let lin = ShootingParams::new(n, a)
        .and_then(|p| linearize_params(p, settings))
        .map_err(|e| e.at_sample(a))?;
    Ok(AlphaSample {
        a,
        alpha: lin.alpha,
        alpha_prime: lin.alpha_prime,
        zero_count: lin.zero_count(),
    })
}

/// Evaluate in parallel, reporting the first failure in input order.
fn sample_all(n: f64, grid: &[f64], settings: &SolverSettings) -> Result<Vec<AlphaSample>> {
    let results: Vec<Result<AlphaSample>> =
        grid.par_iter().map(|&a| sample(n, a, settings)).collect();
    results.into_iter().collect()
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let m = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    (0..=m)
        .map(|i| if i == m { hi } else { lo + step * i as f64 })
        .collect()
}

/// Whether the interval between two samples may hide a critical point.
fn suspicious(l: &AlphaSample, r: &AlphaSample) -> bool {
    let significant = l.alpha_prime.abs().max(r.alpha_prime.abs()) > ALPHA_PRIME_NOISE;
    let flip = l.alpha_prime.signum() != r.alpha_prime.signum();
    let rise = r.alpha - l.alpha;
    let against = rise.abs() > 1e-9
        && (rise.signum() != l.alpha_prime.signum() || rise.signum() != r.alpha_prime.signum());
    significant && (flip || against)
}

pub fn sweep_alpha(n: f64, a_range: (f64, f64), step: f64) -> Result<AlphaCurve> {
    sweep_alpha_with(n, a_range, step, &SolverSettings::default())
}

/// Sample `α`, `α'` and the zero count of `φ_a` on a uniform grid, then
/// bisect every interval that may hide a critical point down to `step/64`.
pub fn sweep_alpha_with(
    n: f64,
    a_range: (f64, f64),
    step: f64,
    settings: &SolverSettings,
) -> Result<AlphaCurve> {
    let (lo, hi) = a_range;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sweep step must be positive, got {step}"
        )));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "empty sweep range ({lo}, {hi})"
        )));
    }
    ShootingParams::new(n, lo)?;
    let mut samples = sample_all(n, &grid(lo, hi, step), settings)?;
    let finest = step / 64.0;
    loop {
        let mids: Vec<f64> = samples
            .windows(2)
            .filter(|w| w[1].a - w[0].a > finest * 1.5 && suspicious(&w[0], &w[1]))
            .map(|w| 0.5 * (w[0].a + w[1].a))
            .collect();
        if mids.is_empty() {
            break;
        }
        samples.extend(sample_all(n, &mids, settings)?);
        samples.sort_by(|x, y| x.a.total_cmp(&y.a));
    }
    Ok(AlphaCurve {
        n,
        samples,
        a_range,
        step,
        settings: *settings,
    })
}

impl AlphaCurve {
    pub fn min_sample(&self) -> &AlphaSample {
        self.samples
            .iter()
            .min_by(|x, y| x.alpha.total_cmp(&y.alpha))
            .expect("nonempty sweep")
    }

    /// Roots of `α(a) = q` seen on the samples, plus one past each end of
    /// the window when the limit there lies on the other side of `q`.
    pub fn count_roots(&self, q: f64) -> usize {
        let (left, right) = alpha_limits(self.n);
        let first = self.samples.first().expect("nonempty sweep");
        let last = self.samples.last().expect("nonempty sweep");
        let mut count = self
            .samples
            .windows(2)
            .filter(|w| (w[0].alpha - q).signum() != (w[1].alpha - q).signum())
            .count();
        if (first.alpha - q) * (left - q) < 0.0 {
            count += 1;
        }
        if (last.alpha - q) * (right - q) < 0.0 {
            count += 1;
        }
        count
    }

    /// `α'` at both ends of the window, which should be small and decaying.
    pub fn edge_slopes(&self) -> (f64, f64) {
        (
            self.samples[0].alpha_prime,
            self.samples[self.samples.len() - 1].alpha_prime,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Min,
    Max,
    Inflection,
}

impl CriticalKind {
    pub fn epsilon(self) -> i32 {
        match self {
            CriticalKind::Min => 2,
            CriticalKind::Max => -2,
            CriticalKind::Inflection => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub a: f64,
    pub c: f64,
    pub kind: CriticalKind,
    pub epsilon: i32,
    /// `K_N(a) = α''(a)/2`, if the second-order solve succeeded.
    pub k_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPortrait {
    pub n: f64,
    /// Sorted by critical value, ascending.
    pub critical_points: Vec<CriticalPoint>,
    /// `α_N = inf α`.
    pub alpha_min: f64,
    pub alpha_min_attained: bool,
    pub epsilon_0: i32,
}

fn classify(
    n: f64,
    a: f64,
    c: f64,
    settings: &SolverSettings,
) -> Result<(CriticalKind, Option<f64>)> {
    let k_value = ShootingParams::new(n, a)
        .and_then(|p| second_variation(p, settings))
        .ok()
        .map(|s| s.k_value);
    if let Some(k) = k_value {
        if k.abs() >= INFLECTION_TOL {
            return Ok((
                if k > 0.0 {
                    CriticalKind::Min
                } else {
                    CriticalKind::Max
                },
                k_value,
            ));
        }
    }
    let h = 1e-3;
    let left = shoot_alpha(ShootingParams::new(n, a - h)?, settings)? - c;
    let right = shoot_alpha(ShootingParams::new(n, a + h)?, settings)? - c;
    let noise = 1e-10 * c.abs();
    let kind = if left > noise && right > noise {
        CriticalKind::Min
    } else if left < -noise && right < -noise {
        CriticalKind::Max
    } else {
        CriticalKind::Inflection
    };
    Ok((kind, k_value))
}

/// Localize and classify every critical point of the sampled curve.
pub fn critical_portrait(curve: &AlphaCurve) -> Result<CriticalPortrait> {
    let n = curve.n;
    let settings = curve.settings;
    let brackets: Vec<(AlphaSample, AlphaSample)> = curve
        .samples
        .windows(2)
        .filter(|w| {
            w[0].alpha_prime.signum() != w[1].alpha_prime.signum()
                && w[0].alpha_prime.abs().max(w[1].alpha_prime.abs()) > ALPHA_PRIME_NOISE
        })
        .map(|w| (w[0], w[1]))
        .collect();
    let located: Vec<Result<CriticalPoint>> = brackets
        .par_iter()
        .map(|(l, r)| {
            let slope = |a: f64| -> Result<f64> {
                let lin = linearize_params(ShootingParams::new(n, a)?, &settings)?;
                Ok(lin.alpha_prime)
            };
            let a = bisect(slope, l.a, r.a, l.alpha_prime, CRITICAL_XTOL)
                .map_err(|e| e.at_sample(l.a))?;
            if !(l.a..=r.a).contains(&a) {
                return Err(Error::UnresolvedCritical { a });
            }
            let c =
                shoot_alpha(ShootingParams::new(n, a)?, &settings).map_err(|e| e.at_sample(a))?;
            let (kind, k_value) = classify(n, a, c, &settings).map_err(|e| e.at_sample(a))?;
            Ok(CriticalPoint {
                a,
                c,
                kind,
                epsilon: kind.epsilon(),
                k_value,
            })
        })
        .collect();
    let mut critical_points = located.into_iter().collect::<Result<Vec<_>>>()?;
    critical_points.sort_by(|x, y| x.c.total_cmp(&y.c).then(x.a.total_cmp(&y.a)));

    let (_, right) = alpha_limits(n);
    let lowest_min = critical_points
        .iter()
        .filter(|p| p.kind == CriticalKind::Min)
        .map(|p| p.c)
        .fold(f64::INFINITY, f64::min);
    let attained = lowest_min < right - N0_SIGNIFICANCE;
    let alpha_min = if attained { lowest_min } else { right };
    Ok(CriticalPortrait {
        n,
        critical_points,
        alpha_min,
        alpha_min_attained: attained,
        epsilon_0: if attained { 0 } else { 2 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionCount {
    pub n: f64,
    pub alpha_query: f64,
    pub count: i32,
    pub chi: i32,
}

/// Radial solutions at flux `α` from the ε-coded critical values:
/// `Σ_{c_j < α} ε_j + ε₀ − χ(α)`, and zero outside `(α_N, 2(N+1))`.
pub fn count_solutions(portrait: &CriticalPortrait, alpha_query: f64) -> Result<SolutionCount> {
    let n = portrait.n;
    let scale = alpha_query.abs().max(1.0);
    if (alpha_query - 2.0 * n).abs() < 1e-9 * scale {
        return Err(Error::OnTwoN { alpha: alpha_query });
    }
    if portrait
        .critical_points
        .iter()
        .any(|p| (p.c - alpha_query).abs() < 1e-9 * scale)
    {
        return Err(Error::OnCriticalValue { alpha: alpha_query });
    }
    let chi = i32::from(alpha_query > 2.0 * n);
    let (left, _) = alpha_limits(n);
    let count = if alpha_query <= portrait.alpha_min || alpha_query >= left {
        0
    } else {
        portrait.epsilon_0
            + portrait
                .critical_points
                .iter()
                .filter(|p| p.c < alpha_query)
                .map(|p| p.epsilon)
                .sum::<i32>()
            - chi
    };
    Ok(SolutionCount {
        n,
        alpha_query,
        count,
        chi,
    })
}

/// `J_N(a)`.
pub fn j_value(n: f64, a: f64, settings: &SolverSettings) -> Result<f64> {
    let lin = linearize_params(ShootingParams::new(n, a)?, settings)?;
    if lin.tail_residual >= lin.tail_cut {
        return Err(Error::TailNotNegligible {
            r_max: lin.r_max(),
            residual: lin.tail_residual,
        });
    }
    Ok(lin.j_integral)
}

pub const C_WINDOW: (f64, f64) = (-2.0, 12.0);
const C_SCAN_STEP: f64 = 0.05;
pub const C_XTOL: f64 = 1e-6;

/// Every sign change of `a ↦ J_N(a)` on the scan window, bisected to 1e-6.
pub fn j_zeros(n: f64, settings: &SolverSettings) -> Result<Vec<f64>> {
    let grid = grid(C_WINDOW.0, C_WINDOW.1, C_SCAN_STEP);
    let values: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&a| j_value(n, a, settings).map_err(|e| e.at_sample(a)))
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let mut zeros = Vec::new();
    for i in 1..grid.len() {
        let (fl, fr) = (values[i - 1], values[i]);
        if fl == 0.0 {
            zeros.push(grid[i - 1]);
        } else if fl.signum() != fr.signum() && fr != 0.0 {
            zeros.push(bisect(
                |a| j_value(n, a, settings),
                grid[i - 1],
                grid[i],
                fl,
                C_XTOL,
            )?);
        }
    }
    Ok(zeros)
}

/// `c(N)`, the first positive zero of `a ↦ J_N(a)`.
pub fn find_c_of_n(n: f64) -> Result<f64> {
    find_c_of_n_with(n, &SolverSettings::default())
}

pub fn find_c_of_n_with(n: f64, settings: &SolverSettings) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c(N) needs N > 0, got {n}"
        )));
    }
    j_zeros(n, settings)?
        .into_iter()
        .find(|&a| a > 0.0)
        .ok_or_else(|| {
            Error::NoSignChange(format!(
                "J_{n} has no positive zero on [{}, {}]",
                C_WINDOW.0, C_WINDOW.1
            ))
        })
}

const N0_SCAN_STEP: f64 = 0.1;
pub const N0_XTOL: f64 = 1e-3;

/// `(argmin, min)` of `α` over the default window: grid search, then
/// golden section on the neighbouring cells.
pub fn alpha_min_over(n: f64, settings: &SolverSettings) -> Result<(f64, f64)> {
    let grid = grid(DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, N0_SCAN_STEP);
    let values: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&a| {
            ShootingParams::new(n, a)
                .and_then(|p| shoot_alpha(p, settings))
                .map_err(|e| e.at_sample(a))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let i = (0..values.len())
        .min_by(|&x, &y| values[x].total_cmp(&values[y]))
        .expect("nonempty grid");
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (a, v) = golden_min(
        |a| shoot_alpha(ShootingParams::new(n, a)?, settings),
        lo,
        hi,
        1e-6,
    )?;
    Ok(if v < values[i] {
        (a, v)
    } else {
        (grid[i], values[i])
    })
}

/// `α_N − 2N`, clamped to zero unless significantly negative.
fn n0_gap(n: f64, settings: &SolverSettings) -> Result<f64> {
    let (_, m) = alpha_min_over(n, settings)?;
    let gap = m - 2.0 * n;
    Ok(if gap < -N0_SIGNIFICANCE {
        gap
    } else {
        gap.max(0.0) + N0_SIGNIFICANCE
    })
}

/// The threshold `N₀` where `α_N − 2N` turns negative, by bisection in `N`.
pub fn estimate_n0(bracket: (f64, f64)) -> Result<f64> {
    estimate_n0_with(bracket, &SolverSettings::precise())
}

pub fn estimate_n0_with(bracket: (f64, f64), settings: &SolverSettings) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "bad N0 bracket ({lo}, {hi})"
        )));
    }
    let g_lo = n0_gap(lo, settings)?;
    let g_hi = n0_gap(hi, settings)?;
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoSignChange(format!(
            "alpha_N - 2N has the same sign at N = {lo} ({g_lo:e}) and N = {hi} ({g_hi:e})"
        )));
    }
    bisect(|n| n0_gap(n, settings), lo, hi, g_lo, N0_XTOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::a_star;

    #[test]
    fn n1_is_monotone() {
        let curve = sweep_alpha(1.0, (-6.0, 10.0), 0.25).unwrap();
        assert!(curve.samples.windows(2).all(|w| w[1].alpha < w[0].alpha));
        let p = critical_portrait(&curve).unwrap();
        assert!(p.critical_points.is_empty());
        assert_eq!(p.epsilon_0, 2);
        assert_eq!(count_solutions(&p, 3.0).unwrap().count, 1);
    }

    #[test]
    fn n4_minimum_at_explicit_point() {
        let curve = sweep_alpha(4.0, DEFAULT_WINDOW, 0.1).unwrap();
        let p = critical_portrait(&curve).unwrap();
        let hit = p
            .critical_points
            .iter()
            .find(|c| (c.a - a_star(4.0)).abs() < 1e-6)
            .expect("a*_4 located");
        assert!((hit.c - 6.0).abs() < 1e-8);
        assert_eq!(hit.kind, CriticalKind::Min);
        assert_eq!(hit.epsilon, 2);
    }

    #[test]
    fn n3_unique_above_two_n() {
        let curve = sweep_alpha(3.0, DEFAULT_WINDOW, 0.1).unwrap();
        let p = critical_portrait(&curve).unwrap();
        let c = count_solutions(&p, 6.5).unwrap();
        assert_eq!((c.count, c.chi), (1, 1));
        assert_eq!(curve.count_roots(6.5), 1);
        assert!(matches!(
            count_solutions(&p, 6.0),
            Err(Error::OnTwoN { .. })
        ));
    }

    #[test]
    fn limits_and_window() {
        assert_eq!(alpha_limits(0.5), (3.0, 2.0));
        assert_eq!(alpha_limits(3.0), (8.0, 6.0));
        assert_eq!(pohozaev_window(0.5), (2.0, 3.0));
        assert_eq!(pohozaev_window(3.0), (4.0, 8.0));
    }

    #[test]
    fn bad_sweeps_rejected() {
        assert!(sweep_alpha(2.0, (1.0, 0.0), 0.1).is_err());
        assert!(sweep_alpha(2.0, (0.0, 1.0), 0.0).is_err());
        assert!(sweep_alpha(-1.0, (0.0, 1.0), 0.1).is_err());
    }

    #[test]
    fn c_of_n_at_odd_levels() {
        let c = find_c_of_n(10.0).unwrap();
        assert!((c - a_star(10.0)).abs() < 1e-4, "c(10) = {c}");
        assert!(find_c_of_n(4.0).unwrap() > a_star(4.0));
    }
}

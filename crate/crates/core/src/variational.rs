//! Linearized and second-variation solutions along a shooting profile.
//!
//! `φ_a = ∂u_a/∂a` solves `Δφ + 2ρφ = 0` and `ψ_a = ∂²u_a/∂a²` solves
//! `Δψ + 2ρ(ψ + 2φ²) = 0`, with `ρ = (1+r²)^N e^{2u_a}`. Both are integrated
//! jointly with `u_a` on one adaptive grid, together with the running
//! integrals of `ρφ³ r` (for `J_N`) and `ρ(ψ + 2φ²) r` (for `K_N`).
//!
//! Asymptotically `φ_a ~ -α'(a) log r + b'(a)`, so `α'` and `b'` come from
//! differentiating the closed-form tail limits, and likewise `α''`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ivp::Trajectory;
use crate::radial::{idx, run, Depth, RadialProfile, RadialRun, ShootingParams, SolverSettings, TailModel};

/// `|α'|` below which `φ_a` is declared bounded.
pub const BOUNDEDNESS_TOL: f64 = 1e-6;

/// `φ_a` and the quantities read off it.
#[derive(Debug, Clone)]
pub struct LinearizedProfile {
    pub params: ShootingParams,
    pub alpha: f64,
    /// Nodes carry `(v, v', φ, φ', ∫ρφ³ r dr)` in `t = log r`.
    pub phi_trajectory: Trajectory,
    /// Zeros of `φ_a` in `t = log r`, increasing. The last ones may lie past
    /// `r_max`, located on the exact tail of φ.
    pub zeros_t: Vec<f64>,
    pub alpha_prime: f64,
    /// `b'(a)` in `φ_a(r) ~ -α'(a) log r + b'(a)`.
    pub intercept: f64,
    pub bounded: bool,
    /// Zeros past `r_max`, at the end of `zeros_t`.
    pub tail_zeros: usize,
    pub(crate) tail_model: Option<TailModel>,
    pub(crate) j_integral: f64,
    pub(crate) tail_residual: f64,
    pub(crate) tail_cut: f64,
}

impl LinearizedProfile {
    fn from_run(run: RadialRun, settings: &SolverSettings) -> Self {
        let traj = run.trajectory;
        let lim = run.limits;
        let t_start = traj.t_start();
        let t_end = traj.t_end();
        let mut zeros_t: Vec<f64> = traj
            .events
            .iter()
            .map(|e| e.t)
            .filter(|&t| t > t_start && t < t_end)
            .collect();
        zeros_t.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let bounded = lim.alpha_prime.abs() < BOUNDEDNESS_TOL;
        let last = traj.last();
        // A bounded φ keeps its final sign; only the zero on the linear
        // part depends on α' and is dropped with it.
        let model = run.tail_model;
        let beyond: Vec<f64> = model
            .map(|m| m.zeros(!bounded).into_iter().map(|th| m.t_at(th)).collect())
            .unwrap_or_default();
        let before = zeros_t.len();
        for t in beyond {
            if zeros_t.last().map_or(true, |&z| t - z > 1e-9) {
                zeros_t.push(t);
            }
        }
        let tail_zeros = zeros_t.len() - before;
        Self {
            params: run.params,
            alpha: lim.alpha,
            j_integral: last.y[idx::J] + run.quadrature_tail.j,
            tail_residual: run.quadrature_tail.residual,
            tail_cut: settings.tail_cut,
            zeros_t,
            alpha_prime: lim.alpha_prime,
            intercept: lim.beta_prime,
            bounded,
            tail_zeros,
            tail_model: model,
            phi_trajectory: traj,
        }
    }

    pub fn zero_count(&self) -> usize {
        self.zeros_t.len()
    }

    /// Zeros as radii.
    pub fn zeros(&self) -> Vec<f64> {
        self.zeros_t.iter().map(|t| t.exp()).collect()
    }

    /// `r(a)`, the largest zero of `φ_a`.
    pub fn largest_zero(&self) -> Option<f64> {
        self.zeros_t.last().map(|t| t.exp())
    }

    pub fn r_max(&self) -> f64 {
        self.phi_trajectory.t_end().exp()
    }

    /// `φ_a(r)` inside the integrated span, or on the tail model past it.
    pub fn phi_at(&self, r: f64) -> f64 {
        let t = r.ln();
        let traj = &self.phi_trajectory;
        if t <= traj.t_start() {
            let e = (2.0 * self.params.a).exp();
            1.0 - 0.5 * e * r * r
        } else if t >= traj.t_end() {
            match self.tail_model {
                Some(m) => m.phi(m.theta_t + 0.5 * m.gamma * (t - m.t)),
                None => -self.alpha_prime * t + self.intercept,
            }
        } else {
            traj.sample_component(t, idx::W).expect("inside span")
        }
    }

    /// `|φ(T) - (-α' T + b')|` at the last node.
    pub fn asymptotic_fit_residual(&self) -> f64 {
        let last = self.phi_trajectory.last();
        (last.y[idx::W] - (-self.alpha_prime * last.t + self.intercept)).abs()
    }
}

/// Linearize along `profile` with the default solver settings.
pub fn linearize(profile: &RadialProfile) -> Result<LinearizedProfile> {
    linearize_with(profile, &SolverSettings::default())
}

pub fn linearize_with(
    profile: &RadialProfile,
    settings: &SolverSettings,
) -> Result<LinearizedProfile> {
    let lin = linearize_params(profile.params, settings)?;
    let tol = 1e-7 * profile.alpha.max(1.0);
    if (lin.alpha - profile.alpha).abs() > tol {
        return Err(Error::ParamMismatch(format!(
            "profile alpha {} disagrees with re-integrated alpha {}",
            profile.alpha, lin.alpha
        )));
    }
    Ok(lin)
}

/// Integrate `u_a` and `φ_a` together from the parameters alone.
pub fn linearize_params(
    params: ShootingParams,
    settings: &SolverSettings,
) -> Result<LinearizedProfile> {
    let run = run(params, Depth::Linear, settings)?;
    check_slope_convergence(&run, settings)?;
    Ok(LinearizedProfile::from_run(run, settings))
}

fn check_slope_convergence(run: &RadialRun, settings: &SolverSettings) -> Result<()> {
    let change = (run.limits.alpha_prime - run.previous_alpha_prime).abs();
    if !run.limits.alpha_prime.is_finite()
        || change > 10.0 * settings.flux_tol * run.limits.alpha_prime.abs().max(1.0)
    {
        return Err(Error::NoConvergence {
            r_max: run.trajectory.t_end().exp(),
            last_change: change,
        });
    }
    Ok(())
}

/// `α'(a)` from the slope of `φ_a` at infinity.
pub fn alpha_prime(params: ShootingParams) -> Result<f64> {
    alpha_prime_with(params, &SolverSettings::default())
}

pub fn alpha_prime_with(params: ShootingParams, settings: &SolverSettings) -> Result<f64> {
    Ok(linearize_params(params, settings)?.alpha_prime)
}

fn same_params(a: ShootingParams, b: ShootingParams) -> Result<()> {
    if a != b {
        return Err(Error::ParamMismatch(format!(
            "({}, {}) vs ({}, {})",
            a.n, a.a, b.n, b.a
        )));
    }
    Ok(())
}

/// `J_N(a) = ∫₀^∞ (1+r²)^N e^{2u_a} φ_a³ r dr`.
pub fn compute_j(profile: &RadialProfile, linearized: &LinearizedProfile) -> Result<f64> {
    same_params(profile.params, linearized.params)?;
    if linearized.tail_residual >= linearized.tail_cut {
        return Err(Error::TailNotNegligible {
            r_max: linearized.r_max(),
            residual: linearized.tail_residual,
        });
    }
    Ok(linearized.j_integral)
}

/// `ψ_a` and `K_N(a) = ∫₀^∞ (1+r²)^N e^{2u_a} (ψ_a + 2φ_a²) r dr`.
#[derive(Debug, Clone)]
pub struct SecondVariationProfile {
    pub params: ShootingParams,
    /// Nodes carry `(v, v', φ, φ', J, ψ, ψ', K)`.
    pub psi_trajectory: Trajectory,
    pub k_value: f64,
    /// `α''(a)` from the asymptotic slope of `ψ_a`.
    pub alpha_second: f64,
    pub j_value: f64,
}

pub fn compute_k(
    profile: &RadialProfile,
    linearized: &LinearizedProfile,
) -> Result<SecondVariationProfile> {
    compute_k_with(profile, linearized, &SolverSettings::default())
}

pub fn compute_k_with(
    profile: &RadialProfile,
    linearized: &LinearizedProfile,
    settings: &SolverSettings,
) -> Result<SecondVariationProfile> {
    same_params(profile.params, linearized.params)?;
    second_variation(profile.params, settings)
}

/// Full second-order integration from the parameters alone.
pub fn second_variation(
    params: ShootingParams,
    settings: &SolverSettings,
) -> Result<SecondVariationProfile> {
    let run = run(params, Depth::Second, settings)?;
    if run.quadrature_tail.residual >= settings.tail_cut {
        return Err(Error::TailNotNegligible {
            r_max: run.trajectory.t_end().exp(),
            residual: run.quadrature_tail.residual,
        });
    }
    let last = run.trajectory.last();
    Ok(SecondVariationProfile {
        params,
        k_value: last.y[idx::K] + run.quadrature_tail.k,
        j_value: last.y[idx::J] + run.quadrature_tail.j,
        alpha_second: run.limits.alpha_second,
        psi_trajectory: run.trajectory,
    })
}

/// One row of variational diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalDiagnostics {
    pub params: ShootingParams,
    pub j_value: f64,
    pub k_value: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub zero_count: usize,
    pub bounded: bool,
}

/// α, α', J, K and the zero count from a single second-order integration.
pub fn diagnostics(
    params: ShootingParams,
    settings: &SolverSettings,
) -> Result<VariationalDiagnostics> {
    let run = run(params, Depth::Second, settings)?;
    check_slope_convergence(&run, settings)?;
    if run.quadrature_tail.residual >= settings.tail_cut {
        return Err(Error::TailNotNegligible {
            r_max: run.trajectory.t_end().exp(),
            residual: run.quadrature_tail.residual,
        });
    }
    let k_value = run.trajectory.last().y[idx::K] + run.quadrature_tail.k;
    let lin = LinearizedProfile::from_run(run, settings);
    Ok(VariationalDiagnostics {
        params,
        j_value: lin.j_integral,
        k_value,
        alpha: lin.alpha,
        alpha_prime: lin.alpha_prime,
        zero_count: lin.zero_count(),
        bounded: lin.bounded,
    })
}

/// `dr/da` of the largest zero `r(a)` of `φ_a` by three routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroVelocity {
    pub r: f64,
    /// `-4 / (r |φ'(r)|²) ∫₀^r ρ φ³ s ds`.
    pub formula: f64,
    /// `-ψ(r) / φ'(r)`, differentiating `φ_a(r(a)) = 0`.
    pub implicit: f64,
    /// `(r(a+h) - r(a)) / h`.
    pub finite_difference: f64,
}

pub fn largest_zero_velocity(params: ShootingParams, h: f64) -> Result<ZeroVelocity> {
    largest_zero_velocity_with(params, h, &SolverSettings::precise())
}

pub fn largest_zero_velocity_with(
    params: ShootingParams,
    h: f64,
    settings: &SolverSettings,
) -> Result<ZeroVelocity> {
    let run = run(params, Depth::Second, settings)?;
    let traj = run.trajectory.clone();
    let lin = LinearizedProfile::from_run(run, settings);
    if lin.bounded {
        return Err(Error::NoLargestZero(format!(
            "phi is bounded at (N, a) = ({}, {}), alpha' = {:e}",
            params.n, params.a, lin.alpha_prime
        )));
    }
    let Some(&t_z) = lin.zeros_t.last() else {
        return Err(Error::NoLargestZero(format!(
            "phi has no zero at (N, a) = ({}, {})",
            params.n, params.a
        )));
    };
    let r = t_z.exp();
    // In t = log r: r φ'(r) = dφ/dt, so r |φ'(r)|² = (dφ/dt)² / r.
    let last = traj.last();
    let (integral, dphi_dt, psi) = if t_z > last.t {
        // Past the span: J and φ' on the tail model; ψ is not carried there.
        let m = lin.tail_model.expect("tail zeros come from the model");
        let th = m.theta_t + 0.5 * m.gamma * (t_z - m.t);
        (last.y[idx::J] + m.j_up_to(th), m.dphi_dt(th), f64::NAN)
    } else {
        let y = traj.sample(t_z).expect("zero inside span");
        (y[idx::J], y[idx::DW], y[idx::PSI])
    };
    let formula = -4.0 * r * integral / (dphi_dt * dphi_dt);
    let implicit = -r * psi / dphi_dt;

    let shifted = linearize_params(ShootingParams::new(params.n, params.a + h)?, settings)?;
    let r_shift = shifted.largest_zero().ok_or_else(|| {
        Error::NoLargestZero(format!("phi has no zero at a + h = {}", params.a + h))
    })?;
    Ok(ZeroVelocity {
        r,
        formula,
        implicit,
        finite_difference: (r_shift - r) / h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{a_star, shoot};

    fn explicit(n: f64) -> RadialProfile {
        shoot(ShootingParams::explicit(n), 1e-9).unwrap()
    }

    #[test]
    fn explicit_n4_is_bounded_with_two_zeros() {
        let p = explicit(4.0);
        let lin = linearize(&p).unwrap();
        assert!(lin.bounded, "alpha' = {}", lin.alpha_prime);
        assert_eq!(lin.zero_count(), 2);
        // P_2(s) vanishes at s = ±1/√3, i.e. r² = (1+s)/(1-s).
        let s = 1.0 / 3f64.sqrt();
        let expected = [
            ((1.0 - s) / (1.0 + s)).sqrt(),
            ((1.0 + s) / (1.0 - s)).sqrt(),
        ];
        for (z, e) in lin.zeros().iter().zip(expected) {
            assert!((z - e).abs() < 1e-10, "{z} vs {e}");
        }
    }

    #[test]
    fn explicit_n10_is_bounded_with_three_zeros() {
        let lin = linearize(&explicit(10.0)).unwrap();
        assert!(lin.bounded);
        assert_eq!(lin.zero_count(), 3);
    }

    #[test]
    fn alpha_prime_signs_at_explicit_points() {
        assert!(alpha_prime(ShootingParams::explicit(2.0)).unwrap() < 0.0);
        assert!(alpha_prime(ShootingParams::explicit(4.0)).unwrap().abs() < 1e-6);
        assert!(alpha_prime(ShootingParams::explicit(5.0)).unwrap().abs() > 1e-3);
    }

    #[test]
    fn asymptote_fits_tail() {
        let lin = linearize_params(
            ShootingParams::new(6.0, 0.4).unwrap(),
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(
            lin.asymptotic_fit_residual() < 1e-8,
            "{}",
            lin.asymptotic_fit_residual()
        );
        assert!(lin.zero_count() >= 2);
    }

    #[test]
    fn j_at_n4_is_twelve_thirty_fifths() {
        let p = explicit(4.0);
        let lin = linearize(&p).unwrap();
        let j = compute_j(&p, &lin).unwrap();
        assert!((j - 12.0 / 35.0).abs() < 1e-6, "J = {j}");
    }

    #[test]
    fn k_is_positive_at_n4() {
        let p = explicit(4.0);
        let lin = linearize(&p).unwrap();
        let k = compute_k(&p, &lin).unwrap();
        assert!(k.k_value > 0.0);
        assert!((2.0 * k.k_value - k.alpha_second).abs() < 1e-7 * k.alpha_second.abs().max(1.0));
    }

    #[test]
    fn k_at_n1_is_finite() {
        let p = shoot(ShootingParams::new(1.0, 0.0).unwrap(), 1e-9).unwrap();
        let lin = linearize(&p).unwrap();
        let k = compute_k(&p, &lin).unwrap();
        assert!(k.k_value.is_finite());
    }

    #[test]
    fn mismatched_profiles_are_rejected() {
        let p = explicit(4.0);
        let other = linearize(&explicit(5.0)).unwrap();
        assert!(matches!(
            compute_j(&p, &other),
            Err(Error::ParamMismatch(_))
        ));
    }

    #[test]
    fn bounded_phi_has_no_zero_velocity() {
        let err = largest_zero_velocity(ShootingParams::new(4.0, a_star(4.0)).unwrap(), 1e-5)
            .unwrap_err();
        assert!(matches!(err, Error::NoLargestZero(_)));
    }

    #[test]
    fn zero_velocity_routes_agree() {
        let p = ShootingParams::new(6.0, a_star(6.0) + 0.5).unwrap();
        let v = largest_zero_velocity(p, 1e-5).unwrap();
        assert!(
            (v.formula - v.implicit).abs() < 1e-6 * v.formula.abs(),
            "{v:?}"
        );
        assert!(
            (v.formula - v.finite_difference).abs() < 0.05 * v.formula.abs(),
            "{v:?}"
        );
    }

    #[test]
    fn slope_and_curvature_match_finite_differences() {
        let s = SolverSettings::precise();
        for (n, a) in [(1.5, 0.3), (3.0, -0.7), (6.0, 1.1)] {
            let al = |a: f64| crate::radial::alpha(ShootingParams::new(n, a).unwrap(), &s).unwrap();
            let h1 = 1e-5;
            let fd1 = (al(a + h1) - al(a - h1)) / (2.0 * h1);
            let h2 = 1e-3;
            let fd2 = (al(a + h2) - 2.0 * al(a) + al(a - h2)) / (h2 * h2);
            let sv = second_variation(ShootingParams::new(n, a).unwrap(), &s).unwrap();
            let ap = alpha_prime_with(ShootingParams::new(n, a).unwrap(), &s).unwrap();
            assert!(
                (ap - fd1).abs() < 1e-4 * ap.abs().max(1.0),
                "{n} {a}: {ap} vs {fd1}"
            );
            assert!(
                (2.0 * sv.k_value - fd2).abs() < 1e-3 * fd2.abs().max(1.0),
                "{n} {a}: {} vs {fd2}",
                2.0 * sv.k_value
            );
        }
    }

    #[test]
    fn tail_zero_matches_longer_integration() {
        // α ≈ 2N close to N+1: W decays slowly and φ turns past r_max.
        let p = ShootingParams::new(1.1322330156271427, 5.892319269362774).unwrap();
        let short = linearize_params(p, &SolverSettings::default()).unwrap();
        let long = linearize_params(
            p,
            &SolverSettings {
                t_tail: 30.0,
                t_cap: 60.0,
                ..SolverSettings::default()
            },
        )
        .unwrap();
        assert_eq!(short.zero_count(), 3);
        assert_eq!(short.tail_zeros, 2);
        assert!(long.tail_zeros < short.tail_zeros);
        assert_eq!(long.zero_count(), 3);
        let (z_short, z_long) = (short.zeros_t[1], long.zeros_t[1]);
        assert!(z_long < long.phi_trajectory.t_end());
        assert!((z_short - z_long).abs() < 1e-6, "{z_short} vs {z_long}");
    }

    #[test]
    fn quadrature_tail_is_independent_of_where_it_starts() {
        let early = SolverSettings::default();
        let late = SolverSettings {
            t_tail: 30.0,
            t_cap: 60.0,
            ..SolverSettings::default()
        };
        for (n, a) in [(1.0, 5.0), (4.0, 0.0), (11.0, 6.0), (0.5, -1.0)] {
            let p = ShootingParams::new(n, a).unwrap();
            let x = second_variation(p, &early).unwrap();
            let y = second_variation(p, &late).unwrap();
            assert!(
                (x.j_value - y.j_value).abs() < 1e-8 * y.j_value.abs().max(1.0),
                "J {n} {a}: {} vs {}",
                x.j_value,
                y.j_value
            );
            assert!(
                (x.k_value - y.k_value).abs() < 1e-8 * y.k_value.abs().max(1.0),
                "K {n} {a}: {} vs {}",
                x.k_value,
                y.k_value
            );
        }
    }
}

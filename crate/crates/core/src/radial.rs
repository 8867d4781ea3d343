//! Radial shooting for `u'' + u'/r + (1+r²)^N e^{2u} = 0`, `u(0) = a`,
//! `u'(0) = 0`.
//!
//! Integration runs in `t = log r` on `v(t) = u(e^t)`, which turns the
//! radial Laplacian into `v''` and the equation into `v'' = -W` with
//! `W = e^{2t} (1+e^{2t})^N e^{2v}`. The flux `-v'(t) = -r u'(r)` increases
//! to the mass `α(a)`.
//!
//! Once `t` is large the factor `(1+e^{-2t})^N` is 1 to machine precision
//! and `z = log W` obeys the integrable equation `z'' = -2 e^z`. Its first
//! integral `z'² + 4e^z = γ²` gives α and β in closed form from the state at
//! the stopping time, so the far tail is never integrated.
//!
//! The same integration optionally carries the first and second
//! a-derivatives of `v` (the linearized and second-variation solutions)
//! together with running quadratures of `W w³` and `W (ψ + 2w²)`.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ivp::{integrate_until, Control, IntegratorConfig, Node, OdeSystem, Trajectory};

/// Central value of the explicit solution, `½ log(2(N+2))`.
pub fn a_star(n: f64) -> f64 {
    0.5 * (2.0 * (n + 2.0)).ln()
}

/// Value of the explicit solution `u*_N(r) = ½ log(2(N+2) / (1+r²)^{N+2})`.
pub fn u_star(n: f64, r: f64) -> f64 {
    a_star(n) - 0.5 * (n + 2.0) * (r * r).ln_1p()
}

/// `log(1 + e^{2t})` without overflow.
pub(crate) fn log1p_exp2(t: f64) -> f64 {
    if t > 0.0 {
        2.0 * t + (-2.0 * t).exp().ln_1p()
    } else {
        (2.0 * t).exp().ln_1p()
    }
}

/// Derivative of [`log1p_exp2`].
fn dlog1p_exp2(t: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * t).exp())
}

/// `log W` at `(t, v)`.
pub(crate) fn log_weight(n: f64, t: f64, v: f64) -> f64 {
    2.0 * t + n * log1p_exp2(t) + 2.0 * v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingParams {
    pub n: f64,
    pub a: f64,
}

impl ShootingParams {
    pub fn new(n: f64, a: f64) -> Result<Self> {
        let p = Self { n, a };
        p.validate()?;
        Ok(p)
    }

    /// Parameters of the explicit solution at exponent `n`.
    pub fn explicit(n: f64) -> Self {
        Self { n, a: a_star(n) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "N must be positive, got {}",
                self.n
            )));
        }
        if !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "a must be finite, got {}",
                self.a
            )));
        }
        Ok(())
    }

    /// `f(0) = a - a*_N`.
    pub fn offset_from_explicit(&self) -> f64 {
        self.a - a_star(self.n)
    }
}

/// Numerical settings shared by every shooting-based computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cauchy tolerance on the tail-corrected flux over one doubling of r.
    pub flux_tol: f64,
    /// Start-up radius for `a <= 0`; scaled by `e^{-a}` for positive `a`.
    pub r0: f64,
    /// Earliest stopping time; beyond it the closed-form tail is exact.
    pub t_tail: f64,
    /// Hard cap on `log r`.
    pub t_cap: f64,
    /// Largest accepted error estimate of the closed-form J and K
    /// remainders, relative to the integrals once they exceed one.
    pub tail_cut: f64,
    pub max_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            flux_tol: 1e-9,
            r0: 1e-6,
            t_tail: 18.0,
            t_cap: 40.0,
            tail_cut: 1e-14,
            max_steps: 500_000,
        }
    }
}

impl SolverSettings {
    /// Settings tight enough for finite-difference cross-checks.
    pub fn precise() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-15,
            flux_tol: 1e-11,
            ..Self::default()
        }
    }

    pub fn with_flux_tol(mut self, tol: f64) -> Self {
        self.flux_tol = tol;
        self
    }

    pub(crate) fn start_time(&self, a: f64) -> f64 {
        self.r0.ln() - a.max(0.0)
    }
}

/// How far up the variational hierarchy to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Depth {
    Base,
    Linear,
    Second,
}

pub(crate) mod idx {
    pub const V: usize = 0;
    pub const DV: usize = 1;
    pub const W: usize = 2;
    pub const DW: usize = 3;
    pub const J: usize = 4;
    pub const PSI: usize = 5;
    pub const DPSI: usize = 6;
    pub const K: usize = 7;
}

impl Depth {
    fn dimension(self) -> usize {
        match self {
            Depth::Base => 2,
            Depth::Linear => 5,
            Depth::Second => 8,
        }
    }
}

pub(crate) struct RadialSystem {
    pub n: f64,
    pub depth: Depth,
}

impl OdeSystem for RadialSystem {
    fn dimension(&self) -> usize {
        self.depth.dimension()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let w = log_weight(self.n, t, y[idx::V]).exp();
        dy[idx::V] = y[idx::DV];
        dy[idx::DV] = -w;
        if self.depth >= Depth::Linear {
            let phi = y[idx::W];
            dy[idx::W] = y[idx::DW];
            dy[idx::DW] = -2.0 * w * phi;
            dy[idx::J] = w * phi * phi * phi;
            if self.depth >= Depth::Second {
                let forcing = y[idx::PSI] + 2.0 * phi * phi;
                dy[idx::PSI] = y[idx::DPSI];
                dy[idx::DPSI] = -2.0 * w * forcing;
                dy[idx::K] = w * forcing;
            }
        }
    }

    fn description(&self) -> &str {
        match self.depth {
            Depth::Base => "radial Liouville equation in Emden-Fowler variables",
            Depth::Linear => "radial Liouville equation with its linearization",
            Depth::Second => "radial Liouville equation with first and second variations",
        }
    }
}

/// Fourth-order Taylor data at the start-up radius.
pub(crate) fn initial_state(n: f64, a: f64, t0: f64, depth: Depth) -> Vec<f64> {
    let e = (2.0 * a).exp();
    let q = (2.0 * t0).exp();
    let c2 = -e / 4.0;
    let c4 = -e * (n - e / 2.0) / 16.0;
    let mut y = vec![0.0; depth.dimension()];
    y[idx::V] = a + c2 * q + c4 * q * q;
    y[idx::DV] = 2.0 * c2 * q + 4.0 * c4 * q * q;
    if depth >= Depth::Linear {
        let d2 = -e / 2.0;
        let d4 = -e * (n - e) / 8.0;
        y[idx::W] = 1.0 + d2 * q + d4 * q * q;
        y[idx::DW] = 2.0 * d2 * q + 4.0 * d4 * q * q;
        y[idx::J] = 0.5 * e * q;
        if depth >= Depth::Second {
            let e2 = -e;
            let e4 = -e * (n - 2.0 * e) / 4.0;
            y[idx::PSI] = e2 * q + e4 * q * q;
            y[idx::DPSI] = 2.0 * e2 * q + 4.0 * e4 * q * q;
            y[idx::K] = e * q;
        }
    }
    y
}

/// Closed-form limits of the integrable tail, plus their a-derivatives when
/// the variational components are present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TailLimits {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    pub alpha_second: f64,
}

pub(crate) fn tail_limits(n: f64, t: f64, y: &[f64]) -> TailLimits {
    let log_w = log_weight(n, t, y[idx::V]);
    let weight = log_w.exp();
    // γ_T = -z'(t) with z = log W.
    let gamma_t = -(2.0 + n * dlog1p_exp2(t) + 2.0 * y[idx::DV]);
    let gamma = (gamma_t * gamma_t + 4.0 * weight).sqrt();
    // γ + γ_T without cancellation when γ_T < 0.
    let sum = if gamma_t >= 0.0 {
        gamma + gamma_t
    } else {
        4.0 * weight / (gamma - gamma_t)
    };
    let alpha = n + 1.0 + 0.5 * gamma;
    let beta = gamma.ln() + 0.5 * gamma * t - sum.ln() + LN_2 + 0.5 * log_w;

    let mut out = TailLimits {
        alpha,
        beta,
        alpha_prime: f64::NAN,
        beta_prime: f64::NAN,
        alpha_second: f64::NAN,
    };
    if y.len() > idx::DW {
        let (phi, dphi) = (y[idx::W], y[idx::DW]);
        let d_gamma_t = -2.0 * dphi;
        let d_weight = 2.0 * weight * phi;
        let d_gamma = (gamma_t * d_gamma_t + 2.0 * d_weight) / gamma;
        out.alpha_prime = 0.5 * d_gamma;
        out.beta_prime = d_gamma / gamma + 0.5 * t * d_gamma - (d_gamma + d_gamma_t) / sum + phi;
        if y.len() > idx::DPSI {
            let (psi, dpsi) = (y[idx::PSI], y[idx::DPSI]);
            let dd_gamma_t = -2.0 * dpsi;
            let dd_weight = weight * (4.0 * phi * phi + 2.0 * psi);
            let dd_gamma = (d_gamma_t * d_gamma_t + gamma_t * dd_gamma_t + 2.0 * dd_weight
                - d_gamma * d_gamma)
                / gamma;
            out.alpha_second = 0.5 * dd_gamma;
        }
    }
    out
}

/// Raw output of one radial integration.
#[derive(Debug, Clone)]
pub(crate) struct RadialRun {
    pub params: ShootingParams,
    pub trajectory: Trajectory,
    pub limits: TailLimits,
    /// `(t, tail-corrected α)` one doubling of r before the end.
    pub previous_alpha_prime: f64,
    /// Closed-form J/K remainders past the final node.
    pub quadrature_tail: QuadratureTail,
    /// Exact tail of φ past the final node, when φ was integrated.
    pub tail_model: Option<TailModel>,
}

/// Remainders of the J and K quadratures past `t`, plus a bound on what
/// the tail model neglects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct QuadratureTail {
    pub j: f64,
    pub k: f64,
    pub residual: f64,
}

/// Past `t_tail`, `z = log W` solves `z'' = −2e^z` up to `O(N e^{−2t})`, so
/// `W = (γ²/4) sech²θ` with `θ = γ(t − t₁)/2`. Then `φ = A tanhθ +
/// B(1 − θ tanhθ)`, fitted to the state at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TailModel {
    pub t: f64,
    pub gamma: f64,
    pub theta_t: f64,
    pub ca: f64,
    pub cb: f64,
}

/// Past this θ, `tanh θ = 1` and `sech²θ = 0` in double precision.
const THETA_FLAT: f64 = 40.0;
const THETA_PANEL: f64 = 0.25;

impl TailModel {
    pub fn fit(n: f64, t: f64, y: &[f64]) -> Option<Self> {
        if y.len() <= idx::DW {
            return None;
        }
        let weight = log_weight(n, t, y[idx::V]).exp();
        let gamma_t = -(2.0 + n * dlog1p_exp2(t) + 2.0 * y[idx::DV]);
        let gamma = (gamma_t * gamma_t + 4.0 * weight).sqrt();
        // atanh(γ_T/γ) via γ² − γ_T² = 4W, without cancellation.
        let theta_t = if gamma_t >= 0.0 {
            ((gamma + gamma_t) / (2.0 * weight.sqrt())).ln()
        } else {
            -((gamma - gamma_t) / (2.0 * weight.sqrt())).ln()
        };
        if !theta_t.is_finite() || !(gamma > 0.0) {
            return None;
        }
        let mut model = Self { t, gamma, theta_t, ca: 0.0, cb: 0.0 };
        (model.ca, model.cb) = model.solve(y[idx::W], y[idx::DW], theta_t);
        Some(model)
    }

    fn basis(&self, th: f64) -> ([f64; 2], [f64; 2]) {
        let half = 0.5 * self.gamma;
        let (tau, s2) = (th.tanh(), 1.0 / th.cosh().powi(2));
        ([tau, 1.0 - th * tau], [half * s2, -half * (tau + th * s2)])
    }

    /// Coefficients of a solution with value `v` and t-derivative `dv` at θ.
    fn solve(&self, v: f64, dv: f64, th: f64) -> (f64, f64) {
        let ([y1, y2], [d1, d2]) = self.basis(th);
        let det = y1 * d2 - y2 * d1;
        ((v * d2 - dv * y2) / det, (y1 * dv - d1 * v) / det)
    }

    pub fn phi(&self, th: f64) -> f64 {
        let tau = th.tanh();
        self.ca * tau + self.cb * (1.0 - th * tau)
    }

    /// `dφ/dt` at θ.
    pub fn dphi_dt(&self, th: f64) -> f64 {
        let ([_, _], [d1, d2]) = self.basis(th);
        self.ca * d1 + self.cb * d2
    }

    pub fn t_at(&self, th: f64) -> f64 {
        self.t + 2.0 * (th - self.theta_t) / self.gamma
    }

    fn flat_start(&self) -> f64 {
        self.theta_t.max(0.0) + THETA_FLAT
    }

    /// `∫ W g dt` from the fit point to θ, with `W dt = (γ/2) sech²θ dθ`.
    fn weighted_integral(&self, g: &dyn Fn(f64) -> f64, th_end: f64) -> f64 {
        let th_end = th_end.min(self.flat_start());
        if th_end <= self.theta_t {
            return 0.0;
        }
        let panels = ((th_end - self.theta_t) / THETA_PANEL).ceil().max(1.0) as usize;
        let width = (th_end - self.theta_t) / panels as f64;
        let sum: f64 = (0..panels)
            .map(|i| {
                let lo = self.theta_t + width * i as f64;
                gauss_legendre(lo, lo + width, |th| g(th) / th.cosh().powi(2))
            })
            .sum();
        0.5 * self.gamma * sum
    }

    /// `∫ W φ³ dt` from the fit point to θ.
    pub fn j_up_to(&self, th: f64) -> f64 {
        self.weighted_integral(&|x| self.phi(x).powi(3), th)
    }

    /// Zeros of φ past the fit point, as θ. Those in the transition region
    /// come first; the last one may lie on the linear part `A + B(1 − θ)`,
    /// returned only when `linear` is set.
    pub fn zeros(&self, linear: bool) -> Vec<f64> {
        let flat = self.flat_start();
        let step = 0.05;
        let mut out = Vec::new();
        let mut lo = self.theta_t;
        let mut f_lo = self.phi(lo);
        while lo < flat {
            let hi = (lo + step).min(flat);
            let f_hi = self.phi(hi);
            if f_lo != 0.0 && f_hi != 0.0 && f_lo.signum() != f_hi.signum() {
                let (mut a, mut b, mut fa) = (lo, hi, f_lo);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = self.phi(m);
                    if fm == 0.0 || b - a < 1e-15 * m.abs().max(1.0) {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
            lo = hi;
            f_lo = f_hi;
        }
        if linear && self.cb != 0.0 {
            let th = 1.0 + self.ca / self.cb;
            if th > flat {
                out.push(th);
            }
        }
        out
    }
}

/// Remainders of J and K past `t` on the tail model. `ψ` is a second
/// combination of the same basis plus the part quadratic in `(A, B)`.
pub(crate) fn quadrature_tail(n: f64, t: f64, y: &[f64]) -> QuadratureTail {
    if y.len() <= idx::J {
        return QuadratureTail { j: 0.0, k: 0.0, residual: 0.0 };
    }
    let Some(model) = TailModel::fit(n, t, y) else {
        return QuadratureTail { j: 0.0, k: 0.0, residual: f64::INFINITY };
    };
    let gamma = model.gamma;
    let half = 0.5 * gamma;
    // φ = ½(γ' ∂_γ z + t₁' ∂_{t₁} z) gives the parameter velocities.
    let (dg, dt1) = (model.cb * gamma, 2.0 * model.ca / gamma);
    let quad = |th: f64| {
        let (tau, s2) = (th.tanh(), 1.0 / th.cosh().powi(2));
        let z_gg = -2.0 / (gamma * gamma) - 2.0 * s2 * (th / gamma).powi(2);
        let z_gt = th * s2 + tau;
        let z_tt = -0.5 * gamma * gamma * s2;
        0.5 * (z_gg * dg * dg + 2.0 * z_gt * dg * dt1 + z_tt * dt1 * dt1)
    };
    let dquad = |th: f64| {
        let (tau, s2) = (th.tanh(), 1.0 / th.cosh().powi(2));
        let d_gg = -2.0 / (gamma * gamma) * (2.0 * th * s2 - 2.0 * th * th * s2 * tau);
        let d_gt = 2.0 * s2 - 2.0 * th * s2 * tau;
        let d_tt = gamma * gamma * s2 * tau;
        half * 0.5 * (d_gg * dg * dg + 2.0 * d_gt * dg * dt1 + d_tt * dt1 * dt1)
    };

    let end = f64::INFINITY;
    let j = model.j_up_to(end);
    let mut k = 0.0;
    if y.len() > idx::K {
        let theta_t = model.theta_t;
        let (cc, cd) = model.solve(y[idx::PSI] - quad(theta_t), y[idx::DPSI] - dquad(theta_t), theta_t);
        let psi = |th: f64| {
            let tau = th.tanh();
            quad(th) + cc * tau + cd * (1.0 - th * tau)
        };
        k = model.weighted_integral(&|th| psi(th) + 2.0 * model.phi(th).powi(2), end);
    }
    // The neglected forcing N L'' is of size 4N e^{−2t}.
    let mut scale = (y[idx::J] + j).abs().max(1.0);
    if y.len() > idx::K {
        scale = scale.max((y[idx::K] + k).abs());
    }
    let residual = (j.abs() + k.abs()) * 4.0 * (n + 1.0) * (-2.0 * t).exp() / scale;
    QuadratureTail { j, k, residual }
}

pub(crate) fn run(
    params: ShootingParams,
    depth: Depth,
    settings: &SolverSettings,
) -> Result<RadialRun> {
    params.validate()?;
    let n = params.n;
    let t0 = settings.start_time(params.a);
    let y0 = initial_state(n, params.a, t0, depth);
    let cfg = IntegratorConfig {
        rel_tol: settings.rel_tol,
        abs_tol: settings.abs_tol,
        max_step: 2.0,
        max_steps: settings.max_steps,
        t_span: (t0, settings.t_cap),
        initial_step: None,
    };
    let track = (depth >= Depth::Linear).then_some(idx::W);

    // Tail-corrected α at each accepted step past t_tail, for the doubling test.
    let mut history: Vec<(f64, f64, f64)> = Vec::new();
    let flux_tol = settings.flux_tol;
    let t_tail = settings.t_tail;
    let tail_cut = settings.tail_cut;
    let trajectory = integrate_until(&RadialSystem { n, depth }, &y0, &cfg, track, |t, y| {
        if t < t_tail {
            return Control::Continue;
        }
        let lim = tail_limits(n, t, y);
        history.push((t, lim.alpha, lim.alpha_prime));
        let Some(&(_, prev, prev_d)) = history.iter().rev().find(|(s, _, _)| *s <= t - LN_2) else {
            return Control::Continue;
        };
        let mut done = (lim.alpha - prev).abs() <= flux_tol * lim.alpha;
        if depth >= Depth::Linear {
            done &= (lim.alpha_prime - prev_d).abs() <= flux_tol * lim.alpha_prime.abs().max(1.0);
            // The remainder quadrature is costly, so it is checked last.
            done = done && quadrature_tail(n, t, y).residual < tail_cut;
        }
        if done {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;

    let last = trajectory.last();
    let limits = tail_limits(n, last.t, &last.y);
    let t_prev = (last.t - LN_2).max(trajectory.t_start());
    let y_prev = trajectory.sample(t_prev).expect("inside span");
    let prev = tail_limits(n, t_prev, &y_prev);
    if !(limits.alpha.is_finite() && limits.beta.is_finite()) {
        return Err(Error::NonFiniteState { t: last.t });
    }
    let change = (limits.alpha - prev.alpha).abs();
    if change > settings.flux_tol * limits.alpha || last.t < settings.t_tail {
        return Err(Error::NoConvergence {
            r_max: last.t.exp(),
            last_change: change,
        });
    }
    let tail = quadrature_tail(n, last.t, &last.y);
    Ok(RadialRun {
        params,
        limits,
        previous_alpha_prime: prev.alpha_prime,
        quadrature_tail: tail,
        tail_model: TailModel::fit(n, last.t, &last.y),
        trajectory,
    })
}

/// One shooting solution `u_a` in Emden–Fowler variables.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub params: ShootingParams,
    /// Nodes carry `(v, v')` with `v(t) = u(e^t)`.
    pub trajectory: Trajectory,
    pub alpha: f64,
    /// `lim (u(r) + α log r)`.
    pub beta: f64,
    pub r_max: f64,
    /// Raw flux `-r u'(r)` at `r_max / 2^j`, ascending in r.
    pub alpha_flux_history: Vec<(f64, f64)>,
}

/// Shoot from `u(0) = a` with the default solver and flux tolerance `tol`.
pub fn shoot(params: ShootingParams, tol: f64) -> Result<RadialProfile> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    shoot_with(params, &SolverSettings::default().with_flux_tol(tol))
}

pub fn shoot_with(params: ShootingParams, settings: &SolverSettings) -> Result<RadialProfile> {
    let run = run(params, Depth::Base, settings)?;
    Ok(RadialProfile::from_run(run))
}

/// α(a) alone.
pub fn alpha(params: ShootingParams, settings: &SolverSettings) -> Result<f64> {
    Ok(run(params, Depth::Base, settings)?.limits.alpha)
}

impl RadialProfile {
    pub(crate) fn from_run(run: RadialRun) -> Self {
        let traj = if run.trajectory.dimension() == 2 {
            run.trajectory
        } else {
            let nodes = run
                .trajectory
                .nodes
                .iter()
                .map(|nd| Node {
                    t: nd.t,
                    y: nd.y[..2].to_vec(),
                })
                .collect();
            Trajectory::from_nodes(2, nodes)
        };
        let t_end = traj.t_end();
        let mut history = Vec::new();
        let mut t = t_end;
        while t >= traj.t_start() && history.len() < 16 {
            let dv = traj.sample_component(t, idx::DV).expect("inside span");
            history.push((t.exp(), -dv));
            t -= LN_2;
        }
        history.reverse();
        Self {
            params: run.params,
            alpha: run.limits.alpha,
            beta: run.limits.beta,
            r_max: t_end.exp(),
            alpha_flux_history: history,
            trajectory: traj,
        }
    }

    pub fn n(&self) -> f64 {
        self.params.n
    }

    pub fn a(&self) -> f64 {
        self.params.a
    }

    /// `v(t) = u(e^t)` anywhere on the line: Taylor expansion before the
    /// start-up radius, the logarithmic asymptote past `r_max`.
    pub fn v_at(&self, t: f64) -> f64 {
        let traj = &self.trajectory;
        if t < traj.t_start() {
            let (n, a) = (self.params.n, self.params.a);
            let e = (2.0 * a).exp();
            let q = (2.0 * t).exp();
            a - e / 4.0 * q - e * (n - e / 2.0) / 16.0 * q * q
        } else if t > traj.t_end() {
            -self.alpha * t + self.beta
        } else {
            traj.sample_component(t, idx::V).expect("inside span")
        }
    }

    pub fn u_at(&self, r: f64) -> f64 {
        if r == 0.0 {
            self.params.a
        } else {
            self.v_at(r.ln())
        }
    }

    /// Raw flux `-r u'(r)` inside the integrated span.
    pub fn flux_at(&self, r: f64) -> Option<f64> {
        self.trajectory
            .sample_component(r.ln(), idx::DV)
            .map(|dv| -dv)
    }

    /// `∫₀^R (1+r²)^N e^{2u} r dr` by Gauss–Legendre quadrature on the step
    /// grid of the trajectory, independent of the flux component.
    pub fn mass_up_to(&self, r: f64) -> f64 {
        let t_up = r.ln().min(self.trajectory.t_end());
        let (n, a) = (self.params.n, self.params.a);
        let t_start = self.trajectory.t_start();
        // Head: W ≈ e^{2a} e^{2t}.
        let mut total = 0.5 * (2.0 * a + 2.0 * t_start).exp();
        for (lo, hi) in self.trajectory.intervals() {
            if lo >= t_up {
                break;
            }
            let hi = hi.min(t_up);
            total += gauss_legendre(lo, hi, |t| log_weight(n, t, self.v_at(t)).exp());
        }
        total
    }

    /// `max |interpolant' - f|` at step midpoints, scaled by `1 + |v''|`.
    pub fn ode_residual(&self) -> f64 {
        let traj = &self.trajectory;
        if !traj.has_dense_output() {
            return 0.0;
        }
        let n = self.params.n;
        traj.intervals()
            .map(|(lo, hi)| {
                let t = 0.5 * (lo + hi);
                let y = traj.sample(t).expect("inside span");
                let d = traj.derivative(t).expect("inside span");
                let w = log_weight(n, t, y[idx::V]).exp();
                let r0 = (d[idx::V] - y[idx::DV]).abs() / (1.0 + y[idx::DV].abs());
                let r1 = (d[idx::DV] + w).abs() / (1.0 + w);
                r0.max(r1)
            })
            .fold(0.0, f64::max)
    }

    /// Level-(N+2) check used by the Kelvin transform.
    pub fn level_offset(&self) -> f64 {
        self.alpha - (self.params.n + 2.0)
    }
}

/// Five-point Gauss–Legendre rule on `[lo, hi]`.
pub(crate) fn gauss_legendre<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    half * X
        .iter()
        .zip(W)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Closed-form explicit solution sampled on `t ∈ [log 1e-6, 40]` with step 0.05.
pub fn explicit_solution(n: f64) -> Result<RadialProfile> {
    let params = ShootingParams::new(n, a_star(n))?;
    let t0 = (1e-6f64).ln();
    let steps = ((40.0 - t0) / 0.05).round() as usize;
    let nodes: Vec<Node> = (0..=steps)
        .map(|i| {
            let t = t0 + (40.0 - t0) * i as f64 / steps as f64;
            let v = a_star(n) - 0.5 * (n + 2.0) * log1p_exp2(t);
            let dv = -(n + 2.0) * 0.5 * dlog1p_exp2(t);
            Node { t, y: vec![v, dv] }
        })
        .collect();
    let r_max = 40f64.exp();
    let alpha = n + 2.0;
    let flux = |t: f64| (n + 2.0) * 0.5 * dlog1p_exp2(t);
    let history = (0..16).rev().map(|j| {
        let t = 40.0 - j as f64 * LN_2;
        (t.exp(), flux(t))
    });
    Ok(RadialProfile {
        params,
        trajectory: Trajectory::from_nodes(2, nodes),
        alpha,
        beta: a_star(n),
        r_max,
        alpha_flux_history: history.collect(),
    })
}

/// Tolerance on `|α - (N+2)|` for level-(N+2) operations.
pub const LEVEL_TOL: f64 = 1e-6;

/// Kelvin image `û(r) = u(1/r) - (N+2) log r` of a level-(N+2) profile,
/// i.e. `f̂(r) = f(1/r)` for `f = u - u*_N`. Its central value is `β(a)`.
pub fn kelvin_transform(profile: &RadialProfile) -> Result<RadialProfile> {
    kelvin_transform_with(profile, &SolverSettings::default())
}

pub fn kelvin_transform_with(
    profile: &RadialProfile,
    settings: &SolverSettings,
) -> Result<RadialProfile> {
    let expected = profile.params.n + 2.0;
    if (profile.alpha - expected).abs() > LEVEL_TOL * expected {
        return Err(Error::LevelMismatch {
            alpha: profile.alpha,
            expected,
        });
    }
    shoot_with(
        ShootingParams::new(profile.params.n, profile.beta)?,
        settings,
    )
}

/// `max |v̂(t) - v(-t) + (N+2) t|` over the overlap of the image's span with
/// the reflected span of the original.
pub fn kelvin_reflection_residual(original: &RadialProfile, image: &RadialProfile) -> f64 {
    let n = original.params.n;
    let lo = image
        .trajectory
        .t_start()
        .max(-original.trajectory.t_end())
        .max(-15.0);
    let hi = image
        .trajectory
        .t_end()
        .min(-original.trajectory.t_start())
        .min(15.0);
    (0..=400)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / 400.0;
            (image.v_at(t) - (original.v_at(-t) - (n + 2.0) * t)).abs()
        })
        .fold(0.0, f64::max)
}

/// Solution lifted to the sphere by inverse stereographic projection from
/// the north pole.
#[derive(Debug, Clone)]
pub struct SphereSolution {
    pub profile: RadialProfile,
    pub lambda: f64,
    /// `∫_{S²} e^{2v} dσ` by quadrature; 1 for an exact solution.
    pub normalization: f64,
}

impl SphereSolution {
    /// `v(y)` for `y` on the unit sphere, `None` at the north pole.
    pub fn value_at(&self, y: [f64; 3]) -> Option<f64> {
        if y[2] >= 1.0 {
            return None;
        }
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt() / (1.0 - y[2]);
        Some(self.value_at_radius(r))
    }

    /// `v` as a function of the planar radius `r = |x|`.
    pub fn value_at_radius(&self, r: f64) -> f64 {
        let n = self.profile.params.n;
        self.profile.u_at(r) - 0.5 * (self.lambda.ln() - (n + 2.0) * (r * r).ln_1p()) - LN_2
    }

    /// `lim v(y) / log|y - 𝖭|` at the north pole.
    pub fn singular_coefficient(&self) -> f64 {
        self.lambda / (2.0 * PI) - (self.profile.params.n + 2.0)
    }
}

pub fn sphere_lift(profile: &RadialProfile) -> SphereSolution {
    let lambda = 2.0 * PI * profile.alpha;
    // ∫ e^{2v} dσ = (2π/λ) ∫₀^∞ (1+r²)^N e^{2u} r dr; past r_max the tail
    // is the exact remainder α - flux(r_max).
    let inner = profile.mass_up_to(profile.r_max);
    let tail = profile
        .flux_at(profile.r_max)
        .map_or(0.0, |f| profile.alpha - f);
    let normalization = 2.0 * PI / lambda * (inner + tail);
    SphereSolution {
        profile: profile.clone(),
        lambda,
        normalization,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_start_matches_deeper_start() {
        // Start at r0 and at r0/10: the two runs must agree at t = 0.
        let params = ShootingParams::new(3.0, 0.7).unwrap();
        let base = SolverSettings::default();
        let deeper = SolverSettings {
            r0: base.r0 / 10.0,
            ..base
        };
        let a = run(params, Depth::Linear, &base).unwrap();
        let b = run(params, Depth::Linear, &deeper).unwrap();
        let ya = a.trajectory.sample(0.0).unwrap();
        let yb = b.trajectory.sample(0.0).unwrap();
        for k in 0..4 {
            assert!(
                (ya[k] - yb[k]).abs() < 1e-9,
                "component {k}: {} vs {}",
                ya[k],
                yb[k]
            );
        }
        assert!((a.limits.alpha - b.limits.alpha).abs() < 1e-10);
    }

    #[test]
    fn explicit_solution_anchor() {
        let p = explicit_solution(4.0).unwrap();
        assert!((p.params.a - 0.5 * 12f64.ln()).abs() < 1e-15);
        assert!((p.params.a - 1.242_453).abs() < 1e-6);
        assert_eq!(p.alpha, 6.0);
        assert_eq!(explicit_solution(2.0).unwrap().alpha, 4.0);
        assert!(explicit_solution(0.0).is_err());
    }

    #[test]
    fn shoot_explicit_n4() {
        let p = shoot(ShootingParams::explicit(4.0), 1e-9).unwrap();
        assert!((p.alpha - 6.0).abs() < 1e-8, "alpha = {}", p.alpha);
        assert!((p.beta - a_star(4.0)).abs() < 1e-8, "beta = {}", p.beta);
        for node in p.trajectory.nodes.iter().step_by(7) {
            let exact = u_star(4.0, node.t.exp());
            assert!((node.y[0] - exact).abs() < 1e-8, "t = {}", node.t);
        }
    }

    #[test]
    fn tail_limits_are_exact_for_pure_liouville() {
        // z'' = -2 e^z has z = log(γ²/4 sech²(γ(t - c)/2)); recover γ and c.
        let (gamma, c, n, t) = (1.3_f64, 0.4_f64, 2.0_f64, 25.0_f64);
        let s = gamma * (t - c) / 2.0;
        let z = (gamma * gamma / 4.0).ln() - 2.0 * s.cosh().ln();
        let dz = -gamma * s.tanh();
        // Recover (v, v') with z = 2t + N log(1 + e^{2t}) + 2v.
        let v = 0.5 * (z - 2.0 * t - n * log1p_exp2(t));
        let dv = 0.5 * (dz - 2.0 - n * dlog1p_exp2(t));
        let lim = tail_limits(n, t, &[v, dv]);
        assert!((lim.alpha - (n + 1.0 + gamma / 2.0)).abs() < 1e-12);
        assert!((lim.beta - (gamma.ln() + gamma * c / 2.0)).abs() < 1e-10);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ShootingParams::new(-1.0, 0.0).is_err());
        assert!(ShootingParams::new(1.0, f64::NAN).is_err());
        assert!(shoot(ShootingParams { n: 1.0, a: 0.0 }, 0.0).is_err());
    }

    #[test]
    fn mass_quadrature_matches_flux() {
        let p = shoot(ShootingParams::new(6.0, 0.3).unwrap(), 1e-9).unwrap();
        for r in [0.5, 1.0, 2.0, 10.0, 1e4] {
            let flux = p.flux_at(r).unwrap();
            let mass = p.mass_up_to(r);
            assert!((flux - mass).abs() < 1e-8, "r = {r}: {flux} vs {mass}");
        }
    }

    #[test]
    fn kelvin_fixes_explicit_solution() {
        let p = shoot(ShootingParams::explicit(5.0), 1e-9).unwrap();
        let k = kelvin_transform(&p).unwrap();
        assert!((k.params.a - p.params.a).abs() < 1e-8);
        assert!(kelvin_reflection_residual(&p, &k) < 1e-7);
    }

    #[test]
    fn kelvin_rejects_off_level() {
        let p = shoot(ShootingParams::new(5.0, 0.0).unwrap(), 1e-9).unwrap();
        assert!(matches!(
            kelvin_transform(&p),
            Err(Error::LevelMismatch { .. })
        ));
    }

    #[test]
    fn sphere_lift_of_explicit_is_constant() {
        let p = shoot(ShootingParams::explicit(3.0), 1e-9).unwrap();
        let s = sphere_lift(&p);
        assert!((s.lambda - 2.0 * PI * 5.0).abs() < 1e-7);
        assert!((s.normalization - 1.0).abs() < 1e-6, "{}", s.normalization);
        let c = -0.5 * (4.0 * PI).ln();
        for r in [1e-3, 0.3, 1.0, 4.0, 100.0] {
            assert!((s.value_at_radius(r) - c).abs() < 1e-7, "r = {r}");
        }
        assert!(s.singular_coefficient().abs() < 1e-6);
        assert!(s.value_at([0.0, 0.0, 1.0]).is_none());
        assert!((s.value_at([0.6, 0.0, 0.8]).unwrap() - c).abs() < 1e-7);
    }
}

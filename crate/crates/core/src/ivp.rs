//! Adaptive Dormand–Prince 5(4) integrator with continuous output and
//! sign-change event detection.
//!
//! Every accepted step keeps its fourth-order dense-output polynomial, so a
//! [`Trajectory`] can be evaluated anywhere inside its span. Zeros of one
//! tracked component are bracketed on the interpolant and polished with
//! [`crate::roots::brent`].

use crate::error::{Error, Result};
use crate::roots::brent;

/// Any state component beyond this magnitude is treated as blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e150;

/// Absolute precision of event times.
pub const EVENT_TOL: f64 = 1e-12;

/// First-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dimension(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);

    fn description(&self) -> &str {
        ""
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dimension: usize,
    rhs: F,
    description: String,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dimension: usize, description: impl Into<String>, rhs: F) -> Self {
        Self {
            dimension,
            rhs,
            description: description.into(),
        }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.rhs)(t, y, dydt)
    }

    fn description(&self) -> &str {
        &self.description
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Integration runs from `t_span.0` towards `t_span.1`; a reversed span
    /// integrates backwards.
    pub t_span: (f64, f64),
    /// Overrides the automatic starting step.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 200_000,
            t_span: (0.0, 1.0),
            initial_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_span(mut self, t0: f64, t1: f64) -> Self {
        self.t_span = (t0, t1);
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.t_span;
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
            return Err(Error::InvalidConfig(format!(
                "degenerate span ({t0}, {t1})"
            )));
        }
        if !(self.max_step > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "max_step and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub t: f64,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub component: usize,
}

/// Dense-output polynomial of one accepted step, Hairer's `contd5` layout.
#[derive(Debug, Clone, PartialEq)]
struct DenseSegment {
    t0: f64,
    h: f64,
    /// Five coefficient blocks of length `dim`, stored back to back.
    coeffs: Vec<f64>,
}

impl DenseSegment {
    fn eval(&self, dim: usize, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let c = &self.coeffs;
        for i in 0..dim {
            out[i] = c[i]
                + theta
                    * (c[dim + i]
                        + theta1
                            * (c[2 * dim + i]
                                + theta * (c[3 * dim + i] + theta1 * c[4 * dim + i])));
        }
    }

    fn eval_derivative(&self, dim: usize, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let c = &self.coeffs;
        // d/dθ of r1 + θ r2 + θ(1-θ) r3 + θ²(1-θ) r4 + θ²(1-θ)² r5
        let d3 = 1.0 - 2.0 * th;
        let d4 = 2.0 * th - 3.0 * th * th;
        let d5 = 2.0 * th * (1.0 - th) * (1.0 - 2.0 * th);
        for i in 0..dim {
            out[i] = (c[dim + i] + d3 * c[2 * dim + i] + d4 * c[3 * dim + i] + d5 * c[4 * dim + i])
                / self.h;
        }
    }

    fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h > 0.0 {
            (self.t0, self.t0 + self.h)
        } else {
            (self.t0 + self.h, self.t0)
        };
        t >= lo && t <= hi
    }
}

/// Accepted nodes, their dense-output segments, and detected zero crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dimension: usize,
    pub nodes: Vec<Node>,
    pub events: Vec<Event>,
    segments: Vec<DenseSegment>,
}

impl Trajectory {
    /// Trajectory built from samples only; evaluation between nodes falls
    /// back to linear interpolation.
    pub fn from_nodes(dimension: usize, nodes: Vec<Node>) -> Self {
        Self {
            dimension,
            nodes,
            events: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }

    pub fn last(&self) -> &Node {
        &self.nodes[self.nodes.len() - 1]
    }

    pub fn has_dense_output(&self) -> bool {
        !self.segments.is_empty()
    }

    fn forward(&self) -> bool {
        self.nodes.len() < 2 || self.nodes[1].t > self.nodes[0].t
    }

    /// Index of the node interval containing `t`.
    fn locate(&self, t: f64) -> Option<usize> {
        let n = self.nodes.len();
        if n < 2 {
            return (n == 1 && t == self.nodes[0].t).then_some(0);
        }
        let fwd = self.forward();
        let (lo, hi) = if fwd {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        if !(t >= lo && t <= hi) {
            return None;
        }
        let idx = self
            .nodes
            .partition_point(|node| if fwd { node.t <= t } else { node.t >= t });
        Some(idx.saturating_sub(1).min(n - 2))
    }

    /// State at `t`, or `None` outside the integrated span.
    pub fn sample(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dimension];
        self.sample_into(t, &mut out).then_some(out)
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) -> bool {
        let Some(i) = self.locate(t) else {
            return false;
        };
        if self.nodes.len() == 1 {
            out.copy_from_slice(&self.nodes[0].y);
            return true;
        }
        if let Some(seg) = self.segments.get(i) {
            debug_assert!(seg.contains(t));
            seg.eval(self.dimension, t, out);
        } else {
            let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
            let w = (t - a.t) / (b.t - a.t);
            for k in 0..self.dimension {
                out[k] = a.y[k] + w * (b.y[k] - a.y[k]);
            }
        }
        true
    }

    pub fn sample_component(&self, t: f64, component: usize) -> Option<f64> {
        self.sample(t).map(|y| y[component])
    }

    /// Time derivative of the interpolant at `t`.
    pub fn derivative(&self, t: f64) -> Option<Vec<f64>> {
        let i = self.locate(t)?;
        let mut out = vec![0.0; self.dimension];
        if let Some(seg) = self.segments.get(i) {
            seg.eval_derivative(self.dimension, t, &mut out);
        } else {
            if self.nodes.len() < 2 {
                return None;
            }
            let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
            for k in 0..self.dimension {
                out[k] = (b.y[k] - a.y[k]) / (b.t - a.t);
            }
        }
        Some(out)
    }

    /// Step intervals `[t_i, t_{i+1}]` of the underlying grid.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.windows(2).map(|w| (w[0].t, w[1].t))
    }
}

/// Returned by the stop callback of [`integrate_until`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Integrate over `config.t_span`.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    config: &IntegratorConfig,
    track_zero_of: Option<usize>,
) -> Result<Trajectory> {
    integrate_until(system, y0, config, track_zero_of, |_, _| Control::Continue)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    dir: f64,
) -> f64 {
    let n = y0.len();
    let sk: Vec<f64> = y0
        .iter()
        .map(|y| cfg.abs_tol + cfg.rel_tol * y.abs())
        .collect();
    let dnf = (f0
        .iter()
        .zip(&sk)
        .map(|(f, s)| (f / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let dny = (y0
        .iter()
        .zip(&sk)
        .map(|(y, s)| (y / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let span = (cfg.t_span.1 - cfg.t_span.0).abs();
    let hmax = cfg.max_step.min(span);
    let mut h = if dnf <= 1e-5 || dny <= 1e-5 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(hmax);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h * f).collect();
    let mut f1 = vec![0.0; n];
    system.rhs(t0 + dir * h, &y1, &mut f1);
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(&sk)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h;
    let der12 = der2.abs().max(dnf);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    let h = (100.0 * h).min(h1).min(hmax);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6_f64.min(hmax)
    }
}

/// Integrate until the span end or until `stop` returns [`Control::Stop`]
/// after an accepted step.
pub fn integrate_until<S, F>(
    system: &S,
    y0: &[f64],
    config: &IntegratorConfig,
    track_zero_of: Option<usize>,
    mut stop: F,
) -> Result<Trajectory>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> Control,
{
    config.validate()?;
    let dim = system.dimension();
    if dim == 0 || y0.len() != dim {
        return Err(Error::InvalidConfig(format!(
            "initial state has length {} but system dimension is {dim}",
            y0.len()
        )));
    }
    if let Some(c) = track_zero_of {
        if c >= dim {
            return Err(Error::InvalidConfig(format!(
                "tracked component {c} out of range"
            )));
        }
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: config.t_span.0 });
    }

    let (t_start, t_final) = config.t_span;
    let dir = (t_final - t_start).signum();
    let rtol = config.rel_tol;
    let atol = config.abs_tol;

    let mut t = t_start;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    system.rhs(t, &y, &mut k1);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    let mut h = config
        .initial_step
        .unwrap_or_else(|| initial_step(system, t, &y, &k1, config, dir))
        .abs();

    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut traj = Trajectory {
        dimension: dim,
        nodes: vec![Node { t, y: y.clone() }],
        events: Vec::new(),
        segments: Vec::new(),
    };
    let mut last_sign = track_zero_of.and_then(|c| (y[c] != 0.0).then(|| y[c].signum()));
    let mut fac_old: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    loop {
        if (t_final - t) * dir <= 0.0 {
            break;
        }
        if steps >= config.max_steps {
            return Err(Error::StepLimitExceeded { t, steps });
        }
        h = h.min(config.max_step);
        let remaining = (t_final - t).abs();
        let last_step = h >= remaining * (1.0 - 1e-12);
        if last_step {
            h = remaining;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::NonFiniteState { t });
        }
        let hs = dir * h;
        steps += 1;

        for i in 0..dim {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        system.rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        system.rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last_step { t_final } else { t + hs };
        system.rhs(t_new, &ytmp, &mut k6);
        for i in 0..dim {
            y1[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        system.rhs(t_new, &y1, &mut k7);
        for i in 0..dim {
            err[i] =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }

        let finite = y1.iter().chain(&k7).chain(&err).all(|v| v.is_finite());
        let err_norm = if finite {
            error_norm(&err, &y, &y1, rtol, atol)
        } else {
            f64::INFINITY
        };

        if err_norm <= 1.0 {
            if y1.iter().any(|v| v.abs() > BLOWUP_THRESHOLD) {
                return Err(Error::NonFiniteState { t: t_new });
            }
            // Dense output coefficients.
            let mut coeffs = vec![0.0; 5 * dim];
            for i in 0..dim {
                let ydiff = y1[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                coeffs[i] = y[i];
                coeffs[dim + i] = ydiff;
                coeffs[2 * dim + i] = bspl;
                coeffs[3 * dim + i] = ydiff - hs * k7[i] - bspl;
                coeffs[4 * dim + i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = DenseSegment {
                t0: t,
                h: hs,
                coeffs,
            };

            if let Some(c) = track_zero_of {
                locate_events(&seg, dim, c, t, t_new, &mut last_sign, &mut traj.events);
            }

            traj.segments.push(seg);
            traj.nodes.push(Node {
                t: t_new,
                y: y1.clone(),
            });
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);

            let fac11 = err_norm.powf(0.2 - BETA * 0.75);
            let mut fac = fac11 / fac_old.powf(BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err_norm.max(1e-4);
            let mut h_new = h / fac;
            if rejected_last {
                h_new = h_new.min(h);
            }
            rejected_last = false;
            h = h_new;

            if last_step || stop(t, &y) == Control::Stop {
                break;
            }
        } else {
            let shrink = if finite {
                (err_norm.powf(0.2 - BETA * 0.75) / SAFETY).min(1.0 / FAC_MIN)
            } else {
                10.0
            };
            h /= shrink;
            rejected_last = true;
        }
    }
    Ok(traj)
}

/// Scan one accepted step for sign changes of component `c` on the dense
/// interpolant and polish each one.
fn locate_events(
    seg: &DenseSegment,
    dim: usize,
    c: usize,
    t0: f64,
    t1: f64,
    last_sign: &mut Option<f64>,
    events: &mut Vec<Event>,
) {
    const SUB: usize = 8;
    let mut buf = vec![0.0; dim];
    let mut value = |t: f64| {
        seg.eval(dim, t, &mut buf);
        buf[c]
    };
    let mut prev_t = t0;
    let mut prev_v = value(t0);
    for j in 1..=SUB {
        let tj = if j == SUB {
            t1
        } else {
            t0 + (t1 - t0) * j as f64 / SUB as f64
        };
        let vj = value(tj);
        if vj == 0.0 {
            events.push(Event {
                t: tj,
                component: c,
            });
            *last_sign = None;
        } else {
            let s = vj.signum();
            // A zero sample at prev_t has already been recorded.
            if matches!(*last_sign, Some(prev) if prev != s) && prev_v != 0.0 {
                if let Some(r) = brent(&mut value, prev_t, tj, prev_v, vj, EVENT_TOL, 200) {
                    events.push(Event { t: r, component: c });
                }
            }
            *last_sign = Some(s);
        }
        prev_t = tj;
        prev_v = vj;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator() -> impl OdeSystem {
        FnSystem::new(2, "harmonic oscillator", |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        })
    }

    #[test]
    fn constant_system_has_no_events() {
        let sys = FnSystem::new(1, "y' = 0", |_t, _y: &[f64], dy: &mut [f64]| dy[0] = 0.0);
        let cfg = IntegratorConfig::default().with_span(0.0, 10.0);
        let traj = integrate(&sys, &[1.0], &cfg, Some(0)).unwrap();
        assert!(traj.events.is_empty());
        assert!(traj.nodes.iter().all(|n| n.y[0] == 1.0));
        assert_eq!(traj.t_end(), 10.0);
    }

    #[test]
    fn sine_zero_at_pi() {
        let cfg = IntegratorConfig::default().with_span(0.0, 2.0 * PI);
        let traj = integrate(&oscillator(), &[0.0, 1.0], &cfg, Some(0)).unwrap();
        let interior: Vec<_> = traj
            .events
            .iter()
            .filter(|e| e.t > 1e-9 && e.t < 2.0 * PI - 1e-6)
            .collect();
        assert_eq!(interior.len(), 1, "{:?}", traj.events);
        assert!((interior[0].t - PI).abs() < 1e-10, "{}", interior[0].t - PI);
    }

    #[test]
    fn dense_output_matches_closed_form() {
        let cfg = IntegratorConfig::default().with_span(0.0, 10.0);
        let traj = integrate(&oscillator(), &[0.0, 1.0], &cfg, None).unwrap();
        assert!(traj.has_dense_output());
        for i in 0..=1000 {
            let t = 10.0 * i as f64 / 1000.0;
            let y = traj.sample(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t = {t}");
            assert!((y[1] - t.cos()).abs() < 1e-8);
            let d = traj.derivative(t).unwrap();
            assert!((d[0] - t.cos()).abs() < 1e-6);
        }
        assert!(traj.sample(10.5).is_none());
    }

    #[test]
    fn forward_then_backward_returns() {
        let cfg = IntegratorConfig::default().with_span(0.0, 5.0);
        let fwd = integrate(&oscillator(), &[0.3, -0.2], &cfg, None).unwrap();
        let back_cfg = IntegratorConfig::default().with_span(5.0, 0.0);
        let back = integrate(&oscillator(), &fwd.last().y, &back_cfg, None).unwrap();
        let y = &back.last().y;
        assert!((y[0] - 0.3).abs() < 100.0 * cfg.rel_tol);
        assert!((y[1] + 0.2).abs() < 100.0 * cfg.rel_tol);
        assert!(back.sample(2.5).is_some());
    }

    #[test]
    fn blowup_is_reported() {
        // y' = y^2, y(0) = 1 blows up at t = 1.
        let sys = FnSystem::new(1, "riccati", |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0]
        });
        let cfg = IntegratorConfig::default().with_span(0.0, 2.0);
        assert!(matches!(
            integrate(&sys, &[1.0], &cfg, None),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn step_limit_is_reported() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..IntegratorConfig::default().with_span(0.0, 100.0)
        };
        assert!(matches!(
            integrate(&oscillator(), &[0.0, 1.0], &cfg, None),
            Err(Error::StepLimitExceeded { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = IntegratorConfig::default().with_span(0.0, 1.0);
        assert!(integrate(&oscillator(), &[0.0], &cfg, None).is_err());
        let bad = IntegratorConfig {
            rel_tol: 0.0,
            ..cfg.clone()
        };
        assert!(integrate(&oscillator(), &[0.0, 1.0], &bad, None).is_err());
        assert!(integrate(&oscillator(), &[0.0, 1.0], &cfg, Some(5)).is_err());
    }

    #[test]
    fn refinement_converges_and_is_deterministic() {
        let cfg = IntegratorConfig::default().with_span(0.0, 2.0 * PI);
        let fine = IntegratorConfig {
            rel_tol: cfg.rel_tol / 2.0,
            abs_tol: cfg.abs_tol / 2.0,
            ..cfg.clone()
        };
        let a = integrate(&oscillator(), &[1.0, 0.0], &cfg, Some(1)).unwrap();
        let b = integrate(&oscillator(), &[1.0, 0.0], &fine, Some(1)).unwrap();
        for i in 0..=100 {
            let t = 2.0 * PI * i as f64 / 100.0;
            let (ya, yb) = (a.sample(t).unwrap(), b.sample(t).unwrap());
            for k in 0..2 {
                assert!((ya[k] - yb[k]).abs() < 10.0 * cfg.rel_tol);
            }
        }
        let again = integrate(&oscillator(), &[1.0, 0.0], &cfg, Some(1)).unwrap();
        assert_eq!(a.events, again.events);
    }
}

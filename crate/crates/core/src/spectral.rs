//! Exact Legendre layer: polynomials, the bifurcation levels `N_k`, `μ_k`,
//! the index `𝔑(N)` and the cubic moments `j(k)`, all in rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::radial::a_star;
use crate::variational::LinearizedProfile;

/// Relative tolerance when matching a linearized profile to `(N_k, a*_{N_k})`.
const PARAM_MATCH_TOL: f64 = 1e-12;

/// A polynomial with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegendrePoly {
    pub degree: usize,
    pub coefficients: Vec<BigRational>,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl LegendrePoly {
    pub fn eval(&self, s: &BigRational) -> BigRational {
        self.coefficients
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * s + c)
    }

    pub fn eval_f64(&self, s: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * s + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn mul(&self, other: &LegendrePoly) -> LegendrePoly {
        let mut out =
            vec![BigRational::zero(); self.coefficients.len() + other.coefficients.len() - 1];
        for (i, a) in self.coefficients.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coefficients.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LegendrePoly {
            degree: self.degree + other.degree,
            coefficients: out,
        }
    }

    /// `∫₋₁¹ p(s) ds`, monomial by monomial.
    pub fn integral(&self) -> BigRational {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 2 == 0)
            .fold(BigRational::zero(), |acc, (i, c)| {
                acc + c * rat(2) / rat(i as i64 + 1)
            })
    }

    /// Sign changes on a fine grid of `(−1, 1)`; every zero of a Legendre
    /// polynomial is simple, so this counts them.
    pub fn zeros_in_open_interval(&self) -> usize {
        let m = 200 * (self.degree + 1);
        let mut count = 0;
        let mut prev = self.eval_f64(-1.0 + 1.0 / m as f64);
        for i in 1..m {
            let s = -1.0 + (2 * i + 1) as f64 / m as f64;
            if s >= 1.0 {
                break;
            }
            let v = self.eval_f64(s);
            if v != 0.0 && v.signum() != prev.signum() {
                count += 1;
            }
            if v != 0.0 {
                prev = v;
            }
        }
        count
    }
}

/// `P_k` from `(k+1)P_{k+1} = (2k+1) s P_k − k P_{k−1}`.
pub fn legendre(k: usize) -> LegendrePoly {
    let mut prev = vec![rat(1)];
    if k == 0 {
        return LegendrePoly {
            degree: 0,
            coefficients: prev,
        };
    }
    let mut cur = vec![rat(0), rat(1)];
    for m in 1..k {
        let mut next = vec![BigRational::zero(); m + 2];
        let a = rat(2 * m as i64 + 1) / rat(m as i64 + 1);
        let b = rat(m as i64) / rat(m as i64 + 1);
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += &a * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= &b * c;
        }
        prev = cur;
        cur = next;
    }
    LegendrePoly {
        degree: k,
        coefficients: cur,
    }
}

/// `𝔑(N) = (−1 + √(1 + 4(N+2))) / 2`.
pub fn frak_n(n: f64) -> Result<f64> {
    if !(n > -2.0) {
        return Err(Error::InvalidParameter(format!(
            "index needs N > -2, got {n}"
        )));
    }
    Ok(0.5 * (-1.0 + (1.0 + 4.0 * (n + 2.0)).sqrt()))
}

/// `Some(k)` when `𝔑(N)` is an integer to within 1e-12.
pub fn frak_n_integer(n: f64) -> Option<u64> {
    let v = frak_n(n).ok()?;
    let k = v.round();
    ((v - k).abs() < 1e-12).then_some(k as u64)
}

/// `N_k = k(k+1) − 2`.
pub fn n_k(k: u32) -> f64 {
    let k = k as f64;
    k * (k + 1.0) - 2.0
}

/// `j(k) = ½ k(k+1) ∫₋₁¹ P_k³`, by exact cubing.
pub fn gaunt_j(k: usize) -> BigRational {
    let p = legendre(k);
    let cube = p.mul(&p).mul(&p);
    rat((k * (k + 1)) as i64) / rat(2) * cube.integral()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConstants {
    pub k: u32,
    pub n_k: f64,
    pub mu_k: f64,
    pub j_k: BigRational,
}

impl SpectralConstants {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "spectral constants need k >= 2, got {k}"
            )));
        }
        let kf = k as f64;
        Ok(Self {
            k,
            n_k: n_k(k),
            mu_k: 2.0 * kf * (kf + 1.0),
            j_k: gaunt_j(k as usize),
        })
    }

    pub fn row(&self) -> SpectralRow {
        SpectralRow {
            k: self.k,
            n_k: self.n_k,
            mu_k: self.mu_k,
            j_k_numerator: self.j_k.numer().to_string(),
            j_k_denominator: self.j_k.denom().to_string(),
        }
    }
}

/// Serializable table row; the rational is carried as decimal strings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralRow {
    pub k: u32,
    #[serde(rename = "N_k")]
    pub n_k: f64,
    pub mu_k: f64,
    pub j_k_numerator: String,
    pub j_k_denominator: String,
}

pub fn spectral_table(k_max: u32) -> Vec<SpectralConstants> {
    (2..=k_max)
        .map(|k| SpectralConstants::new(k).expect("k >= 2"))
        .collect()
}

/// `max |φ(r) − P_k(s)|` over a log-spaced grid, `s = (1−r²)/(1+r²)`.
///
/// `φ(0) = 1 = P_k(1)`, so the centre maps to `s = 1`.
pub fn legendre_residual(k: u32, profile: &LinearizedProfile) -> Result<f64> {
    let n = n_k(k);
    let a = a_star(n);
    let p = profile.params;
    if (p.n - n).abs() > PARAM_MATCH_TOL * n || (p.a - a).abs() > PARAM_MATCH_TOL * a.abs().max(1.0)
    {
        return Err(Error::ParamMismatch(format!(
            "profile at (N, a) = ({}, {}) but k = {k} needs ({n}, {a})",
            p.n, p.a
        )));
    }
    let poly = legendre(k as usize);
    let (t0, t1) = (
        profile.phi_trajectory.t_start().max(-15.0),
        profile.phi_trajectory.t_end().min(15.0),
    );
    let m = 2001;
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let t = t0 + (t1 - t0) * i as f64 / (m - 1) as f64;
        let s = -t.tanh();
        let phi = profile.phi_at(t.exp());
        worst = worst.max((phi - poly.eval_f64(s)).abs());
    }
    Ok(worst)
}

/// Whether `j(k)` is exactly zero, positive or negative.
pub fn j_sign(k: usize) -> i8 {
    let j = gaunt_j(k);
    if j.is_zero() {
        0
    } else if j.is_positive() {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn factorial(n: u64) -> BigInt {
        (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
    }

    /// `(k k k; 0 0 0)²` from the closed form for the zero-projection 3j
    /// symbol, with `J = 3k` even and `g = J/2`.
    fn three_j_squared(k: u64) -> BigRational {
        if (3 * k) % 2 == 1 {
            return BigRational::zero();
        }
        let g = 3 * k / 2;
        let num = factorial(k).pow(3) * factorial(g).pow(2);
        let den = factorial(3 * k + 1) * factorial(g - k).pow(6);
        BigRational::new(num, den)
    }

    #[test]
    fn low_degrees() {
        assert_eq!(legendre(0).coefficients, vec![rat(1)]);
        let p2 = legendre(2);
        assert_eq!(
            p2.coefficients,
            vec![rat(-1) / rat(2), rat(0), rat(3) / rat(2)]
        );
        assert_eq!(legendre(3).eval(&rat(0)), rat(0));
    }

    #[test]
    fn normalization_parity_and_zeros() {
        for k in 0..=15 {
            let p = legendre(k);
            assert_eq!(p.eval(&rat(1)), rat(1));
            for (i, c) in p.coefficients.iter().enumerate() {
                if (i + k) % 2 == 1 {
                    assert!(c.is_zero(), "P_{k} has coefficient of wrong parity at {i}");
                }
            }
            assert_eq!(p.zeros_in_open_interval(), k);
        }
    }

    #[test]
    fn orthogonality_is_exact() {
        for j in 0..=8 {
            for k in 0..=8 {
                let ip = legendre(j).mul(&legendre(k)).integral();
                let expected = if j == k {
                    rat(2) / rat(2 * k as i64 + 1)
                } else {
                    rat(0)
                };
                assert_eq!(ip, expected, "<P_{j}, P_{k}>");
            }
        }
    }

    #[test]
    fn cubic_moments_match_three_j_symbols() {
        for k in 2..=15u64 {
            let direct = gaunt_j(k as usize);
            let oracle = rat((k * (k + 1)) as i64) / rat(2) * rat(2) * three_j_squared(k);
            assert_eq!(direct, oracle, "k = {k}");
        }
        assert_eq!(gaunt_j(2), rat(12) / rat(35));
    }

    #[test]
    fn j_vanishes_exactly_for_odd_k() {
        for k in 2..=15 {
            assert_eq!(j_sign(k), if k % 2 == 1 { 0 } else { 1 }, "k = {k}");
        }
    }

    #[test]
    fn index_function() {
        assert_eq!(frak_n(4.0).unwrap(), 2.0);
        assert_eq!(frak_n(10.0).unwrap(), 3.0);
        assert!((frak_n(5.0).unwrap() - 2.192_582_403_567_252).abs() < 1e-12);
        assert_eq!(frak_n_integer(5.0), None);
        for k in 2..=40 {
            assert_eq!(frak_n_integer(n_k(k)), Some(k as u64));
        }
        assert!(frak_n(-2.0).is_err());
    }

    #[test]
    fn constants_table() {
        let t = spectral_table(15);
        assert_eq!(t.len(), 14);
        for w in t.windows(2) {
            assert!(w[1].n_k > w[0].n_k);
        }
        for c in &t {
            assert_eq!(c.mu_k, 2.0 * (c.n_k + 2.0));
        }
        assert_eq!(t[0].row().j_k_numerator, "12");
        assert_eq!(t[0].row().j_k_denominator, "35");
    }

    #[test]
    fn linearized_profile_is_legendre_at_n_k() {
        use crate::radial::{ShootingParams, SolverSettings};
        use crate::variational::linearize_params;
        for k in 2..=4 {
            let lin =
                linearize_params(ShootingParams::explicit(n_k(k)), &SolverSettings::default())
                    .unwrap();
            let res = legendre_residual(k, &lin).unwrap();
            assert!(res < 1e-7, "k = {k}: {res:e}");
        }
        let off =
            linearize_params(ShootingParams::explicit(5.0), &SolverSettings::default()).unwrap();
        assert!(matches!(
            legendre_residual(2, &off),
            Err(Error::ParamMismatch(_))
        ));
    }
}

//! Normal tail primitives and the relative-error envelopes for the sum and
//! Student t tails.
//!
//! Envelopes take the absolute constant `A` explicitly. Out-of-range `x` is
//! never an error; the result carries an `in_range` flag instead.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::population::{valid_x_range, Design, PopulationMoments};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail `1 - Phi(x)`.
pub fn normal_tail(x: f64) -> f64 {
    if x > 8.0 {
        // erfc underflows long before the tail does; go through the Mills ratio.
        return mills_psi(x) * normal_pdf(x);
    }
    0.5 * erfc(x / SQRT_2)
}

/// `Phi(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    normal_tail(-x)
}

/// Mills ratio `psi(t) = (1 - Phi(t)) / phi(t)`.
pub fn mills_psi(t: f64) -> f64 {
    if t <= 8.0 {
        return 0.5 * erfc(t / SQRT_2) / normal_pdf(t);
    }
    // Continued fraction 1/(t + 1/(t + 2/(t + 3/(t + ...)))), modified Lentz.
    let tiny = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = t + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = t + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `log(1 - Phi(x))`, finite for all finite `x`.
pub fn log_normal_tail(x: f64) -> f64 {
    if x > 8.0 {
        mills_psi(x).ln() - 0.5 * x * x - 0.5 * (2.0 * PI).ln()
    } else {
        normal_tail(x).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelope {
    pub lower: f64,
    pub upper: f64,
    pub x: f64,
    pub a_const: f64,
    pub beta3: f64,
    pub omega: f64,
    /// Exponent `A (1 + x)^3 beta3 / omega`.
    pub exponent: f64,
    pub in_range: bool,
}

impl BoundEnvelope {
    pub fn contains(&self, ratio: f64) -> bool {
        ratio >= self.lower && ratio <= self.upper
    }
}

fn relative_exponent(x: f64, m: &PopulationMoments, d: &Design, a_const: f64) -> f64 {
    a_const * (1.0 + x).powi(3) * m.beta3 / d.omega
}

fn check_a(a_const: f64) -> Result<()> {
    if a_const > 0.0 && a_const.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("A = {a_const} must be positive")))
    }
}

/// Envelope `[exp(-E), exp(E)]`, `E = A (1 + x)^3 beta3 / omega`, for the
/// ratio of the sum (or t) tail to `1 - Phi(x)`.
pub fn envelope(x: f64, m: &PopulationMoments, d: &Design, a_const: f64) -> Result<BoundEnvelope> {
    check_a(a_const)?;
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("x = {x} must be nonnegative")));
    }
    let e = relative_exponent(x, m, d, a_const);
    let range = valid_x_range(m, d, a_const)?;
    Ok(BoundEnvelope {
        lower: (-e).exp(),
        upper: e.exp(),
        x,
        a_const,
        beta3: m.beta3,
        omega: d.omega,
        exponent: e,
        in_range: x <= range.sum_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramerBand {
    /// `A (1 + x)^3 beta3 / omega`.
    pub relative_band: f64,
    /// Nonuniform Berry-Esseen bound `A (1 + |x|)^2 exp(-x^2/2) beta3 / omega`.
    pub be_bound: f64,
    pub in_range: bool,
}

pub fn cramer_band(x: f64, m: &PopulationMoments, d: &Design, a_const: f64) -> Result<CramerBand> {
    check_a(a_const)?;
    let range = valid_x_range(m, d, a_const)?;
    let ax = x.abs();
    Ok(CramerBand {
        relative_band: relative_exponent(ax, m, d, a_const),
        be_bound: a_const * (1.0 + ax).powi(2) * (-0.5 * x * x).exp() * m.beta3 / d.omega,
        in_range: ax <= range.cramer,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct X0Result {
    pub x0: f64,
    pub b0: f64,
    /// `|x0 / x - 1|`, zero at `x = 0`.
    pub rel_dev: f64,
}

/// `x0 = x sqrt(n) / sqrt(n + x^2 q - 1)`; `P(t_n >= x) = P(S_n / V_n >= x0 sqrt(q))`.
pub fn x0_transform(x: f64, n: usize, q: f64, omega: f64) -> Result<X0Result> {
    let nf = n as f64;
    let radicand = nf + x * x * q - 1.0;
    if !(radicand > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "n + x^2 q - 1 = {radicand} must be positive"
        )));
    }
    let x0 = x * nf.sqrt() / radicand.sqrt();
    let rel_dev = if x == 0.0 { 0.0 } else { (x0 / x - 1.0).abs() };
    Ok(X0Result {
        x0,
        b0: x0 / omega,
        rel_dev,
    })
}

/// Smallest `A` whose envelope at `x` contains `ratio`.
pub fn implied_a(ratio: f64, x: f64, m: &PopulationMoments, d: &Design) -> Result<f64> {
    if !(ratio > 0.0) || !(x > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio = {ratio} and x = {x} must be positive"
        )));
    }
    Ok(ratio.ln().abs() * d.omega / ((1.0 + x).powi(3) * m.beta3))
}

/// Smallest constant in the relative band `|ratio - 1| <= C (1 + x)^3 beta3 / omega`.
/// Unlike [`implied_a`] this need not share a value with the envelope constant.
pub fn implied_band_constant(ratio: f64, x: f64, m: &PopulationMoments, d: &Design) -> Result<f64> {
    if !(ratio > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio = {ratio} must be positive and x = {x} nonnegative"
        )));
    }
    Ok((ratio - 1.0).abs() * d.omega / ((1.0 + x).powi(3) * m.beta3))
}

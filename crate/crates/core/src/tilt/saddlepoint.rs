//! Gaussian-tilted tail approximations for sample sums.
//!
//! Under the law tilted by `e^{uT}` the sample sum `T` is close to normal
//! with mean `m_N(u)` and variance `sigma_N^2(u)`. Integrating that normal
//! against `e^{-uT}` above the threshold gives
//! `E e^{uT} e^{-uy} e^{-eps^2/2} psi(eps + u sigma_N) / sqrt(2 pi)` with
//! `eps = (y - m_N) / sigma_N`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_len, log_gn, tilt_state, TiltState};
use crate::bounds::mills_psi;
use crate::error::{Error, Result};
use crate::population::{Design, Population};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddlepointTail {
    /// Approximation of `P(T >= y)`.
    pub value: f64,
    pub log_value: f64,
    /// Threshold after centring the coefficients.
    pub y: f64,
    pub u: f64,
    /// `(y - m_N) / sigma_N`; zero up to tolerance when mean-matched.
    pub eps: f64,
    pub state: TiltState,
    /// `x beta3 / omega * psi(x) / sqrt(2 pi)` with `x = y / sd(T)`: the
    /// shape of the dropped remainder, to be scaled by a constant.
    pub remainder_scale: f64,
}

impl SaddlepointTail {
    /// Magnitude of the dropped remainder for an assumed constant.
    pub fn remainder_bound(&self, constant: f64) -> f64 {
        constant.abs() * self.remainder_scale
    }
}

fn centred(coeffs: &[f64], n: usize, y: f64) -> (Vec<f64>, f64) {
    let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
    (coeffs.iter().map(|b| b - mean).collect(), y - n as f64 * mean)
}

fn log_mgf(state: &TiltState, d: &Design) -> f64 {
    state.k_sum - log_gn(d) - 0.5 * state.k2_sum.ln()
}

/// Finds `u >= 0` with `m_N(u) = y` for coefficients summing to zero.
///
/// `m_N` is increasing in `u` with derivative `sigma_N^2`, so Newton steps
/// are safeguarded by a bracket that is first grown by doubling.
pub fn solve_tilt_for_mean(coeffs: &[f64], p: f64, y: f64) -> Result<TiltState> {
    let tol = 1e-9 * y.abs().max(1.0);
    let at = |u: f64| tilt_state(coeffs, p, u);
    let mut state = at(0.0)?;
    if (state.m_n - y).abs() <= tol {
        return Ok(state);
    }
    if y < 0.0 {
        return Err(Error::OutOfRange(format!("threshold {y} below the mean")));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        let s = at(hi)?;
        if s.m_n >= y {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NoConvergence(format!(
                "no tilt reaches mean {y}; bracket [{lo}, {hi}]"
            )));
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        state = at(u)?;
        let f = state.m_n - y;
        if f.abs() <= tol {
            return Ok(state);
        }
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - f / state.sigma_n2;
        let next = if state.sigma_n2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        u = next;
    }
    Err(Error::NoConvergence(format!(
        "tilt solve for mean {y} stalled in [{lo}, {hi}], residual {:e}",
        (state.m_n - y).abs()
    )))
}

fn assemble(
    coeffs: &[f64],
    d: &Design,
    y: f64,
    state: TiltState,
) -> SaddlepointTail {
    let sigma = state.sigma_n2.sqrt();
    let u = state.u;
    let eps = if sigma > 0.0 { (y - state.m_n) / sigma } else { 0.0 };
    let psi = mills_psi(eps + u * sigma);
    let log_value =
        log_mgf(&state, d) - u * y - 0.5 * eps * eps + psi.ln() - 0.5 * (2.0 * PI).ln();

    let big_n = coeffs.len() as f64;
    let var_b = coeffs.iter().map(|b| b * b).sum::<f64>() / big_n;
    let abs3 = coeffs.iter().map(|b| b.abs().powi(3)).sum::<f64>() / big_n;
    let sd_t = d.omega * var_b.sqrt();
    let x = y / sd_t;
    let beta3 = abs3 / var_b.powf(1.5);
    let remainder_scale = x * beta3 / d.omega * mills_psi(x) / (2.0 * PI).sqrt();

    SaddlepointTail {
        value: log_value.exp(),
        log_value,
        y,
        u,
        eps,
        state,
        remainder_scale,
    }
}

fn check_threshold(coeffs: &[f64], n: usize, y: f64) -> Result<()> {
    let mut sorted = coeffs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let max_sum: f64 = sorted[..n].iter().sum();
    if !(y > 0.0 && y < max_sum) {
        return Err(Error::OutOfRange(format!(
            "threshold {y} outside (0, {max_sum}) for the centred sum"
        )));
    }
    Ok(())
}

/// Mean-matched approximation of `P(T >= y)`, `T` the sum of the sampled
/// coefficients. The coefficients are centred first and `y` shifted to match.
pub fn linear_saddlepoint(coeffs: &[f64], d: &Design, y: f64) -> Result<SaddlepointTail> {
    check_len(coeffs, d)?;
    let (c, y) = centred(coeffs, d.n, y);
    check_threshold(&c, d.n, y)?;
    let state = solve_tilt_for_mean(&c, d.p, y)?;
    Ok(assemble(&c, d, y, state))
}

/// Approximation of `P(S_n >= y)` for a standardized population.
pub fn saddlepoint_tail(pop_std: &Population, d: &Design, y: f64) -> Result<SaddlepointTail> {
    pop_std.check_standardized()?;
    linear_saddlepoint(pop_std.values(), d, y)
}

/// Approximation of `P(T >= y)` at a fixed tilt `u`, without mean matching.
pub fn conjugate_tail(coeffs: &[f64], d: &Design, u: f64, y: f64) -> Result<SaddlepointTail> {
    check_len(coeffs, d)?;
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!("tilt u = {u} must be positive")));
    }
    let (c, y) = centred(coeffs, d.n, y);
    check_threshold(&c, d.n, y)?;
    let state = tilt_state(&c, d.p, u)?;
    Ok(assemble(&c, d, y, state))
}

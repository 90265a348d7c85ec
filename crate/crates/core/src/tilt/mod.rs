//! Exponential tilting of sums drawn without replacement.
//!
//! For coefficients `b_1..b_N` (summing to zero) and a sample sum
//! `T = sum_{k in sample} b_k`, the tilted law `e^{uT} / E e^{uT}` is
//! described through `K` evaluated at `u b_k + alpha`, where the centring root
//! `alpha` solves `sum K'(u b_k + alpha) = 0`.

mod cgf;
mod saddlepoint;
mod student;

use serde::{Deserialize, Serialize};

pub use cgf::{cgf, tilted_inclusion, CgfValues};
pub use saddlepoint::{
    conjugate_tail, linear_saddlepoint, saddlepoint_tail, solve_tilt_for_mean, SaddlepointTail,
};
pub use student::{reduction_t_tail, saddlepoint_t_tail, DensityPoint, JointDensity, StudentSaddlepoint};

use crate::error::{Error, Result};
use crate::population::{Design, Population};
use crate::sampling::{for_each_subset, map_blocks, Sampler};

/// Tilt coefficients
/// `b_k = lambda b a_k - theta b^2 q (a_k^2 - 1) + theta1 b^4 q^2 [(a_k^2 - 1)^2 - mean_j (a_j^2 - 1)^2]`
/// with `b = x / omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltCoefficients {
    pub coeffs: Vec<f64>,
    pub lambda: f64,
    pub theta: f64,
    pub theta1: f64,
    pub b: f64,
}

pub fn tilt_coeffs(
    pop_std: &Population,
    d: &Design,
    x: f64,
    lambda: f64,
    theta: f64,
    theta1: f64,
) -> Result<TiltCoefficients> {
    pop_std.check_standardized()?;
    if !(lambda > 0.0 && lambda <= 2.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} not in (0, 2]")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} not in [0, 1]")));
    }
    if !(theta1.abs() <= 72.0) {
        return Err(Error::InvalidParameter(format!("|theta1| = {} exceeds 72", theta1.abs())));
    }
    let b = x / d.omega;
    let q = d.q;
    let a = pop_std.values();
    let fourth = a.iter().map(|v| (v * v - 1.0).powi(2)).sum::<f64>() / a.len() as f64;
    let coeffs = a
        .iter()
        .map(|&v| {
            let c = v * v - 1.0;
            lambda * b * v - theta * b * b * q * c + theta1 * b.powi(4) * q * q * (c * c - fourth)
        })
        .collect();
    Ok(TiltCoefficients {
        coeffs,
        lambda,
        theta,
        theta1,
        b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRoot {
    pub alpha: f64,
    /// `|sum K'(u b_k + alpha)|` at the returned root.
    pub residual: f64,
    pub iterations: usize,
}

fn alpha_objective(coeffs: &[f64], p: f64, u: f64, alpha: f64) -> (f64, f64) {
    coeffs.iter().fold((0.0, 0.0), |(f, df), &b| {
        let c = cgf(u * b + alpha, p);
        (f + c.k1, df + c.k2)
    })
}

/// Solves `sum K'(u b_k + alpha) = 0`.
///
/// The left side is strictly increasing in `alpha` and ranges over
/// `(-N p, N q)`, so the root exists and is unique. It is bracketed by
/// doubling, then refined by Newton steps that fall back to bisection
/// whenever they leave the bracket.
pub fn solve_alpha(coeffs: &[f64], p: f64, u: f64) -> Result<AlphaRoot> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} not in (0, 1)")));
    }
    if coeffs.iter().any(|b| !b.is_finite()) || !u.is_finite() {
        return Err(Error::InvalidParameter("non-finite tilt input".into()));
    }
    let tol = 1e-12 * coeffs.len() as f64 * p * (1.0 - p);
    let (f0, _) = alpha_objective(coeffs, p, u, 0.0);
    if f0.abs() <= tol {
        return Ok(AlphaRoot { alpha: 0.0, residual: f0.abs(), iterations: 0 });
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut step = 1.0;
    let mut iterations = 0;
    if f0 < 0.0 {
        loop {
            hi += step;
            iterations += 1;
            if alpha_objective(coeffs, p, u, hi).0 > 0.0 {
                break;
            }
            lo = hi;
            step *= 2.0;
            if iterations > 2000 {
                return Err(Error::NoConvergence("could not bracket alpha".into()));
            }
        }
    } else {
        loop {
            lo -= step;
            iterations += 1;
            if alpha_objective(coeffs, p, u, lo).0 < 0.0 {
                break;
            }
            hi = lo;
            step *= 2.0;
            if iterations > 2000 {
                return Err(Error::NoConvergence("could not bracket alpha".into()));
            }
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    let (mut f, mut df) = alpha_objective(coeffs, p, u, alpha);
    for _ in 0..300 {
        iterations += 1;
        if f.abs() <= tol {
            return Ok(AlphaRoot { alpha, residual: f.abs(), iterations });
        }
        if f < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let newton = alpha - f / df;
        let next = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == alpha || hi - lo <= 4.0 * f64::EPSILON * alpha.abs().max(1.0) {
            // Floating-point resolution reached.
            return Ok(AlphaRoot { alpha, residual: f.abs(), iterations });
        }
        alpha = next;
        (f, df) = alpha_objective(coeffs, p, u, alpha);
    }
    Err(Error::NoConvergence(format!(
        "alpha solve stopped with residual {:e} in [{lo}, {hi}]",
        f.abs()
    )))
}

/// Tilted sums evaluated at `z_k = u b_k + alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltState {
    pub u: f64,
    pub alpha: f64,
    /// `sum K_k`.
    pub k_sum: f64,
    /// `sum b_k K'_k`, the tilted mean of `T`.
    pub m_n: f64,
    /// `sum b_k^2 K''_k - (sum b_k K''_k)^2 / sum K''_k`, the tilted variance of `T`.
    pub sigma_n2: f64,
    /// `sum K''_k`.
    pub k2_sum: f64,
    /// `sum b_k K''_k`.
    pub bk2_sum: f64,
    /// `sum b_k^2 K''_k`.
    pub b2k2_sum: f64,
    /// `|sum K'_k|`.
    pub residual: f64,
}

pub fn tilt_moments(coeffs: &[f64], p: f64, u: f64, alpha: f64) -> TiltState {
    let mut s = TiltState {
        u,
        alpha,
        k_sum: 0.0,
        m_n: 0.0,
        sigma_n2: 0.0,
        k2_sum: 0.0,
        bk2_sum: 0.0,
        b2k2_sum: 0.0,
        residual: 0.0,
    };
    let mut k1_sum = 0.0;
    for &b in coeffs {
        let c = cgf(u * b + alpha, p);
        s.k_sum += c.k;
        k1_sum += c.k1;
        s.m_n += b * c.k1;
        s.k2_sum += c.k2;
        s.bk2_sum += b * c.k2;
        s.b2k2_sum += b * b * c.k2;
    }
    s.residual = k1_sum.abs();
    s.sigma_n2 = if s.k2_sum > 0.0 {
        (s.b2k2_sum - s.bk2_sum * s.bk2_sum / s.k2_sum).max(0.0)
    } else {
        0.0
    };
    s
}

/// Solves for `alpha` and evaluates the tilted sums.
pub fn tilt_state(coeffs: &[f64], p: f64, u: f64) -> Result<TiltState> {
    let root = solve_alpha(coeffs, p, u)?;
    Ok(tilt_moments(coeffs, p, u, root.alpha))
}

/// `log(sqrt(2 pi) C(N, n) p^n q^{N-n})`.
pub fn log_gn(d: &Design) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let (big_n, n) = (d.big_n as f64, d.n as f64);
    0.5 * (2.0 * std::f64::consts::PI).ln() + ln_gamma(big_n + 1.0)
        - ln_gamma(n + 1.0)
        - ln_gamma(big_n - n + 1.0)
        + n * d.p.ln()
        + (big_n - n) * d.q.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfApprox {
    /// Approximation of `E e^{uT}` without the `(1 + O(1/omega))` factor.
    pub value: f64,
    pub log_value: f64,
    /// `G_n(p) = sqrt(2 pi) C(N, n) p^n q^{N-n}`.
    pub gn_p: f64,
    pub state: TiltState,
}

/// `E e^{uT} ~ G_n(p)^{-1} (sum K''_k)^{-1/2} exp(sum K_k)`.
pub fn mgf_approx(coeffs: &[f64], d: &Design, u: f64) -> Result<MgfApprox> {
    check_len(coeffs, d)?;
    let state = tilt_state(coeffs, d.p, u)?;
    let lg = log_gn(d);
    let log_value = state.k_sum - lg - 0.5 * state.k2_sum.ln();
    Ok(MgfApprox {
        value: log_value.exp(),
        log_value,
        gn_p: lg.exp(),
        state,
    })
}

/// Exact `E e^{uT}` by enumerating every `n`-subset.
pub fn mgf_exact(coeffs: &[f64], n: usize, u: f64) -> Result<f64> {
    let mut acc = 0.0;
    let total = for_each_subset(coeffs, n, |s| acc += (u * s.iter().sum::<f64>()).exp())?;
    Ok(acc / total as f64)
}

/// How the associated distribution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssociatedMode {
    Exact,
    /// Self-normalized importance weighting of untilted samples.
    MonteCarlo { reps: u64, seed: u64, workers: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociatedCdf {
    pub value: f64,
    /// Delta-method standard error; zero in exact mode.
    pub stderr: f64,
}

/// `H_n(x; u) = E e^{uT} I(T <= x) / E e^{uT}`.
pub fn associated_cdf(
    coeffs: &[f64],
    n: usize,
    u: f64,
    x_eval: f64,
    mode: AssociatedMode,
) -> Result<AssociatedCdf> {
    match mode {
        AssociatedMode::Exact => {
            let (mut below, mut all) = (0.0, 0.0);
            // Shift exponents by the largest attainable uT to avoid overflow.
            let shift = max_tilted_sum(coeffs, n, u);
            for_each_subset(coeffs, n, |s| {
                let t: f64 = s.iter().sum();
                let w = (u * t - shift).exp();
                all += w;
                if t <= x_eval {
                    below += w;
                }
            })?;
            Ok(AssociatedCdf { value: below / all, stderr: 0.0 })
        }
        AssociatedMode::MonteCarlo { reps, seed, workers } => {
            let big_n = coeffs.len();
            let shift = max_tilted_sum(coeffs, n, u);
            let sums = map_blocks(reps, seed, workers, |rng, block_reps| {
                let mut sampler = Sampler::new(big_n, n).expect("validated n");
                let mut acc = WeightSums::default();
                for _ in 0..block_reps {
                    let t: f64 = sampler.draw(rng).iter().map(|&i| coeffs[i]).sum();
                    acc.push((u * t - shift).exp(), t <= x_eval);
                }
                acc
            })?;
            let tot = sums.into_iter().fold(WeightSums::default(), WeightSums::merge);
            let h = tot.below / tot.all;
            // Var of the ratio estimator: sum w^2 (I - h)^2 / (sum w)^2.
            let var = (tot.below_sq * (1.0 - h).powi(2) + (tot.all_sq - tot.below_sq) * h * h)
                / (tot.all * tot.all);
            Ok(AssociatedCdf { value: h, stderr: var.sqrt() })
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct WeightSums {
    all: f64,
    below: f64,
    all_sq: f64,
    below_sq: f64,
}

impl WeightSums {
    fn push(&mut self, w: f64, below: bool) {
        self.all += w;
        self.all_sq += w * w;
        if below {
            self.below += w;
            self.below_sq += w * w;
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            all: self.all + o.all,
            below: self.below + o.below,
            all_sq: self.all_sq + o.all_sq,
            below_sq: self.below_sq + o.below_sq,
        }
    }
}

fn max_tilted_sum(coeffs: &[f64], n: usize, u: f64) -> f64 {
    let mut scaled: Vec<f64> = coeffs.iter().map(|b| u * b).collect();
    scaled.sort_by(|a, b| b.total_cmp(a));
    scaled[..n.min(scaled.len())].iter().sum()
}

fn check_len(coeffs: &[f64], d: &Design) -> Result<()> {
    if coeffs.len() != d.big_n {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for a design with N = {}",
            coeffs.len(),
            d.big_n
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;

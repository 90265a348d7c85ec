//! `K(z) = log(p e^{qz} + q e^{-pz})`, the cumulant generating function of a
//! centred Bernoulli(p) inclusion indicator, and its derivatives.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfValues {
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Evaluates `K` and its first three derivatives at `z`.
///
/// Every branch is written in terms of `exp(-|z|)` so nothing overflows, and
/// `expm1`/`ln_1p` keep full relative precision near `z = 0`.
pub fn cgf(z: f64, p: f64) -> CgfValues {
    let q = 1.0 - p;
    let (k, k1, pi, one_minus_pi) = if z >= 0.0 {
        let em = (-z).exp_m1(); // e^{-z} - 1, in (-1, 0]
        let denom = 1.0 + q * em; // p + q e^{-z}
        let k = q * z + (q * em).ln_1p();
        let k1 = -p * q * em / denom;
        (k, k1, p / denom, q * (-z).exp() / denom)
    } else {
        let em = z.exp_m1(); // e^{z} - 1, in (-1, 0)
        let denom = 1.0 + p * em; // p e^{z} + q
        let k = -p * z + (p * em).ln_1p();
        let k1 = p * q * em / denom;
        (k, k1, p * z.exp() / denom, q / denom)
    };
    let k2 = pi * one_minus_pi;
    CgfValues {
        k,
        k1,
        k2,
        k3: k2 * (one_minus_pi - pi),
    }
}

/// Tilted inclusion probability `p e^{qz} / (p e^{qz} + q e^{-pz}) = p + K'(z)`.
pub fn tilted_inclusion(z: f64, p: f64) -> f64 {
    let q = 1.0 - p;
    if z >= 0.0 {
        p / (p + q * (-z).exp())
    } else {
        let e = z.exp();
        p * e / (p * e + q)
    }
}

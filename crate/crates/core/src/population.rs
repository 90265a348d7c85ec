//! Finite populations, their moments, and the sampling design.
//!
//! Moments always use the population convention (division by `N`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite population `a_1, ..., a_N` with at least two distinct values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationMoments {
    pub mu: f64,
    pub sigma2: f64,
    /// Standardized third absolute moment `E|X - mu|^3 / sigma^3`.
    pub beta3: f64,
    /// `max_k |a_k - mu|`.
    pub max_dev: f64,
}

impl PopulationMoments {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Sampling design: `n` draws without replacement from `N` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub big_n: usize,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    /// `sqrt(N p q)`.
    pub omega: f64,
}

impl Design {
    pub fn new(big_n: usize, n: usize) -> Result<Self> {
        if n == 0 || n >= big_n {
            return Err(Error::InvalidParameter(format!(
                "sample size n = {n} must satisfy 1 <= n < N = {big_n}"
            )));
        }
        let p = n as f64 / big_n as f64;
        let q = 1.0 - p;
        Ok(Self {
            big_n,
            n,
            p,
            q,
            omega: (big_n as f64 * p * q).sqrt(),
        })
    }

    pub fn pq(&self) -> f64 {
        self.p * self.q
    }
}

impl Population {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "value at index {i} is not finite"
            )));
        }
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            return Err(Error::Degenerate("all values are equal".into()));
        }
        Ok(Self { values })
    }

    /// `a_k = k^alpha` for `k = 1..=N`. Requires `alpha > -1/3`.
    pub fn power_family(big_n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > -1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must exceed -1/3"
            )));
        }
        if alpha == 0.0 {
            return Err(Error::Degenerate("alpha = 0 gives a constant population".into()));
        }
        Self::new((1..=big_n).map(|k| (k as f64).powf(alpha)).collect())
    }

    /// Reads one number per line, with an optional leading `value` header.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 && line.eq_ignore_ascii_case("value") {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("cannot parse {line:?} as a number"),
            })?;
            values.push(v);
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn moments(&self) -> PopulationMoments {
        let n = self.values.len() as f64;
        let mu = self.values.iter().sum::<f64>() / n;
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        let mut max_dev: f64 = 0.0;
        for &a in &self.values {
            let d = (a - mu).abs();
            s2 += d * d;
            s3 += d * d * d;
            max_dev = max_dev.max(d);
        }
        let sigma2 = s2 / n;
        PopulationMoments {
            mu,
            sigma2,
            beta3: (s3 / n) / sigma2.powf(1.5),
            max_dev,
        }
    }

    /// Maps each value to `(a_k - mu) / sigma`.
    pub fn standardize(&self) -> Population {
        let m = self.moments();
        let sigma = m.sigma();
        Population {
            values: self.values.iter().map(|&a| (a - m.mu) / sigma).collect(),
        }
    }

    /// Checks `sum a_k = 0` and `sum a_k^2 = N` to within `1e-9 N`.
    pub fn check_standardized(&self) -> Result<()> {
        let n = self.values.len() as f64;
        let sum: f64 = self.values.iter().sum();
        let ss: f64 = self.values.iter().map(|a| a * a).sum::<f64>() - n;
        if sum.abs() > 1e-9 * n || ss.abs() > 1e-9 * n {
            return Err(Error::NotStandardized { sum, ss });
        }
        Ok(())
    }

    pub fn is_standardized(&self) -> bool {
        self.check_standardized().is_ok()
    }

    pub fn is_integer_valued(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.fract() == 0.0 && v.abs() < 9.0e15)
    }

    /// Sum of the `n` smallest and `n` largest values.
    pub fn sum_range(&self, n: usize) -> (f64, f64) {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let lo = sorted[..n].iter().sum();
        let hi = sorted[sorted.len() - n..].iter().sum();
        (lo, hi)
    }
}

/// Upper ends of the admissible `x` ranges for a given constant `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XRange {
    /// `(1/A) omega sigma / max_dev`.
    pub sum_bound: f64,
    /// `(1/A) min{omega sigma / max_dev, (omega / beta3)^(1/3)}`.
    pub cramer: f64,
}

pub fn valid_x_range(m: &PopulationMoments, d: &Design, a_const: f64) -> Result<XRange> {
    if !(a_const > 0.0) {
        return Err(Error::InvalidParameter(format!("A = {a_const} must be positive")));
    }
    let spread = d.omega * m.sigma() / m.max_dev;
    let moment = (d.omega / m.beta3).cbrt();
    Ok(XRange {
        sum_bound: spread / a_const,
        cramer: spread.min(moment) / a_const,
    })
}

//! Simple random sampling without replacement, per-sample statistics, and
//! tail-probability estimators (Monte Carlo and exact oracles).

mod bernoulli;
mod engine;
mod exact;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::x0_transform;
use crate::error::{Error, Result};
use crate::population::{Design, Population};

pub use bernoulli::{bernoulli_acceptance_rate, bernoulli_conditioned_tail};
pub use engine::{block_rng, block_sizes, map_blocks, run_blocks, BlockCounts};
pub use exact::{exact_tail_dp, exact_tail_enum, for_each_subset, ExactCount, MAX_ENUM_SUBSETS};

/// A sample drawn without replacement. Indices are 0-based positions in the
/// population.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Reusable partial Fisher-Yates sampler.
///
/// The index buffer is never reset between draws: a partial shuffle of any
/// fixed arrangement still yields a uniformly random `n`-subset.
#[derive(Debug, Clone)]
pub struct Sampler {
    perm: Vec<usize>,
    n: usize,
}

impl Sampler {
    pub fn new(big_n: usize, n: usize) -> Result<Self> {
        if n == 0 || n >= big_n {
            return Err(Error::InvalidParameter(format!(
                "sample size n = {n} must satisfy 1 <= n < N = {big_n}"
            )));
        }
        Ok(Self {
            perm: (0..big_n).collect(),
            n,
        })
    }

    /// Draws the next sample; the returned slice holds the chosen indices.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        let big_n = self.perm.len();
        for i in 0..self.n {
            let j = rng.random_range(i..big_n);
            self.perm.swap(i, j);
        }
        &self.perm[..self.n]
    }
}

pub fn draw_sample<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Sample> {
    let mut sampler = Sampler::new(pop.len(), n)?;
    let indices = sampler.draw(rng).to_vec();
    let values = indices.iter().map(|&i| pop.values()[i]).collect();
    Ok(Sample { indices, values })
}

/// Population constants needed to turn a sample into [`SampleStats`].
#[derive(Debug, Clone, Copy)]
pub struct StatsContext {
    pub mu: f64,
    pub n: usize,
    pub q: f64,
    /// `E(X^2 - 1)^2`, present only for standardized populations.
    pub centered_fourth: Option<f64>,
}

impl StatsContext {
    pub fn new(pop: &Population, d: &Design) -> Self {
        let standardized = pop.is_standardized();
        let centered_fourth = standardized.then(|| {
            pop.values()
                .iter()
                .map(|a| (a * a - 1.0).powi(2))
                .sum::<f64>()
                / pop.len() as f64
        });
        Self {
            mu: if standardized { 0.0 } else { pop.moments().mu },
            n: d.n,
            q: d.q,
            centered_fourth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub sum: f64,
    pub mean: f64,
    /// `V_n^2 = sum X_k^2`.
    pub vn2: f64,
    /// `V_n^2 - n`; standardized populations only.
    pub v1n: Option<f64>,
    /// `sum [(X_k^2 - 1)^2 - E(X^2 - 1)^2]`; standardized populations only.
    pub v2n: Option<f64>,
    pub sigma_hat2: f64,
    /// Student t; `None` when the sample is constant.
    pub t: Option<f64>,
}

impl SampleStats {
    pub fn t_statistic(&self) -> Result<f64> {
        self.t.ok_or(Error::ConstantSample)
    }
}

pub fn sample_stats(values: &[f64], ctx: &StatsContext) -> Result<SampleStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let nf = n as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / nf;
    let vn2: f64 = values.iter().map(|x| x * x).sum();
    let sigma_hat2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = (sigma_hat2 > 0.0).then(|| nf.sqrt() * (mean - ctx.mu) / (sigma_hat2 * ctx.q).sqrt());
    let (v1n, v2n) = match ctx.centered_fourth {
        Some(m4) => (
            Some(vn2 - nf),
            Some(values.iter().map(|x| (x * x - 1.0).powi(2) - m4).sum()),
        ),
        None => (None, None),
    };
    Ok(SampleStats {
        sum,
        mean,
        vn2,
        v1n,
        v2n,
        sigma_hat2,
        t,
    })
}

/// Parameters of the quadratic-tilt event
/// `b S_n - xi b^2 q V_1n + xi1 b^4 q^2 V_2n >= x^2 + h`, `b = x / omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTilt {
    pub x: f64,
    pub xi: f64,
    pub xi1: f64,
    pub h: f64,
}

impl QuadraticTilt {
    /// `0 <= xi <= 1/2`, `|xi1| <= 36`, `|h| <= x^2/5`.
    pub fn in_regime(&self) -> bool {
        (0.0..=0.5).contains(&self.xi) && self.xi1.abs() <= 36.0 && self.h.abs() <= self.x * self.x / 5.0
    }
}

/// Event whose probability is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// `S_n >= threshold`, raw units.
    Sum { threshold: f64 },
    /// `t_n >= x`.
    T { x: f64 },
    /// Standardized populations only.
    Quadratic(QuadraticTilt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    Miss,
    /// The statistic is undefined for this sample (constant sample for `t`).
    Undefined,
}

/// Precomputed evaluator of a [`Statistic`] on sampled values.
#[derive(Debug, Clone, Copy)]
pub struct EventEvaluator {
    stat: Statistic,
    ctx: StatsContext,
    b: f64,
}

impl EventEvaluator {
    pub fn new(pop: &Population, d: &Design, stat: Statistic) -> Result<Self> {
        let ctx = StatsContext::new(pop, d);
        if let Statistic::Quadratic(_) = stat {
            pop.check_standardized()?;
        }
        if let Statistic::T { .. } = stat {
            if d.n < 2 {
                return Err(Error::InvalidParameter("t-statistic needs n >= 2".into()));
            }
        }
        let b = match stat {
            Statistic::Quadratic(qt) => qt.x / d.omega,
            _ => 0.0,
        };
        Ok(Self { stat, ctx, b })
    }

    pub fn eval(&self, values: &[f64]) -> Outcome {
        let hit = |c: bool| if c { Outcome::Hit } else { Outcome::Miss };
        match self.stat {
            Statistic::Sum { threshold } => hit(values.iter().sum::<f64>() >= threshold),
            Statistic::T { x } => {
                let nf = values.len() as f64;
                let mean = values.iter().sum::<f64>() / nf;
                let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
                if ss == 0.0 {
                    return Outcome::Undefined;
                }
                let sigma_hat2 = ss / (nf - 1.0);
                let t = nf.sqrt() * (mean - self.ctx.mu) / (sigma_hat2 * self.ctx.q).sqrt();
                hit(t >= x)
            }
            Statistic::Quadratic(qt) => {
                let m4 = self.ctx.centered_fourth.unwrap_or(0.0);
                let (mut s, mut v1, mut v2) = (0.0, 0.0, 0.0);
                for &v in values {
                    let c = v * v - 1.0;
                    s += v;
                    v1 += c;
                    v2 += c * c - m4;
                }
                let b = self.b;
                let q = self.ctx.q;
                let stat = b * s - qt.xi * b * b * q * v1 + qt.xi1 * b.powi(4) * q * q * v2;
                hit(stat >= qt.x * qt.x + qt.h)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mc,
    Enum,
    Dp,
    BernoulliConditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    /// Replications; 0 for exact methods.
    pub reps: u64,
    pub method: Method,
    /// Samples on which the statistic was undefined (counted as misses).
    pub undefined: u64,
}

impl TailEstimate {
    pub fn from_counts(hits: u64, reps: u64, undefined: u64, method: Method) -> Self {
        let p_hat = hits as f64 / reps as f64;
        Self {
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / reps as f64).sqrt(),
            reps,
            method,
            undefined,
        }
    }

    pub fn exact(p: f64, method: Method) -> Self {
        Self {
            p_hat: p,
            stderr: 0.0,
            reps: 0,
            method,
            undefined: 0,
        }
    }

    /// 95% Wilson score interval for `p_hat`.
    pub fn wilson95(&self) -> (f64, f64) {
        if self.reps == 0 {
            return (self.p_hat, self.p_hat);
        }
        let z = 1.959_963_984_540_054;
        let n = self.reps as f64;
        let p = self.p_hat;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

/// Monte Carlo estimate of `P(statistic event)` from `reps` samples.
///
/// Deterministic in `(seed, reps, workers)`; see [`run_blocks`].
pub fn mc_tail(
    pop: &Population,
    d: &Design,
    stat: Statistic,
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    Ok(mc_tail_many(pop, d, &[stat], reps, seed, workers)?.remove(0))
}

/// Estimates several events from the same samples. Each estimate equals
/// what [`mc_tail`] returns for that event with the same arguments.
pub fn mc_tail_many(
    pop: &Population,
    d: &Design,
    stats: &[Statistic],
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<TailEstimate>> {
    check_design(pop, d)?;
    if stats.is_empty() {
        return Err(Error::InvalidParameter("no statistics to estimate".into()));
    }
    let evals = stats
        .iter()
        .map(|&s| EventEvaluator::new(pop, d, s))
        .collect::<Result<Vec<_>>>()?;
    let values = pop.values();
    let blocks = map_blocks(reps, seed, workers, |rng, block_reps| {
        let mut sampler = Sampler::new(d.big_n, d.n).expect("design checked");
        let mut buf = vec![0.0; d.n];
        let mut counts = vec![BlockCounts::default(); evals.len()];
        for _ in 0..block_reps {
            for (slot, &i) in buf.iter_mut().zip(sampler.draw(rng)) {
                *slot = values[i];
            }
            for (c, e) in counts.iter_mut().zip(&evals) {
                c.record(e.eval(&buf));
            }
        }
        counts
    })?;
    let mut totals = vec![BlockCounts::default(); evals.len()];
    for block in blocks {
        for (t, c) in totals.iter_mut().zip(block) {
            *t = t.merge(c);
        }
    }
    Ok(totals
        .into_iter()
        .map(|c| TailEstimate::from_counts(c.hits, reps, c.undefined, Method::Mc))
        .collect())
}

/// `P(S_n - n mu >= x sigma omega)`.
pub fn mc_tail_sum(
    pop: &Population,
    d: &Design,
    x: f64,
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    mc_tail(pop, d, Statistic::Sum { threshold: sum_threshold(pop, d, x) }, reps, seed, workers)
}

/// `P(t_n >= x)`. Constant samples count as misses and are tallied in
/// `undefined`.
pub fn mc_tail_t(
    pop: &Population,
    d: &Design,
    x: f64,
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    mc_tail(pop, d, Statistic::T { x }, reps, seed, workers)
}

pub fn mc_tail_quadratic_tilt(
    pop: &Population,
    d: &Design,
    tilt: QuadraticTilt,
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    mc_tail(pop, d, Statistic::Quadratic(tilt), reps, seed, workers)
}

/// Raw-unit threshold `n mu + x sigma omega` for the standardized sum event.
pub fn sum_threshold(pop: &Population, d: &Design, x: f64) -> f64 {
    let m = pop.moments();
    d.n as f64 * m.mu + x * m.sigma() * d.omega
}

/// Compares `I(t_n >= x)` with `I(S_n / V_n >= x0 sqrt(q))` on one sample of a
/// standardized population. `None` when `V_n = 0` or the sample is constant.
pub fn t_identity_check(sample: &[f64], d: &Design, x: f64) -> Result<Option<bool>> {
    let ctx = StatsContext {
        mu: 0.0,
        n: sample.len(),
        q: d.q,
        centered_fourth: None,
    };
    let stats = sample_stats(sample, &ctx)?;
    let Some(t) = stats.t else { return Ok(None) };
    if stats.vn2 == 0.0 {
        return Ok(None);
    }
    let x0 = x0_transform(x, sample.len(), d.q, d.omega)?.x0;
    let lhs = t >= x;
    let rhs = stats.sum / stats.vn2.sqrt() >= x0 * d.q.sqrt();
    Ok(Some(lhs == rhs))
}

fn check_design(pop: &Population, d: &Design) -> Result<()> {
    if pop.len() != d.big_n {
        return Err(Error::InvalidParameter(format!(
            "design N = {} does not match population size {}",
            d.big_n,
            pop.len()
        )));
    }
    Ok(())
}

//! Alternative sampler: i.i.d. Bernoulli(p) inclusion indicators conditioned
//! on exactly `n` inclusions, which has the same law as sampling without
//! replacement.

use rand::Rng;

use super::engine::{run_blocks, BlockCounts};
use super::{sum_threshold, Method, Outcome, TailEstimate};
use crate::error::{Error, Result};
use crate::population::{Design, Population};

/// `P(Binomial(N, p) = n)`, computed in log space.
pub fn bernoulli_acceptance_rate(d: &Design) -> f64 {
    let (big_n, n) = (d.big_n as f64, d.n as f64);
    let log_choose = ln_gamma(big_n + 1.0) - ln_gamma(n + 1.0) - ln_gamma(big_n - n + 1.0);
    (log_choose + n * d.p.ln() + (big_n - n) * d.q.ln()).exp()
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `P(S_n - n mu >= x sigma omega)` estimated from `reps` accepted inclusion
/// vectors.
pub fn bernoulli_conditioned_tail(
    pop: &Population,
    d: &Design,
    x: f64,
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    let rate = bernoulli_acceptance_rate(d);
    if rate < 1e-6 {
        return Err(Error::AcceptanceTooLow(rate));
    }
    super::check_design(pop, d)?;
    let threshold = sum_threshold(pop, d, x);
    let values = pop.values();
    let p = d.p;
    let counts = run_blocks(reps, seed, workers, |rng, block_reps| {
        let mut counts = BlockCounts::default();
        while counts.trials < block_reps {
            let mut included = 0usize;
            let mut sum = 0.0;
            for &v in values {
                if rng.random::<f64>() < p {
                    included += 1;
                    sum += v;
                }
            }
            if included == d.n {
                counts.record(if sum >= threshold { Outcome::Hit } else { Outcome::Miss });
            }
        }
        counts
    })?;
    Ok(TailEstimate::from_counts(
        counts.hits,
        reps,
        0,
        Method::BernoulliConditioned,
    ))
}

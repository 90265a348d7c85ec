//! Tail probabilities for sums and Student t-statistics of samples drawn
//! without replacement from a finite population.
//!
//! - [`population`]: populations, moments, designs and admissible `x` ranges.
//! - [`sampling`]: the sampler, per-sample statistics, Monte Carlo and exact
//!   tail estimators.
//! - [`tilt`]: exponential tilting, the mgf expansion and saddlepoint tails.
//! - [`bounds`]: normal tail and Mills ratio, relative-error envelopes.

pub mod bounds;
pub mod error;
pub mod population;
pub mod sampling;
pub mod tilt;

pub use error::{Error, Result};
pub use population::{Design, Population, PopulationMoments};
pub use sampling::{Method, Statistic, TailEstimate};

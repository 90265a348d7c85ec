//! Experiment configuration: a JSON document whose keys can each be
//! overridden from the command line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use finpop::{Design, Population};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Written `power:<N>:<alpha>` or `file:<path>` on the command line and in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PopulationSpec {
    /// `a_k = k^alpha`, `k = 1..N`.
    Power { big_n: usize, alpha: f64 },
    /// One value per line.
    File { path: String },
}

impl PopulationSpec {
    pub fn build(&self) -> CliResult<Population> {
        Ok(match self {
            PopulationSpec::Power { big_n, alpha } => Population::power_family(*big_n, *alpha)?,
            PopulationSpec::File { path } => Population::load(path)?,
        })
    }
}

impl fmt::Display for PopulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationSpec::Power { big_n, alpha } => write!(f, "power:{big_n}:{alpha}"),
            PopulationSpec::File { path } => write!(f, "file:{path}"),
        }
    }
}

impl From<PopulationSpec> for String {
    fn from(spec: PopulationSpec) -> Self {
        spec.to_string()
    }
}

impl TryFrom<String> for PopulationSpec {
    type Error = CliError;

    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

impl FromStr for PopulationSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::Config(format!("population `{s}`: expected file:<path> or power:<N>:<alpha>"));
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(bad());
            }
            return Ok(PopulationSpec::File { path: path.to_string() });
        }
        let rest = s.strip_prefix("power:").ok_or_else(bad)?;
        let (big_n, alpha) = rest.split_once(':').ok_or_else(bad)?;
        Ok(PopulationSpec::Power {
            big_n: big_n.trim().parse().map_err(|_| bad())?,
            alpha: alpha.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Mc,
    Enum,
    Dp,
    Bernoulli,
    Saddlepoint,
}

impl FromStr for MethodKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim() {
            "mc" => Ok(MethodKind::Mc),
            "enum" => Ok(MethodKind::Enum),
            "dp" => Ok(MethodKind::Dp),
            "bernoulli" => Ok(MethodKind::Bernoulli),
            "saddlepoint" => Ok(MethodKind::Saddlepoint),
            other => Err(CliError::Config(format!(
                "unknown method `{other}` (mc, enum, dp, bernoulli, saddlepoint)"
            ))),
        }
    }
}

/// Saddlepoint construction used for the t statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TSaddlepoint {
    /// Integral of the joint density of the sum and the centred sum of squares.
    #[default]
    Joint,
    /// Single quadratic tilt of the linearized event; biased low for large `x`.
    Reduction,
}

impl FromStr for TSaddlepoint {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim() {
            "joint" => Ok(TSaddlepoint::Joint),
            "reduction" => Ok(TSaddlepoint::Reduction),
            other => Err(CliError::Config(format!("unknown t saddlepoint `{other}` (joint, reduction)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub population: Option<PopulationSpec>,
    pub n: Option<usize>,
    pub x_grid: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
    pub workers: usize,
    /// Absolute constant of the envelopes; envelopes are omitted when unset.
    #[serde(rename = "A")]
    pub a_const: Option<f64>,
    pub methods: Vec<MethodKind>,
    pub xi: f64,
    pub xi1: f64,
    pub h: f64,
    pub t_saddlepoint: TSaddlepoint,
}

/// Range computations use this constant when none is supplied.
pub const DEFAULT_RANGE_A: f64 = 1.0;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            population: None,
            n: None,
            x_grid: vec![2.0, 2.5, 3.0],
            reps: 1_000_000,
            seed: 20_240_601,
            workers: 8,
            a_const: None,
            methods: vec![MethodKind::Mc],
            xi: 0.0,
            xi1: 0.0,
            h: 0.0,
            t_saddlepoint: TSaddlepoint::Joint,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn check(&self) -> CliResult<()> {
        if self.x_grid.is_empty() {
            return Err(CliError::Config("x grid is empty".into()));
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("x grid has non-finite values".into()));
        }
        if self.x_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(CliError::Config("x grid must be sorted ascending".into()));
        }
        if self.reps == 0 {
            return Err(CliError::Config("reps must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if let Some(a) = self.a_const {
            if !(a > 0.0) {
                return Err(CliError::Config(format!("A = {a} must be positive")));
            }
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods selected".into()));
        }
        Ok(())
    }

    pub fn population(&self) -> CliResult<(PopulationSpec, Population)> {
        let spec = self
            .population
            .clone()
            .ok_or_else(|| CliError::Config("no population given (--population)".into()))?;
        let pop = spec.build()?;
        Ok((spec, pop))
    }

    pub fn design(&self, pop: &Population) -> CliResult<Design> {
        let n = self.n.ok_or_else(|| CliError::Config("no sample size given (--n)".into()))?;
        Ok(Design::new(pop.len(), n)?)
    }
}

/// Parses repeated or comma-separated values, e.g. `--x 1,2 --x 3`.
pub fn parse_list<T: FromStr>(items: &[String]) -> CliResult<Vec<T>>
where
    T::Err: fmt::Display,
{
    items
        .iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(|e| CliError::Config(format!("`{s}`: {e}"))))
        .collect()
}

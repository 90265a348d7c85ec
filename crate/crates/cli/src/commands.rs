//! Report-producing commands. Each takes a validated configuration and returns
//! a [`Report`]; the binary only parses flags and writes output.

use std::collections::BTreeSet;

use finpop::bounds::{cramer_band, envelope, implied_a, implied_band_constant, normal_tail};
use finpop::population::valid_x_range;
use finpop::sampling::{
    bernoulli_conditioned_tail, exact_tail_dp, exact_tail_enum, mc_tail_many, sum_threshold,
    QuadraticTilt,
};
use finpop::tilt::{linear_saddlepoint, reduction_t_tail, saddlepoint_t_tail, saddlepoint_tail, tilt_coeffs};
use finpop::{Design, Method, Population, PopulationMoments, Statistic, TailEstimate};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MethodKind, PopulationSpec, TSaddlepoint, DEFAULT_RANGE_A};
use crate::error::{CliError, CliResult};
use crate::report::{EnvelopeRow, MomentsRow, Report, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Sum,
    T,
    Quadratic,
}

impl StatKind {
    pub fn name(self) -> &'static str {
        match self {
            StatKind::Sum => "sum",
            StatKind::T => "t",
            StatKind::Quadratic => "quadratic",
        }
    }
}

impl std::str::FromStr for StatKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "sum" => Ok(StatKind::Sum),
            "t" => Ok(StatKind::T),
            "quadratic" => Ok(StatKind::Quadratic),
            other => Err(CliError::Config(format!("unknown statistic `{other}` (sum, t, quadratic)"))),
        }
    }
}

/// Below this many replications table ratios are too noisy to compare.
pub const TABLE_MIN_REPS: u64 = 100_000;

/// The four populations of the reference tables: `a_k = k` and `a_k = k^2`
/// with `N` in {1000, 100} and `n = N / 4`.
pub fn default_table_cells() -> Vec<(PopulationSpec, usize)> {
    [(1000, 1.0), (100, 1.0), (1000, 2.0), (100, 2.0)]
        .into_iter()
        .map(|(big_n, alpha)| (PopulationSpec::Power { big_n, alpha }, big_n / 4))
        .collect()
}

/// Population, design and per-row context shared by every `x` of one cell.
struct Cell {
    label: String,
    pop: Population,
    moments: PopulationMoments,
    design: Design,
    statistic: &'static str,
    a_const: Option<f64>,
}

impl Cell {
    fn new(spec: &PopulationSpec, pop: Population, design: Design, stat: StatKind, a_const: Option<f64>) -> Self {
        Self {
            label: spec.to_string(),
            moments: pop.moments(),
            pop,
            design,
            statistic: stat.name(),
            a_const,
        }
    }

    fn row(&self, method: MethodKind, x: f64, est: &TailEstimate) -> CliResult<ReportRow> {
        let tail = normal_tail(x);
        let ratio = est.p_hat / tail;
        let (wilson_lower, wilson_upper) = est.wilson95();
        let range = valid_x_range(&self.moments, &self.design, self.a_const.unwrap_or(DEFAULT_RANGE_A))?;
        let mut note = None;
        let (mut envelope_lower, mut envelope_upper) = (None, None);
        if let Some(a) = self.a_const {
            if x >= 0.0 {
                let env = envelope(x, &self.moments, &self.design, a)?;
                envelope_lower = Some(env.lower);
                envelope_upper = Some(env.upper);
            } else {
                note = Some("envelope defined for x >= 0 only".to_string());
            }
        }
        let implied = if ratio > 0.0 && x > 0.0 {
            Some(implied_a(ratio, x, &self.moments, &self.design)?)
        } else {
            None
        };
        let implied_band = if ratio > 0.0 && x >= 0.0 {
            Some(implied_band_constant(ratio, x, &self.moments, &self.design)?)
        } else {
            None
        };
        Ok(ReportRow {
            population: self.label.clone(),
            big_n: self.design.big_n,
            n: self.design.n,
            statistic: self.statistic.to_string(),
            method,
            x,
            p_hat: est.p_hat,
            stderr: est.stderr,
            reps: est.reps,
            undefined: est.undefined,
            wilson_lower,
            wilson_upper,
            normal_tail: tail,
            ratio,
            ratio_stderr: est.stderr / tail,
            envelope_lower,
            envelope_upper,
            saddlepoint: None,
            sp_ratio: None,
            sp_ratio_stderr: None,
            implied_a: implied,
            implied_band,
            in_range: x >= 0.0 && x <= range.sum_bound,
            note,
        })
    }
}

fn attach_saddlepoint(row: &mut ReportRow, sp: &Result<f64, String>) {
    match sp {
        Ok(v) => {
            row.saddlepoint = Some(*v);
            row.sp_ratio = Some(row.p_hat / v);
            row.sp_ratio_stderr = Some(row.stderr / v);
        }
        Err(msg) => append_note(row, &format!("saddlepoint unavailable: {msg}")),
    }
}

fn append_note(row: &mut ReportRow, msg: &str) {
    row.note = Some(match row.note.take() {
        Some(prev) => format!("{prev}; {msg}"),
        None => msg.to_string(),
    });
}

pub fn cmd_moments(cfg: &ExperimentConfig) -> CliResult<Report> {
    let (spec, pop) = cfg.population()?;
    let m = pop.moments();
    let range_a = cfg.a_const.unwrap_or(DEFAULT_RANGE_A);
    let (omega, sum_range, cramer_range) = match cfg.n {
        Some(n) => {
            let d = Design::new(pop.len(), n)?;
            let r = valid_x_range(&m, &d, range_a)?;
            (Some(d.omega), Some(r.sum_bound), Some(r.cramer))
        }
        None => (None, None, None),
    };
    let mut report = Report::new("moments", cfg);
    report.moments.push(MomentsRow {
        population: spec.to_string(),
        big_n: pop.len(),
        n: cfg.n,
        mu: m.mu,
        sigma2: m.sigma2,
        beta3: m.beta3,
        max_dev: m.max_dev,
        omega,
        range_a,
        sum_range,
        cramer_range,
    });
    if cfg.n.is_none() {
        report.notes.push("omega and x ranges need a sample size (--n)".into());
    }
    Ok(report)
}

/// Integer-valued populations have integer sums; a threshold within rounding
/// of an integer is snapped to it so every method sees the same event.
fn snapped_threshold(pop: &Population, d: &Design, x: f64) -> f64 {
    let t = sum_threshold(pop, d, x);
    if pop.is_integer_valued() && (t - t.round()).abs() <= 1e-9 * t.abs().max(1.0) {
        t.round()
    } else {
        t
    }
}

fn events(stat: StatKind, pop: &Population, d: &Design, cfg: &ExperimentConfig) -> Vec<Statistic> {
    cfg.x_grid
        .iter()
        .map(|&x| match stat {
            StatKind::Sum => Statistic::Sum { threshold: snapped_threshold(pop, d, x) },
            StatKind::T => Statistic::T { x },
            StatKind::Quadratic => Statistic::Quadratic(QuadraticTilt { x, xi: cfg.xi, xi1: cfg.xi1, h: cfg.h }),
        })
        .collect()
}

fn saddlepoint_value(stat: StatKind, pop: &Population, d: &Design, x: f64, cfg: &ExperimentConfig) -> Result<f64, String> {
    if !(x > 0.0) {
        return Err("requires x > 0".into());
    }
    let result = match stat {
        StatKind::Sum => saddlepoint_tail(&pop.standardize(), d, x * d.omega).map(|s| s.value),
        StatKind::T => match cfg.t_saddlepoint {
            TSaddlepoint::Joint => saddlepoint_t_tail(pop, d, x).map(|s| s.value),
            TSaddlepoint::Reduction => reduction_t_tail(pop, d, x).map(|s| s.value),
        },
        StatKind::Quadratic => tilt_coeffs(&pop.standardize(), d, x, 1.0, cfg.xi, cfg.xi1)
            .and_then(|t| linear_saddlepoint(&t.coeffs, d, x * x + cfg.h))
            .map(|s| s.value),
    };
    result.map_err(|e| e.to_string())
}

pub fn cmd_tail(cfg: &ExperimentConfig, stat: StatKind) -> CliResult<Report> {
    cfg.check()?;
    let (spec, raw) = cfg.population()?;
    let d = cfg.design(&raw)?;
    // The quadratic event is defined on the standardized scale.
    let pop = if stat == StatKind::Quadratic { raw.standardize() } else { raw };
    let cell = Cell::new(&spec, pop, d, stat, cfg.a_const);
    let stats = events(stat, &cell.pop, &d, cfg);
    let methods: BTreeSet<MethodKind> = cfg.methods.iter().copied().collect();

    let mut report = Report::new(&format!("tail {}", stat.name()), cfg);
    if stat == StatKind::Quadratic {
        let outside = cfg.x_grid.iter().any(|&x| !QuadraticTilt { x, xi: cfg.xi, xi1: cfg.xi1, h: cfg.h }.in_regime());
        if outside {
            report.notes.push("some (x, xi, xi1, h) lie outside 0 <= xi <= 1/2, |xi1| <= 36, |h| <= x^2/5".into());
        }
    }

    let sp: Option<Vec<Result<f64, String>>> = methods.contains(&MethodKind::Saddlepoint).then(|| {
        cfg.x_grid.iter().map(|&x| saddlepoint_value(stat, &cell.pop, &d, x, cfg)).collect()
    });

    for &method in &methods {
        let estimates: Vec<TailEstimate> = match method {
            MethodKind::Saddlepoint => continue,
            MethodKind::Mc => mc_tail_many(&cell.pop, &d, &stats, cfg.reps, cfg.seed, cfg.workers)?,
            MethodKind::Enum => stats
                .iter()
                .map(|&s| Ok(exact_tail_enum(&cell.pop, d.n, s)?.estimate(Method::Enum)))
                .collect::<CliResult<_>>()?,
            MethodKind::Dp => {
                if stat != StatKind::Sum {
                    return Err(CliError::Config("method dp supports the sum statistic only".into()));
                }
                stats
                    .iter()
                    .map(|s| {
                        let Statistic::Sum { threshold } = *s else { unreachable!("sum events") };
                        Ok(exact_tail_dp(&cell.pop, d.n, threshold.ceil() as i64)?.estimate(Method::Dp))
                    })
                    .collect::<CliResult<_>>()?
            }
            MethodKind::Bernoulli => {
                if stat != StatKind::Sum {
                    return Err(CliError::Config("method bernoulli supports the sum statistic only".into()));
                }
                cfg.x_grid
                    .iter()
                    .map(|&x| Ok(bernoulli_conditioned_tail(&cell.pop, &d, x, cfg.reps, cfg.seed, cfg.workers)?))
                    .collect::<CliResult<_>>()?
            }
        };
        for (i, (&x, est)) in cfg.x_grid.iter().zip(&estimates).enumerate() {
            let mut row = cell.row(method, x, est)?;
            if let Some(sp) = &sp {
                attach_saddlepoint(&mut row, &sp[i]);
            }
            report.rows.push(row);
        }
    }

    // Saddlepoint alone: the approximation itself is the estimate.
    if methods.len() == 1 {
        if let Some(sp) = &sp {
            for (&x, value) in cfg.x_grid.iter().zip(sp) {
                match value {
                    Ok(v) => {
                        // The method tag of the estimate is not reported.
                        let est = TailEstimate::exact(*v, Method::Mc);
                        let mut row = cell.row(MethodKind::Saddlepoint, x, &est)?;
                        attach_saddlepoint(&mut row, value);
                        report.rows.push(row);
                    }
                    Err(msg) => report.notes.push(format!("x = {x}: saddlepoint unavailable: {msg}")),
                }
            }
        }
    }
    Ok(report)
}

fn table_cells(cfg: &ExperimentConfig) -> CliResult<Vec<(PopulationSpec, Population, Design)>> {
    let specs = match &cfg.population {
        Some(spec) => {
            let pop = spec.build()?;
            let n = cfg.n.unwrap_or(pop.len() / 4);
            vec![(spec.clone(), n)]
        }
        None => default_table_cells(),
    };
    specs
        .into_iter()
        .map(|(spec, n)| {
            let pop = spec.build()?;
            let d = Design::new(pop.len(), n)?;
            Ok((spec, pop, d))
        })
        .collect()
}

/// Monte Carlo `P(t_n >= x) / (1 - Phi(x))` over the table grid, and with
/// `with_saddlepoint` the ratio of that tail to its saddlepoint approximation.
///
/// Cell `i` uses seed `seed + i`.
pub fn cmd_table(cfg: &ExperimentConfig, with_saddlepoint: bool) -> CliResult<Report> {
    cfg.check()?;
    let name = if with_saddlepoint { "table2" } else { "table1" };
    let mut report = Report::new(name, cfg);
    if cfg.reps < TABLE_MIN_REPS {
        report.notes.push(format!("reps = {} is below {TABLE_MIN_REPS}; ratios are noisy", cfg.reps));
    }
    for (i, (spec, pop, d)) in table_cells(cfg)?.into_iter().enumerate() {
        let cell = Cell::new(&spec, pop, d, StatKind::T, cfg.a_const);
        let stats = events(StatKind::T, &cell.pop, &d, cfg);
        let seed = cfg.seed.wrapping_add(i as u64);
        let estimates = mc_tail_many(&cell.pop, &d, &stats, cfg.reps, seed, cfg.workers)?;
        for (&x, est) in cfg.x_grid.iter().zip(&estimates) {
            if with_saddlepoint && x <= 0.0 {
                report.notes.push(format!(
                    "{} x = {x}: excluded, the saddlepoint approximation needs a positive threshold",
                    cell.label
                ));
                continue;
            }
            let mut row = cell.row(MethodKind::Mc, x, est)?;
            if with_saddlepoint {
                attach_saddlepoint(&mut row, &saddlepoint_value(StatKind::T, &cell.pop, &d, x, cfg));
            }
            report.rows.push(row);
        }
    }
    Ok(report)
}

pub fn cmd_envelope(cfg: &ExperimentConfig) -> CliResult<Report> {
    cfg.check()?;
    let a = cfg
        .a_const
        .ok_or_else(|| CliError::Config("envelope needs the constant A (--A)".into()))?;
    let (spec, pop) = cfg.population()?;
    let d = cfg.design(&pop)?;
    let m = pop.moments();
    let mut report = Report::new("envelope", cfg);
    for &x in &cfg.x_grid {
        if x < 0.0 {
            report.notes.push(format!("x = {x}: envelope defined for x >= 0 only"));
            continue;
        }
        let env = envelope(x, &m, &d, a)?;
        let band = cramer_band(x, &m, &d, a)?;
        let tail = normal_tail(x);
        report.envelopes.push(EnvelopeRow {
            population: spec.to_string(),
            big_n: d.big_n,
            n: d.n,
            x,
            a_const: a,
            normal_tail: tail,
            lower: env.lower,
            upper: env.upper,
            tail_lower: tail * env.lower,
            tail_upper: tail * env.upper,
            exponent: env.exponent,
            be_bound: band.be_bound,
            in_range: env.in_range,
            cramer_in_range: band.in_range,
        });
    }
    Ok(report)
}

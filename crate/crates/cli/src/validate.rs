//! Property suites behind `validate`. Every check records how many points it
//! evaluated, the smallest observed slack and where that slack occurred.

use finpop::bounds::{mills_psi, normal_pdf, normal_tail, x0_transform};
use finpop::sampling::{
    bernoulli_conditioned_tail, draw_sample, exact_tail_dp, exact_tail_enum, mc_tail_many, mc_tail_sum,
    sum_threshold, t_identity_check,
};
use finpop::tilt::{associated_cdf, cgf, mgf_approx, mgf_exact, tilt_coeffs, tilt_state, AssociatedMode, CgfValues};
use finpop::{Design, Population, Statistic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{PropertyResult, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(crate::error::CliError::Config(format!("unknown level `{other}` (quick, full)"))),
        }
    }
}

/// Deliberate corruption for checking that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Triples `K''` everywhere.
    Curvature,
}

impl std::str::FromStr for Fault {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "curvature" => Ok(Fault::Curvature),
            other => Err(crate::error::CliError::Config(format!("unknown fault `{other}`"))),
        }
    }
}

pub type CgfFn = fn(f64, f64) -> CgfValues;

fn curvature_fault(z: f64, p: f64) -> CgfValues {
    let v = cgf(z, p);
    CgfValues { k2: 3.0 * v.k2, ..v }
}

pub fn cgf_impl(fault: Option<Fault>) -> CgfFn {
    match fault {
        Some(Fault::Curvature) => curvature_fault,
        None => cgf,
    }
}

/// Accumulates one property over many points.
struct Check {
    name: String,
    checked: u64,
    margin: f64,
    worst: String,
    violation: Option<String>,
}

impl Check {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            margin: f64::INFINITY,
            worst: String::new(),
            violation: None,
        }
    }

    /// Records `observed <= bound` (strict when `strict`), with slack measured
    /// relative to `scale`.
    fn bound(&mut self, observed: f64, bound: f64, scale: f64, strict: bool, at: impl Fn() -> String) {
        self.checked += 1;
        let ok = if strict { observed < bound } else { observed <= bound };
        let margin = (bound - observed) / scale.abs().max(f64::MIN_POSITIVE);
        if margin < self.margin {
            self.margin = margin;
            self.worst = format!("{}: observed {observed:e} vs bound {bound:e}", at());
        }
        if !ok && self.violation.is_none() {
            self.violation = Some(format!("{}: observed {observed:e} vs bound {bound:e}", at()));
        }
    }

    fn le(&mut self, observed: f64, bound: f64, at: impl Fn() -> String) {
        self.bound(observed, bound, bound, false, at)
    }

    fn lt(&mut self, observed: f64, bound: f64, at: impl Fn() -> String) {
        self.bound(observed, bound, bound, true, at)
    }

    /// Pass/fail points carry no slack; a failure sets the margin to -1.
    fn pass(&mut self, ok: bool, at: impl Fn() -> String) {
        self.checked += 1;
        if !ok && self.violation.is_none() {
            self.margin = self.margin.min(-1.0);
            self.violation = Some(at());
        }
    }

    fn finish(self) -> PropertyResult {
        let passed = self.violation.is_none();
        let detail = match self.violation {
            Some(v) => format!("first violation at {v}"),
            None if self.worst.is_empty() => "all points pass".to_string(),
            None => format!("tightest at {}", self.worst),
        };
        PropertyResult {
            name: self.name,
            passed,
            margin: if self.margin.is_finite() { self.margin } else { 1.0 },
            checked: self.checked,
            detail,
        }
    }
}

const PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];
const SPANS: [f64; 3] = [0.25, 1.0, 2.0];
const GRID: usize = 200;

/// Derivative bounds on `(0, t]` and `[-t, t]`, and the cubic-order expansions
/// on `|z| <= 1/16`, for each inclusion probability.
pub fn cgf_suite(k: CgfFn) -> Vec<PropertyResult> {
    let mut slope = Check::new("cgf_slope_bound");
    let mut curv = Check::new("cgf_curvature_bound");
    let mut quad = Check::new("cgf_quadratic_expansion");
    let mut lin = Check::new("cgf_slope_expansion");
    let mut flat = Check::new("cgf_curvature_expansion");
    for p in PROBS {
        let pq = p * (1.0 - p);
        let q = 1.0 - p;
        for t in SPANS {
            let cap = pq * (2.0 * t).exp();
            for i in 1..=GRID {
                let z = t * i as f64 / GRID as f64;
                let at = || format!("p={p} t={t} z={z}");
                let (up, down) = (k(z, p).k1, k(-z, p).k1);
                slope.le(up, cap, at);
                slope.lt(0.0, up, || format!("p={p} t={t} z={z} (positivity)"));
                slope.lt(down, 0.0, || format!("p={p} t={t} z={} (negativity)", -z));
                slope.le(-down, cap, || format!("p={p} t={t} z={}", -z));
            }
            let (lo, hi) = (pq * (-3.0 * t).exp(), pq * (3.0 * t).exp());
            for i in 0..GRID {
                let z = -t + 2.0 * t * i as f64 / (GRID - 1) as f64;
                let k2 = k(z, p).k2;
                curv.lt(k2, hi, || format!("p={p} t={t} z={z} (upper)"));
                curv.bound(lo, k2, lo, true, || format!("p={p} t={t} z={z} (lower)"));
            }
        }
        // Midpoints skip z = 0, where both sides vanish, plus both endpoints.
        let edge = 1.0 / 16.0;
        let zs = (0..GRID)
            .map(|i| -edge + 2.0 * edge * (i as f64 + 0.5) / GRID as f64)
            .chain([-edge, edge]);
        for z in zs {
            let v = k(z, p);
            let at = || format!("p={p} z={z}");
            quad.le((v.k / pq - z * z / 2.0).abs(), 0.5 * z.abs().powi(3), at);
            lin.le((v.k1 / pq - z).abs(), z * z, at);
            flat.le((v.k2 / pq - 1.0 - (q - p) * z).abs(), 8.0 * z * z, at);
        }
    }
    vec![slope.finish(), curv.finish(), quad.finish(), lin.finish(), flat.finish()]
}

/// Centering root and tilted-sum bounds for `a_k = k`, `N = 1000`, `n = 250`,
/// at the edge of the small-`x` regime and at `x` in {0.5, 1, 2}, over a grid of
/// coefficient parameters.
pub fn tilt_suite() -> CliResult<Vec<PropertyResult>> {
    let pop = Population::power_family(1000, 1.0)?.standardize();
    let d = Design::new(1000, 250)?;
    let m = pop.moments();
    let (om, beta, big_n) = (d.omega, m.beta3, d.big_n as f64);
    let edge = om / (128.0 * m.max_dev);
    let mut root = Check::new("root_bound");
    let mut root_sq = Check::new("root_square_bound");
    let mut ksum = Check::new("tilted_cgf_sum");
    let mut mean = Check::new("tilted_mean");
    let mut k2sum = Check::new("tilted_curvature_sum");
    let mut cross = Check::new("tilted_cross_curvature");
    let mut second = Check::new("tilted_second_moment");
    for x in [edge, 0.5, 1.0, 2.0] {
        for lambda in [0.5, 1.0, 2.0] {
            for theta in [0.0, 0.5, 1.0] {
                for theta1 in [-72.0, 0.0, 36.0, 72.0] {
                    let t = tilt_coeffs(&pop, &d, x, lambda, theta, theta1)?;
                    let s = tilt_state(&t.coeffs, d.p, 1.0)?;
                    let ss: f64 = t.coeffs.iter().map(|v| v * v).sum();
                    let l2x2 = lambda * lambda * x * x;
                    let cubic = x.powi(3) * beta / om;
                    let at = || format!("x={x} lambda={lambda} theta={theta} theta1={theta1}");
                    root.le(s.alpha.abs(), (1.0 / 32.0f64).min(2.0 / big_n * ss), at);
                    root_sq.le(s.alpha * s.alpha, 9.0 / 8.0 * t.b.powi(3) * beta, at);
                    ksum.le((s.k_sum - l2x2 / 2.0).abs(), 24.0 * cubic, at);
                    mean.le((s.m_n - l2x2).abs(), 24.0 * cubic, at);
                    k2sum.le((s.k2_sum - om * om).abs(), 41.0 * x * x, at);
                    cross.le(s.bk2_sum.abs(), 6.0 * x * x, at);
                    second.le((s.b2k2_sum - l2x2).abs(), 21.0 * cubic, at);
                }
            }
        }
    }
    Ok([root, root_sq, ksum, mean, k2sum, cross, second].into_iter().map(Check::finish).collect())
}

/// Relative error of the moment generating function approximation against
/// enumeration on standardized `a_k = k`, `N` in {10, 16, 22}, `n = N / 2`.
pub fn mgf_suite() -> CliResult<Vec<PropertyResult>> {
    let mut size = Check::new("mgf_expansion_error");
    let mut shrink = Check::new("mgf_error_decreasing");
    for u in [0.1, 0.3] {
        let mut last = f64::INFINITY;
        for big_n in [10, 16, 22] {
            let pop = Population::power_family(big_n, 1.0)?.standardize();
            let d = Design::new(big_n, big_n / 2)?;
            let approx = mgf_approx(pop.values(), &d, u)?.value;
            let exact = mgf_exact(pop.values(), d.n, u)?;
            let err = (approx / exact - 1.0).abs();
            let at = || format!("N={big_n} u={u} error={err:e}");
            size.le(err, 10.0 / d.omega, at);
            shrink.lt(err, last, at);
            last = err;
        }
    }
    Ok(vec![size.finish(), shrink.finish()])
}

/// Upper normal tail to 25 digits by quadrature.
pub const NORMAL_TAIL_ORACLE: [(f64, f64); 11] = [
    (0.0, 0.5),
    (0.5, 0.308_537_538_725_986_896_362_295_4),
    (1.0, 0.158_655_253_931_457_051_414_767_5),
    (2.0, 0.022_750_131_948_179_207_200_282_64),
    (2.5, 0.006_209_665_325_776_135_166_978_105),
    (3.0, 0.001_349_898_031_630_094_526_651_815),
    (4.0, 3.167_124_183_311_992_125_377_076e-5),
    (5.0, 2.866_515_718_791_939_116_737_523e-7),
    (6.0, 9.865_876_450_376_981_407_008_641e-10),
    (7.0, 1.279_812_543_885_835_004_383_624e-12),
    (8.0, 6.220_960_574_271_784_123_515_995e-16),
];

const SLACK: f64 = 1e-13;

pub fn normal_suite() -> Vec<PropertyResult> {
    let mut oracle = Check::new("normal_tail_oracle");
    for (x, p) in NORMAL_TAIL_ORACLE {
        oracle.bound((normal_tail(x) / p - 1.0).abs(), 1e-12, 1e-12, false, || format!("x={x}"));
    }
    let mut sandwich = Check::new("normal_tail_sandwich");
    for i in 0..=800 {
        let x = i as f64 / 100.0;
        let tail = normal_tail(x);
        let at = || format!("x={x}");
        sandwich.bound(x * normal_pdf(x) / (1.0 + x * x), tail + SLACK, tail, false, at);
        sandwich.bound(tail, 2.0 * (-x * x / 2.0).exp() / (1.0 + x) + SLACK, tail, false, at);
    }
    let mut range = Check::new("mills_ratio_range");
    let mut slope = Check::new("mills_ratio_derivative");
    for i in 1..=5000 {
        let t = i as f64 / 100.0;
        let tp = t * mills_psi(t);
        let at = || format!("t={t}");
        slope.le((tp - 1.0).abs(), 1.0 / (t * t) + SLACK, at);
        if t >= 2.0 {
            range.le(0.75, tp + SLACK, at);
            range.le(tp, 1.0 + SLACK, at);
        }
    }
    vec![oracle.finish(), sandwich.finish(), range.finish(), slope.finish()]
}

/// Subset-sum counting equals full enumeration at every integer threshold.
pub fn dp_enum_suite() -> CliResult<Vec<PropertyResult>> {
    let mut check = Check::new("dp_equals_enumeration");
    for alpha in [1.0, 2.0] {
        let pop = Population::power_family(12, alpha)?;
        for n in [3, 4, 6] {
            let (lo, hi) = pop.sum_range(n);
            for thr in (lo as i64 - 1)..=(hi as i64 + 1) {
                let dp = exact_tail_dp(&pop, n, thr)?;
                let en = exact_tail_enum(&pop, n, Statistic::Sum { threshold: thr as f64 })?;
                check.pass(dp.hits == en.hits && dp.total == en.total, || {
                    format!("alpha={alpha} n={n} threshold={thr}: dp {} vs enum {}", dp.hits, en.hits)
                });
            }
        }
    }
    Ok(vec![check.finish()])
}

/// `I(t_n >= x)` equals `I(S_n / V_n >= x0 sqrt(q))` on `samples` random
/// samples from each of two populations, `x` in {0.5, 1, 2, 3}.
pub fn t_identity_suite(samples: u64, seed: u64) -> CliResult<Vec<PropertyResult>> {
    let mut check = Check::new("t_identity");
    let mut skipped = 0u64;
    for (big_n, alpha, n) in [(100, 1.0, 25), (1000, 2.0, 250)] {
        let pop = Population::power_family(big_n, alpha)?.standardize();
        let d = Design::new(big_n, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..samples {
            let s = draw_sample(&pop, n, &mut rng)?;
            for x in [0.5, 1.0, 2.0, 3.0] {
                match t_identity_check(&s.values, &d, x)? {
                    None => skipped += 1,
                    Some(ok) => check.pass(ok, || format!("N={big_n} alpha={alpha} sample={i} x={x}")),
                }
            }
        }
    }
    let mut r = check.finish();
    if skipped > 0 {
        r.detail = format!("{}; {skipped} undefined cases skipped", r.detail);
    }
    Ok(vec![r])
}

/// Conditioned-Bernoulli sampling against direct sampling on 12
/// `(population, x)` points, within 4 combined standard errors.
pub fn bernoulli_suite(reps: u64, seed: u64, workers: usize) -> CliResult<Vec<PropertyResult>> {
    let mut check = Check::new("bernoulli_equivalence");
    for (big_n, alpha, n) in [(100, 1.0, 25), (100, 2.0, 25), (60, 0.5, 30)] {
        let pop = Population::power_family(big_n, alpha)?;
        let d = Design::new(big_n, n)?;
        for x in [0.0, 1.0, 1.5, 2.0] {
            let a = bernoulli_conditioned_tail(&pop, &d, x, reps, seed, workers)?;
            let b = mc_tail_sum(&pop, &d, x, reps, seed.wrapping_add(1), workers)?;
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            check.bound((a.p_hat - b.p_hat).abs(), 4.0 * se, 4.0 * se, false, || {
                format!("N={big_n} alpha={alpha} n={n} x={x}: {} vs {}", a.p_hat, b.p_hat)
            });
        }
    }
    Ok(vec![check.finish()])
}

/// Monte Carlo against the exact counting oracle on `a_k = k`, `N = 30`,
/// `n = 10`, at 20 thresholds; at least 19 must agree within 4 standard errors.
pub fn dp_mc_suite(reps: u64, seed: u64, workers: usize) -> CliResult<Vec<PropertyResult>> {
    let pop = Population::power_family(30, 1.0)?;
    let d = Design::new(30, 10)?;
    let xs: Vec<f64> = (0..20).map(|i| -2.0 + 0.25 * i as f64).collect();
    let thresholds: Vec<i64> = xs.iter().map(|&x| sum_threshold(&pop, &d, x).ceil() as i64).collect();
    let stats: Vec<Statistic> = thresholds.iter().map(|&t| Statistic::Sum { threshold: t as f64 }).collect();
    let mc = mc_tail_many(&pop, &d, &stats, reps, seed, workers)?;
    let mut agree = 0;
    let mut misses = Vec::new();
    let mut checked = 0;
    for ((x, &thr), est) in xs.iter().zip(&thresholds).zip(&mc) {
        let exact = exact_tail_dp(&pop, d.n, thr)?.probability();
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        checked += 1;
        if (est.p_hat - exact).abs() <= 4.0 * se {
            agree += 1;
        } else {
            misses.push(format!("x={x} threshold={thr}: {} vs {exact}", est.p_hat));
        }
    }
    let passed = agree >= 19;
    let mut detail = format!("{agree}/20 within 4 standard errors");
    if !misses.is_empty() {
        detail = format!("{detail}; outside at {}", misses.join(", "));
    }
    Ok(vec![PropertyResult {
        name: "dp_vs_mc".into(),
        passed,
        margin: agree as f64 - 19.0,
        checked,
        detail,
    }])
}

/// The associated distribution is a distribution function: nondecreasing,
/// 0 below the smallest attainable sum and 1 at the largest.
pub fn associated_suite() -> CliResult<Vec<PropertyResult>> {
    let mut check = Check::new("associated_cdf_shape");
    let pop = Population::power_family(14, 1.0)?.standardize();
    let (lo, hi) = pop.sum_range(7);
    for u in [-1.0, 0.0, 0.5, 2.0] {
        let mut last = -1.0;
        for i in 0..=40 {
            let x = lo - 0.5 + (hi - lo + 1.0) * i as f64 / 40.0;
            let h = associated_cdf(pop.values(), 7, u, x, AssociatedMode::Exact)?.value;
            check.pass((0.0..=1.0).contains(&h) && h >= last, || format!("u={u} x={x}: {h} after {last}"));
            last = h;
        }
        let below = associated_cdf(pop.values(), 7, u, lo - 1e-9, AssociatedMode::Exact)?.value;
        let top = associated_cdf(pop.values(), 7, u, hi + 1e-9, AssociatedMode::Exact)?.value;
        check.pass(below == 0.0 && (top - 1.0).abs() < 1e-15, || format!("u={u}: limits {below}, {top}"));
    }
    Ok(vec![check.finish()])
}

/// `|x0 / x - 1| <= 2 x^2 / n` for `x` in [1, 10], and `x / 2 <= x0 <= 3x / 2`
/// whenever `x^2 <= n / 4`.
pub fn x0_suite() -> CliResult<Vec<PropertyResult>> {
    let mut dev = Check::new("x0_deviation");
    let mut band = Check::new("x0_band");
    for n in [2usize, 5, 25, 250, 10_000] {
        for q in [0.05, 0.5, 0.95] {
            for i in 0..=90 {
                let x = 1.0 + i as f64 / 10.0;
                let r = x0_transform(x, n, q, 1.0)?;
                dev.le(r.rel_dev, 2.0 * x * x / n as f64, || format!("x={x} n={n} q={q}"));
            }
            for i in 0..=100 {
                let x = i as f64 / 10.0;
                if x * x > n as f64 / 4.0 {
                    break;
                }
                let r = x0_transform(x, n, q, 1.0)?;
                let at = || format!("x={x} n={n} q={q}");
                band.pass(r.x0 >= x / 2.0 && r.x0 <= 1.5 * x, at);
            }
        }
    }
    Ok(vec![dev.finish(), band.finish()])
}

/// Runs every suite at `level`. The seed and worker count come from `cfg`;
/// quick uses smaller sample counts and omits the Monte Carlo oracle check.
pub fn cmd_validate(cfg: &ExperimentConfig, level: Level, fault: Option<Fault>) -> CliResult<Report> {
    let mut report = Report::new(
        match level {
            Level::Quick => "validate quick",
            Level::Full => "validate full",
        },
        cfg,
    );
    let (samples, bern_reps) = match level {
        Level::Quick => (10_000, 20_000),
        Level::Full => (100_000, 100_000),
    };
    let props = &mut report.properties;
    props.extend(cgf_suite(cgf_impl(fault)));
    props.extend(tilt_suite()?);
    props.extend(mgf_suite()?);
    props.extend(normal_suite());
    props.extend(dp_enum_suite()?);
    props.extend(x0_suite()?);
    props.extend(associated_suite()?);
    props.extend(t_identity_suite(samples, cfg.seed)?);
    props.extend(bernoulli_suite(bern_reps, cfg.seed, cfg.workers)?);
    if level == Level::Full {
        props.extend(dp_mc_suite(100_000, cfg.seed, cfg.workers)?);
    }
    if let Some(f) = fault {
        report.notes.push(format!("fault injected: {f:?}"));
    }
    Ok(report)
}

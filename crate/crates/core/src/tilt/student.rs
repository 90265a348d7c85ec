//! Saddlepoint approximation of the Student t tail.
//!
//! `t_n >= x` is equivalent to `S_n >= c sqrt(n + V_1n)` with
//! `c = x0 sqrt(q)`, a curved region in the `(S_n, V_1n)` plane. The joint
//! density of `(S_n, V_1n)` is approximated through the Bernoulli
//! representation: i.i.d. inclusion indicators with `P(include) = p`,
//! conditioned on exactly `n` inclusions. With unit weights `w_k =
//! (1, a_k, a_k^2 - 1)` the three-dimensional saddlepoint density of
//! `(B_N, S, V)` at `(0, s, v)`, divided by `P(B_N = 0)`, is
//!
//! `exp(min_tau Phi(tau)) / ((2 pi)^{3/2} sqrt(det H) P(B_N = 0))`,
//! `Phi(tau) = sum K(tau . w_k) - tau_1 s - tau_2 v`, `H` its Hessian.
//!
//! The tail is the integral of that density over the region.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{cgf, linear_saddlepoint, tilt_coeffs, SaddlepointTail};
use crate::bounds::x0_transform;
use crate::error::{Error, Result};
use crate::population::{Design, Population};
use crate::sampling::bernoulli_acceptance_rate;

/// Point evaluation of the approximate joint density of `(S_n, V_1n)`.
#[derive(Debug, Clone)]
pub struct JointDensity {
    a: Vec<f64>,
    c: Vec<f64>,
    p: f64,
    log_pb0: f64,
}

/// Saddlepoint solution at one `(s, v)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub log_density: f64,
    pub tau: [f64; 3],
    /// Conditional covariance of `(S, V)` under the tilted law.
    pub cov: [[f64; 2]; 2],
}

type Sym3 = [[f64; 3]; 3];

fn cholesky_solve(h: &Sym3, g: &[f64; 3]) -> Option<([f64; 3], f64)> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = h[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; 3];
    for i in 0..3 {
        let mut s = g[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = y[i];
        for k in i + 1..3 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    let log_det = 2.0 * (l[0][0].ln() + l[1][1].ln() + l[2][2].ln());
    Some((x, log_det))
}

impl JointDensity {
    pub fn new(pop_std: &Population, d: &Design) -> Result<Self> {
        pop_std.check_standardized()?;
        if pop_std.len() != d.big_n {
            return Err(Error::InvalidParameter("population size differs from design".into()));
        }
        let a = pop_std.values().to_vec();
        let c = a.iter().map(|v| v * v - 1.0).collect();
        Ok(Self {
            a,
            c,
            p: d.p,
            log_pb0: bernoulli_acceptance_rate(d).ln(),
        })
    }

    fn objective(&self, tau: &[f64; 3], s: f64, v: f64) -> f64 {
        let k: f64 = self
            .a
            .iter()
            .zip(&self.c)
            .map(|(&a, &c)| cgf(tau[0] + tau[1] * a + tau[2] * c, self.p).k)
            .sum();
        k - tau[1] * s - tau[2] * v
    }

    fn derivatives(&self, tau: &[f64; 3], s: f64, v: f64) -> (f64, [f64; 3], Sym3) {
        let mut k = 0.0;
        let mut g = [0.0, -s, -v];
        let mut h = [[0.0; 3]; 3];
        for (&a, &c) in self.a.iter().zip(&self.c) {
            let w = [1.0, a, c];
            let z = tau[0] + tau[1] * a + tau[2] * c;
            let cv = cgf(z, self.p);
            k += cv.k;
            for i in 0..3 {
                g[i] += cv.k1 * w[i];
                for j in 0..=i {
                    h[i][j] += cv.k2 * w[i] * w[j];
                }
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                h[i][j] = h[j][i];
            }
        }
        (k - tau[1] * s - tau[2] * v, g, h)
    }

    /// Solves the saddlepoint equations at `(s, v)` starting from `start`.
    ///
    /// Returns `None` when `(s, v)` is outside the interior of the support,
    /// where the convex objective has no minimizer.
    pub fn point(&self, s: f64, v: f64, start: [f64; 3]) -> Option<DensityPoint> {
        let scale = self.a.len() as f64;
        let mut tau = start;
        let (mut phi, mut g, mut h) = self.derivatives(&tau, s, v);
        for _ in 0..100 {
            let (step, _) = cholesky_solve(&h, &g)?;
            let mut lam = 1.0;
            let next = loop {
                let cand = [tau[0] - lam * step[0], tau[1] - lam * step[1], tau[2] - lam * step[2]];
                let val = self.objective(&cand, s, v);
                if val <= phi + 1e-14 * phi.abs() {
                    break cand;
                }
                lam *= 0.5;
                if lam < 1e-10 {
                    return None;
                }
            };
            tau = next;
            (phi, g, h) = self.derivatives(&tau, s, v);
            if tau.iter().any(|t| t.abs() > 50.0 || !t.is_finite()) {
                return None;
            }
            if g.iter().all(|gi| gi.abs() <= 1e-10 * scale) {
                let (_, log_det) = cholesky_solve(&h, &g)?;
                let log_density =
                    phi - 0.5 * log_det - 1.5 * (2.0 * PI).ln() - self.log_pb0;
                let schur = |i: usize, j: usize| h[i][j] - h[i][0] * h[0][j] / h[0][0];
                return Some(DensityPoint {
                    log_density,
                    tau,
                    cov: [[schur(1, 1), schur(1, 2)], [schur(2, 1), schur(2, 2)]],
                });
            }
        }
        None
    }

    pub fn log_density(&self, s: f64, v: f64) -> Option<f64> {
        self.point(s, v, [0.0; 3]).map(|pt| pt.log_density)
    }

    /// Total mass of the density, by Simpson's rule over a box of
    /// `MASS_WIDTH` standard deviations around the mean `(0, 0)`.
    pub fn mass(&self, d: &Design) -> f64 {
        let big_n = self.a.len() as f64;
        let var_c = self.c.iter().map(|v| v * v).sum::<f64>() / big_n;
        let sd_s = d.omega;
        let sd_v = (d.n as f64 * d.q * var_c).sqrt();
        let (hs, hv) = (MASS_WIDTH * sd_s / PANELS as f64, MASS_WIDTH * sd_v / PANELS as f64);
        let (ws, wv) = (simpson(PANELS, hs), simpson(PANELS, hv));
        let mut total = 0.0;
        let mut row_start = [0.0; 3];
        for (j, wj) in wv.iter().enumerate() {
            let v = -MASS_WIDTH * sd_v + j as f64 * hv;
            let mut tau = row_start;
            let mut first = true;
            for (i, wi) in ws.iter().enumerate() {
                let s = -MASS_WIDTH * sd_s + i as f64 * hs;
                let pt = self.point(s, v, tau).or_else(|| self.point(s, v, [0.0; 3]));
                if let Some(pt) = pt {
                    tau = pt.tau;
                    if first {
                        row_start = pt.tau;
                        first = false;
                    }
                    total += wi * wj * pt.log_density.exp();
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentSaddlepoint {
    /// Approximation of `P(t_n >= x)`.
    pub value: f64,
    pub x: f64,
    pub x0: f64,
    /// `x0 sqrt(q)`: the region is `S_n >= c sqrt(n + V_1n)`.
    pub c: f64,
    /// Boundary point carrying the most density.
    pub peak_s: f64,
    pub peak_v: f64,
    /// Total mass of the unnormalized density; `value` is divided by it.
    pub mass: f64,
    pub grid_points: usize,
}

/// Composite Simpson weights for `2m` panels.
fn simpson(m: usize, h: f64) -> Vec<f64> {
    (0..=2 * m)
        .map(|i| {
            let w = if i == 0 || i == 2 * m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Densities below `peak * e^{-DROP}` are ignored.
const DROP: f64 = 30.0;
const PANELS: usize = 40;
/// Half-width, in standard deviations, of the box [`JointDensity::mass`] covers.
const MASS_WIDTH: f64 = 8.0;

/// Approximates `P(t_n >= x)` for `x > 0` by integrating the joint
/// saddlepoint density of `(S_n, V_1n)` over `S_n >= c sqrt(n + V_1n)`,
/// normalized by the total mass of that density.
pub fn saddlepoint_t_tail(pop: &Population, d: &Design, x: f64) -> Result<StudentSaddlepoint> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("t saddlepoint needs x > 0, got {x}")));
    }
    let std_pop = pop.standardize();
    let dens = JointDensity::new(&std_pop, d)?;
    let nf = d.n as f64;
    let x0 = x0_transform(x, d.n, d.q, d.omega)?.x0;
    let c = x0 * d.q.sqrt();
    let boundary = |v: f64| c * (nf + v).sqrt();

    let (v_lo, v_hi) = v1_range(&std_pop, d.n);
    let fail = |what: &str| Error::NoConvergence(format!("t saddlepoint at x = {x}: {what}"));

    // Locate the boundary point of highest density by golden-section search.
    let on_boundary = |v: f64, start: [f64; 3]| dens.point(boundary(v), v, start);
    let peak = locate_peak(v_lo, v_hi, |v| {
        on_boundary(v, [0.0; 3]).map_or(f64::NEG_INFINITY, |pt| pt.log_density)
    });
    let peak_pt = on_boundary(peak, [0.0; 3]).ok_or_else(|| fail("no interior boundary point"))?;

    // Step sizes from the tilted conditional spread at the peak.
    let sd_s = peak_pt.cov[0][0].sqrt();
    let sd_v = peak_pt.cov[1][1].sqrt();
    let rate = peak_pt.tau[1].abs().max(1e-12);
    let r_span = (1.0 / rate).min(sd_s);
    let v_span = sd_v;

    // Inner integral over r = s - boundary(v) >= 0 at fixed v.
    let inner = |v: f64, start: [f64; 3]| -> (f64, Option<[f64; 3]>, usize) {
        let b = boundary(v);
        let first = match dens.point(b, v, start) {
            Some(pt) => pt,
            None => return (0.0, None, 1),
        };
        // Extent: march until the density has dropped by DROP.
        let mut extent = r_span;
        let mut tau = first.tau;
        let mut evals = 1;
        loop {
            evals += 1;
            match dens.point(b + extent, v, tau) {
                Some(pt) if pt.log_density > first.log_density - DROP => {
                    tau = pt.tau;
                    extent *= 2.0;
                }
                _ => break,
            }
            if extent > 1e3 * r_span {
                break;
            }
        }
        let h = extent / (2 * PANELS) as f64;
        let w = simpson(PANELS, h);
        let mut tau = first.tau;
        let mut total = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let r = i as f64 * h;
            evals += 1;
            if let Some(pt) = dens.point(b + r, v, tau) {
                tau = pt.tau;
                total += wi * pt.log_density.exp();
            }
        }
        (total, Some(first.tau), evals)
    };

    // Outer integral over v, marching both ways from the peak.
    let (peak_val, _, mut evals) = inner(peak, peak_pt.tau);
    if !(peak_val > 0.0) {
        return Err(fail("zero density at the peak"));
    }
    let extent = |dir: f64| -> (f64, usize) {
        let mut e = v_span;
        let mut tau = peak_pt.tau;
        let mut ev = 0;
        loop {
            let v = peak + dir * e;
            if v <= v_lo || v >= v_hi {
                return ((v_lo.max(v.min(v_hi)) - peak).abs() * (1.0 - 1e-9), ev);
            }
            let (val, t, k) = inner(v, tau);
            ev += k;
            if let Some(t) = t {
                tau = t;
            }
            if val < peak_val * (-DROP).exp() {
                return (e, ev);
            }
            e *= 1.5;
        }
    };
    let (below, ev1) = extent(-1.0);
    let (above, ev2) = extent(1.0);
    evals += ev1 + ev2;

    let start = peak - below;
    let h = (below + above) / (2 * PANELS) as f64;
    let w = simpson(PANELS, h);
    let mut tau = peak_pt.tau;
    let mut total = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let (val, t, k) = inner(start + i as f64 * h, tau);
        evals += k;
        if let Some(t) = t {
            tau = t;
        }
        total += wi * val;
    }
    let mass = dens.mass(d);
    if !total.is_finite() || !(mass > 0.0) {
        return Err(fail("non-finite integral"));
    }
    Ok(StudentSaddlepoint {
        value: total / mass,
        x,
        x0,
        c,
        peak_s: boundary(peak),
        peak_v: peak,
        mass,
        grid_points: evals,
    })
}

/// Approximates `P(t_n >= x)` through the quadratic-tilt event
/// `b0 S_n - b0^2 q V_1n / 2 >= x0^2`, `b0 = x0 / omega`, on the
/// standardized scale. That event implies `t_n >= x`, so this sits below
/// [`saddlepoint_t_tail`] and the gap grows with `x`.
pub fn reduction_t_tail(pop: &Population, d: &Design, x: f64) -> Result<SaddlepointTail> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("t saddlepoint needs x > 0, got {x}")));
    }
    let x0 = x0_transform(x, d.n, d.q, d.omega)?.x0;
    let coeffs = tilt_coeffs(&pop.standardize(), d, x0, 1.0, 0.5, 0.0)?;
    linear_saddlepoint(&coeffs.coeffs, d, x0 * x0)
}

/// Open interval of attainable `V_1n` values.
fn v1_range(pop_std: &Population, n: usize) -> (f64, f64) {
    let mut c: Vec<f64> = pop_std.values().iter().map(|a| a * a - 1.0).collect();
    c.sort_by(f64::total_cmp);
    let lo = c[..n].iter().sum();
    let hi = c[c.len() - n..].iter().sum();
    (lo, hi)
}

/// Coarse scan followed by golden-section refinement around the best node.
fn locate_peak(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const NODES: usize = 64;
    let h = (hi - lo) / NODES as f64;
    let best = (1..NODES)
        .map(|i| (i, f(lo + i as f64 * h)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(NODES / 2, |(i, _)| i);
    let centre = lo + best as f64 * h;
    golden_max(centre - h, centre + h, f)
}

fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-9 * (1.0 + hi.abs().max(lo.abs())) {
            break;
        }
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

use super::*;
use crate::bounds::normal_cdf;
use crate::sampling::exact_tail_dp;

fn std_linear(big_n: usize) -> Population {
    Population::power_family(big_n, 1.0).unwrap().standardize()
}

#[test]
fn coefficients_collapse_to_linear() {
    let pop = std_linear(50);
    let d = Design::new(50, 20).unwrap();
    let t = tilt_coeffs(&pop, &d, 1.3, 1.0, 0.0, 0.0).unwrap();
    for (bk, a) in t.coeffs.iter().zip(pop.values()) {
        assert!((bk - 1.3 / d.omega * a).abs() < 1e-15);
    }
}

#[test]
fn coefficients_match_elementwise_evaluation() {
    let pop = std_linear(100);
    let d = Design::new(100, 25).unwrap();
    let t = tilt_coeffs(&pop, &d, 1.0, 1.0, 0.5, 36.0).unwrap();
    // numpy evaluation of the defining formula at k = 1, 50, 100
    let expect = [(0, -0.2639817118147707), (49, 0.02749306649616831), (99, 0.5280578911554766)];
    for (k, v) in expect {
        assert!((t.coeffs[k] - v).abs() < 1e-13, "k = {k}");
    }
    let sum: f64 = t.coeffs.iter().sum();
    let max = t.coeffs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    assert!(sum.abs() <= 1e-9 * 100.0 * max);
}

#[test]
fn coefficients_reject_bad_input() {
    let raw = Population::power_family(20, 1.0).unwrap();
    let d = Design::new(20, 5).unwrap();
    assert!(matches!(
        tilt_coeffs(&raw, &d, 1.0, 1.0, 0.0, 0.0),
        Err(Error::NotStandardized { .. })
    ));
    let pop = raw.standardize();
    assert!(tilt_coeffs(&pop, &d, 1.0, 0.0, 0.0, 0.0).is_err());
    assert!(tilt_coeffs(&pop, &d, 1.0, 1.0, 1.5, 0.0).is_err());
    assert!(tilt_coeffs(&pop, &d, 1.0, 1.0, 0.0, 80.0).is_err());
}

#[test]
fn coefficient_moment_bounds_in_regime() {
    let pop = std_linear(1000);
    let d = Design::new(1000, 250).unwrap();
    let m = pop.moments();
    let x = d.omega / (128.0 * m.max_dev);
    let big_n = 1000.0;
    for lambda in [0.5, 1.0, 2.0] {
        for theta in [0.0, 0.5, 1.0] {
            for theta1 in [-72.0, 0.0, 72.0] {
                let t = tilt_coeffs(&pop, &d, x, lambda, theta, theta1).unwrap();
                let b = t.b;
                let ss: f64 = t.coeffs.iter().map(|v| v * v).sum();
                let s3: f64 = t.coeffs.iter().map(|v| v.abs().powi(3)).sum();
                assert!(t.coeffs.iter().all(|v| v.abs() <= 1.0 / 32.0));
                assert!((ss - lambda * lambda * b * b * big_n).abs() <= 5.0 * big_n * b.powi(3) * d.q * m.beta3);
                assert!(s3 <= 9.0 * big_n * b.powi(3) * m.beta3);
            }
        }
    }
}

#[test]
fn alpha_zero_cases() {
    let sym = [0.7, -0.7, 0.2, -0.2, 1.5, -1.5];
    for u in [0.1, 1.0, 5.0] {
        assert!(solve_alpha(&sym, 0.5, u).unwrap().alpha.abs() < 1e-14);
    }
    let root = solve_alpha(&[0.0; 8], 0.3, 2.0).unwrap();
    assert_eq!(root.alpha, 0.0);
}

#[test]
fn alpha_residual_meets_tolerance() {
    let pop = Population::power_family(200, 2.0).unwrap().standardize();
    for p in [0.05, 0.3, 0.5, 0.9] {
        for u in [0.01, 0.5, 3.0, 20.0] {
            let root = solve_alpha(pop.values(), p, u).unwrap();
            assert!(root.residual <= 1e-12 * 200.0 * p * (1.0 - p), "p={p} u={u}");
        }
    }
    assert!(solve_alpha(&[1.0, -1.0], 1.0, 1.0).is_err());
    assert!(solve_alpha(&[f64::NAN, 1.0], 0.5, 1.0).is_err());
}

#[test]
fn moments_of_zero_coefficients() {
    let s = tilt_moments(&[0.0; 10], 0.3, 1.0, 0.0);
    assert_eq!(s.m_n, 0.0);
    assert_eq!(s.sigma_n2, 0.0);
    assert_eq!(s.k_sum, 0.0);
    assert!((s.k2_sum - 10.0 * 0.3 * 0.7).abs() < 1e-14);
}

#[test]
fn two_point_tilted_mean() {
    let c = 0.8;
    let s = tilt_state(&[c, -c], 0.5, 1.0).unwrap();
    assert!(s.alpha.abs() < 1e-15);
    assert!((s.m_n - 2.0 * c * cgf(c, 0.5).k1).abs() < 1e-15);
}

/// Root and tilted-sum bounds at x in {0.5, 1, 2} and at the edge of the
/// small-x regime, over a grid of coefficient parameters.
#[test]
fn root_and_tilted_sum_bounds() {
    let pop = std_linear(1000);
    let d = Design::new(1000, 250).unwrap();
    let m = pop.moments();
    let (om, beta) = (d.omega, m.beta3);
    let edge = om / (128.0 * m.max_dev);
    for x in [edge, 0.5, 1.0, 2.0] {
        for lambda in [0.5, 1.0, 2.0] {
            for theta in [0.0, 0.5, 1.0] {
                for theta1 in [-72.0, 0.0, 36.0, 72.0] {
                    let t = tilt_coeffs(&pop, &d, x, lambda, theta, theta1).unwrap();
                    let b = t.b;
                    let s = tilt_state(&t.coeffs, d.p, 1.0).unwrap();
                    let ss: f64 = t.coeffs.iter().map(|v| v * v).sum();
                    let b2k2 = s.b2k2_sum;
                    let l2x2 = lambda * lambda * x * x;
                    let ctx = format!("x={x} lambda={lambda} theta={theta} theta1={theta1}");
                    assert!(s.alpha.abs() <= (1.0 / 32.0f64).min(2.0 / 1000.0 * ss), "{ctx}");
                    assert!(s.alpha * s.alpha <= 9.0 / 8.0 * b.powi(3) * beta, "{ctx}");
                    assert!((s.k_sum - l2x2 / 2.0).abs() <= 24.0 * x.powi(3) * beta / om, "{ctx}");
                    assert!((s.m_n - l2x2).abs() <= 24.0 * x.powi(3) * beta / om, "{ctx}");
                    assert!((s.k2_sum - om * om).abs() <= 41.0 * x * x, "{ctx}");
                    assert!(s.bk2_sum.abs() <= 6.0 * x * x, "{ctx}");
                    assert!((b2k2 - l2x2).abs() <= 21.0 * x.powi(3) * beta / om, "{ctx}");
                }
            }
        }
    }
}

#[test]
fn mgf_exact_small_cases() {
    let v = mgf_exact(&[1.0, -1.0], 1, 1.0).unwrap();
    assert!((v - 1f64.cosh()).abs() < 1e-15);
    assert_eq!(mgf_exact(&[0.3, -2.0, 5.0, 1.0], 2, 0.0).unwrap(), 1.0);
}

#[test]
fn mgf_exact_matches_bitmask_enumeration() {
    let b: Vec<f64> = (0..12).map(|k| ((k * 7 % 12) as f64 - 5.5) / 4.0 + 0.1 * (k as f64).sin()).collect();
    let u = 0.7;
    let (mut acc, mut count) = (0.0, 0u32);
    for mask in 0u32..(1 << 12) {
        if mask.count_ones() == 6 {
            let t: f64 = (0..12).filter(|k| mask >> k & 1 == 1).map(|k| b[k]).sum();
            acc += (u * t).exp();
            count += 1;
        }
    }
    let other = mgf_exact(&b, 6, u).unwrap();
    assert!((other - acc / count as f64).abs() < 1e-12 * other);
}

#[test]
fn mgf_relative_error_shrinks_with_population() {
    for u in [0.1, 0.3] {
        let mut last = f64::INFINITY;
        for big_n in [10, 16, 22] {
            let pop = std_linear(big_n);
            let d = Design::new(big_n, big_n / 2).unwrap();
            let approx = mgf_approx(pop.values(), &d, u).unwrap().value;
            let exact = mgf_exact(pop.values(), d.n, u).unwrap();
            let err = (approx / exact - 1.0).abs();
            assert!(err <= 10.0 / d.omega, "N={big_n} u={u} err={err}");
            assert!(err < last, "N={big_n} u={u}");
            last = err;
        }
    }
}

#[test]
fn mgf_untilted_is_stirling_factor() {
    let d = Design::new(400, 200).unwrap();
    let coeffs = std_linear(400).values().to_vec();
    let m = mgf_approx(&coeffs, &d, 0.0).unwrap();
    assert_eq!(m.state.alpha, 0.0);
    assert_eq!(m.state.k_sum, 0.0);
    assert!((m.value - 1.0).abs() <= 1.0 / (4.0 * d.omega * d.omega));
    assert!(m.gn_p > 0.0 && m.gn_p <= (2.0 * std::f64::consts::PI).sqrt());
}

#[test]
fn mgf_two_point_regression() {
    let d = Design::new(2, 1).unwrap();
    let m = mgf_approx(&[1.0, -1.0], &d, 1.0).unwrap();
    // 30-digit evaluation of the closed form
    assert!((m.value - 1.617_894_736_140_049_7).abs() < 1e-14);
    assert!((m.value / 1f64.cosh() - 1.048_483_598_093_863_4).abs() < 1e-14);
}

#[test]
fn associated_cdf_limits() {
    let pop = std_linear(12);
    let b = pop.values();
    let inf = associated_cdf(b, 5, 0.4, f64::INFINITY, AssociatedMode::Exact).unwrap();
    assert_eq!(inf.value, 1.0);
    let low = associated_cdf(b, 5, 0.4, -100.0, AssociatedMode::Exact).unwrap();
    assert_eq!(low.value, 0.0);
    // u = 0 is the plain distribution function.
    let mut below = 0u32;
    let total = for_each_subset(b, 5, |s| below += u32::from(s.iter().sum::<f64>() <= 0.5)).unwrap();
    let h = associated_cdf(b, 5, 0.0, 0.5, AssociatedMode::Exact).unwrap();
    assert!((h.value - below as f64 / total as f64).abs() < 1e-14);
}

#[test]
fn associated_cdf_monte_carlo_agrees_with_exact() {
    let pop = Population::power_family(12, 2.0).unwrap().standardize();
    let b = pop.values();
    for (u, x) in [(0.3, 0.0), (0.8, 1.5), (1.2, 3.0)] {
        let exact = associated_cdf(b, 6, u, x, AssociatedMode::Exact).unwrap();
        let mc = associated_cdf(
            b,
            6,
            u,
            x,
            AssociatedMode::MonteCarlo { reps: 40_000, seed: 11, workers: 3 },
        )
        .unwrap();
        assert!(
            (mc.value - exact.value).abs() <= 4.0 * mc.stderr,
            "u={u} x={x}: {} vs {} (se {})",
            mc.value,
            exact.value,
            mc.stderr
        );
    }
}

#[test]
fn associated_cdf_is_near_normal() {
    for alpha in [1.0, 2.0, 0.5] {
        let pop = Population::power_family(22, alpha).unwrap().standardize();
        let d = Design::new(22, 11).unwrap();
        let max_b = pop.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let u = 1.0 / (32.0 * max_b);
        let b = pop.values();
        let s = tilt_state(b, d.p, u).unwrap();
        let sigma = s.sigma_n2.sqrt();
        let ss: f64 = b.iter().map(|v| v * v).sum();
        let s3: f64 = b.iter().map(|v| v.abs().powi(3)).sum();
        let shape = s3 / (d.pq().sqrt() * ss.powf(1.5));

        // Exact H at every attainable sum, via one pass over the subsets.
        let mut sums: Vec<(f64, f64)> = Vec::new();
        for_each_subset(b, d.n, |sub| {
            let t: f64 = sub.iter().sum();
            sums.push((t, (u * t).exp()));
        })
        .unwrap();
        sums.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = sums.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let mut sup = 0.0f64;
        for (t, w) in &sums {
            let before = acc / total;
            acc += w;
            let phi = normal_cdf((t - s.m_n) / sigma);
            sup = sup.max((before - phi).abs()).max((acc / total - phi).abs());
        }
        // Spot check against the public evaluator.
        let mid = associated_cdf(b, d.n, u, s.m_n, AssociatedMode::Exact).unwrap().value;
        assert!((mid - normal_cdf(0.0)).abs() <= sup + 1e-12);
        assert!(sup <= 5.0 * shape, "alpha={alpha}: sup {sup} vs cap {}", 5.0 * shape);
    }
}

#[test]
fn sum_saddlepoint_against_dp() {
    let raw = Population::power_family(30, 1.0).unwrap();
    let pop = raw.standardize();
    let d = Design::new(30, 10).unwrap();
    let m = raw.moments();
    let y = 1.5 * d.omega;
    let sp = saddlepoint_tail(&pop, &d, y).unwrap();
    let threshold = (d.n as f64 * m.mu + y * m.sigma()).ceil() as i64;
    let exact = exact_tail_dp(&raw, d.n, threshold).unwrap().probability();
    let ratio = sp.value / exact;
    assert!((0.8..=1.2).contains(&ratio), "ratio {ratio}");
    assert!((sp.state.m_n - y).abs() <= 1e-9 * y.max(1.0));
    assert!(sp.eps.abs() < 1e-8);
}

#[test]
fn sum_saddlepoint_small_threshold_tends_to_half() {
    let pop = std_linear(200);
    let d = Design::new(200, 80).unwrap();
    let sp = saddlepoint_tail(&pop, &d, 1e-6).unwrap();
    assert!(sp.u < 1e-6);
    assert!((sp.value - 0.5).abs() < 0.01, "{}", sp.value);
}

#[test]
fn sum_saddlepoint_rejects_unattainable() {
    let pop = std_linear(20);
    let d = Design::new(20, 5).unwrap();
    let (_, hi) = pop.sum_range(5);
    assert!(matches!(saddlepoint_tail(&pop, &d, hi + 0.1), Err(Error::OutOfRange(_))));
    assert!(matches!(saddlepoint_tail(&pop, &d, 0.0), Err(Error::OutOfRange(_))));
}

#[test]
fn conjugate_tail_at_matched_tilt_equals_mean_matched() {
    let pop = std_linear(60);
    let d = Design::new(60, 20).unwrap();
    let matched = saddlepoint_tail(&pop, &d, 2.0 * d.omega / 3.0).unwrap();
    let fixed = conjugate_tail(pop.values(), &d, matched.u, matched.y).unwrap();
    assert!((fixed.value / matched.value - 1.0).abs() < 1e-7);
    // Away from the matched tilt the Gaussian correction still gives a
    // comparable answer.
    let off = conjugate_tail(pop.values(), &d, 1.3 * matched.u, matched.y).unwrap();
    assert!((off.value / matched.value - 1.0).abs() < 0.1);
    assert!(off.eps.abs() > 0.1);
}

#[test]
fn remainder_bound_scales_with_constant() {
    let pop = std_linear(100);
    let d = Design::new(100, 25).unwrap();
    let sp = saddlepoint_tail(&pop, &d, 2.0 * d.omega).unwrap();
    assert!(sp.remainder_scale > 0.0);
    assert_eq!(sp.remainder_bound(2.0), 2.0 * sp.remainder_scale);
}

#[test]
fn linear_saddlepoint_centres_coefficients() {
    let pop = std_linear(40);
    let d = Design::new(40, 10).unwrap();
    let y = 1.2 * d.omega;
    let base = linear_saddlepoint(pop.values(), &d, y).unwrap();
    let shifted: Vec<f64> = pop.values().iter().map(|v| v + 3.0).collect();
    let moved = linear_saddlepoint(&shifted, &d, y + 30.0).unwrap();
    assert!((moved.value / base.value - 1.0).abs() < 1e-9);
}

#[test]
fn t_saddlepoint_tracks_monte_carlo() {
    use crate::sampling::mc_tail_t;
    let pop = Population::power_family(60, 1.0).unwrap();
    let d = Design::new(60, 15).unwrap();
    let sp = saddlepoint_t_tail(&pop, &d, 2.0).unwrap();
    let mc = mc_tail_t(&pop, &d, 2.0, 40_000, 5, 2).unwrap();
    let ratio = mc.p_hat / sp.value;
    assert!((ratio - 1.0).abs() <= 0.1 + 4.0 * mc.stderr / sp.value, "ratio {ratio}");
    assert!(saddlepoint_t_tail(&pop, &d, 0.0).is_err());
}

#[test]
fn joint_density_mass_tends_to_one() {
    // Trapezoid rule over a box of +-6 standard deviations around the mean.
    let mut last = f64::INFINITY;
    for (big_n, n) in [(40usize, 12usize), (100, 25), (400, 100)] {
        let pop = std_linear(big_n);
        let d = Design::new(big_n, n).unwrap();
        let dens = JointDensity::new(&pop, &d).unwrap();
        let sd_s = d.omega;
        let c: Vec<f64> = pop.values().iter().map(|a| a * a - 1.0).collect();
        let var_c = c.iter().map(|v| v * v).sum::<f64>() / big_n as f64;
        let sd_v = (d.n as f64 * d.q * var_c).sqrt();
        let steps = 60;
        let (hs, hv) = (12.0 * sd_s / steps as f64, 12.0 * sd_v / steps as f64);
        let mut total = 0.0;
        for i in 0..=steps {
            for j in 0..=steps {
                let s = -6.0 * sd_s + i as f64 * hs;
                let v = -6.0 * sd_v + j as f64 * hv;
                if let Some(ld) = dens.log_density(s, v) {
                    total += ld.exp() * hs * hv;
                }
            }
        }
        let err = (total - 1.0).abs();
        assert!(err < last && err < 0.15, "N = {big_n}: mass {total}");
        last = err;
    }
    assert!(last < 0.02);
}

#[test]
fn density_mass_matches_box_quadrature() {
    let pop = std_linear(100);
    let d = Design::new(100, 25).unwrap();
    let dens = JointDensity::new(&pop, &d).unwrap();
    let mass = dens.mass(&d);
    assert!(mass > 1.0 && mass < 1.1, "mass {mass}");
    let sp = saddlepoint_t_tail(&pop, &d, 2.0).unwrap();
    assert_eq!(sp.mass, mass);
}

#[test]
fn reduction_sits_below_joint_saddlepoint() {
    use crate::sampling::mc_tail_t;
    let pop = Population::power_family(60, 1.0).unwrap();
    let d = Design::new(60, 15).unwrap();
    let mc = mc_tail_t(&pop, &d, 2.0, 40_000, 5, 2).unwrap();
    let mut last = f64::INFINITY;
    for x in [1.5, 2.0, 2.5] {
        let joint = saddlepoint_t_tail(&pop, &d, x).unwrap().value;
        let red = reduction_t_tail(&pop, &d, x).unwrap().value;
        assert!(red < joint, "x = {x}: {red} vs {joint}");
        assert!(red / joint < last);
        last = red / joint;
    }
    let red = reduction_t_tail(&pop, &d, 2.0).unwrap().value;
    assert!((mc.p_hat / red - 1.0).abs() <= 0.15 + 4.0 * mc.stderr / red);
    assert!(reduction_t_tail(&pop, &d, 0.0).is_err());
}

//! The `finpop` binary end to end: flags, config files, formats, exit codes.

use std::process::{Command, Output};

use finpop_cli::{ExperimentConfig, Report};

fn finpop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finpop")).args(args).output().unwrap()
}

fn json_report(args: &[&str]) -> Report {
    let out = finpop(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Report::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

#[test]
fn moments_of_a_two_point_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.txt");
    std::fs::write(&path, "-1\n1\n").unwrap();
    let spec = format!("file:{}", path.display());
    let r = json_report(&["moments", "--population", &spec, "--n", "1"]);
    assert_eq!(r.moments[0].beta3, 1.0);
    assert_eq!(r.moments[0].big_n, 2);
}

#[test]
fn json_round_trips() {
    let out = finpop(&["tail", "--population", "power:60:1", "--n", "15", "--x", "0.5,1", "--x", "1.5", "--reps", "5000", "--A", "0.3", "--method", "mc,saddlepoint"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let r = Report::from_json(&text).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert_eq!(r.to_json().unwrap(), text);
    assert_eq!(Report::from_json(&r.to_json().unwrap()).unwrap(), r);
}

#[test]
fn csv_has_header_and_one_line_per_row() {
    let out = finpop(&["tail", "--population", "power:60:1", "--n", "15", "--x", "0.5,1,2", "--reps", "2000", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("population,N,n,statistic,method,x,p_hat,stderr"));
    assert!(lines[1].starts_with("power:60:1,60,15,sum,mc,0.5,"));
}

#[test]
fn text_format_renders() {
    let out = finpop(&["envelope", "--population", "power:100:2", "--n", "25", "--A", "0.5", "--format", "text"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# envelope"));
    assert_eq!(text.lines().filter(|l| l.contains("power:100:2")).count(), 3);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let cfg = ExperimentConfig {
        population: Some("power:40:1".parse().unwrap()),
        n: Some(10),
        x_grid: vec![1.0],
        reps: 3000,
        seed: 5,
        workers: 2,
        ..Default::default()
    };
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let cfg_path = path.to_str().unwrap();
    let r = json_report(&["tail", "--config", cfg_path]);
    assert_eq!(r.config, cfg);
    let r = json_report(&["tail", "--config", cfg_path, "--reps", "1000", "--x", "0,2"]);
    assert_eq!(r.config.reps, 1000);
    assert_eq!(r.config.x_grid, vec![0.0, 2.0]);
    assert_eq!(r.config.n, Some(10));
    assert_eq!(r.rows.len(), 2);
}

#[test]
fn out_file_is_bit_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let out = finpop(&["t-tail", "--population", "power:200:2", "--n", "50", "--reps", "20000", "--seed", "3", "--workers", "3", "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn t_tail_is_tail_with_t_statistic() {
    let args = ["--population", "power:80:1", "--n", "20", "--reps", "4000", "--x", "1"];
    let a = json_report(&[&["t-tail"], &args[..]].concat());
    let b = json_report(&[&["tail", "--statistic", "t"], &args[..]].concat());
    assert_eq!(a.rows, b.rows);
}

#[test]
fn t_saddlepoint_choice() {
    let args = ["t-tail", "--population", "power:60:1", "--n", "15", "--x", "1.5,2.5", "--method", "saddlepoint"];
    let joint = json_report(&args);
    let red = json_report(&[&args[..], &["--t-saddlepoint", "reduction"]].concat());
    for (j, r) in joint.rows.iter().zip(&red.rows) {
        assert!(r.p_hat < j.p_hat, "x = {}: {} vs {}", j.x, r.p_hat, j.p_hat);
    }
    assert_eq!(finpop(&[&args[..], &["--t-saddlepoint", "other"]].concat()).status.code(), Some(1));
}

#[test]
fn symmetric_sum_at_zero_is_half() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pm.txt");
    let values: Vec<&str> = (0..40).map(|k| if k % 2 == 0 { "1" } else { "-1" }).collect();
    std::fs::write(&path, values.join("\n")).unwrap();
    let spec = format!("file:{}", path.display());
    let r = json_report(&["tail", "--population", &spec, "--n", "11", "--x", "0", "--reps", "40000"]);
    let row = &r.rows[0];
    // Odd n: the sum is never 0, so P(S >= 0) = 1/2 exactly by symmetry.
    assert!((row.ratio - 1.0).abs() <= 3.0 * row.ratio_stderr, "{}", row.ratio);
}

#[test]
fn quadratic_without_correction_matches_sum() {
    let args = ["--population", "power:100:1", "--n", "25", "--x", "0.5,1.5", "--reps", "40000"];
    let q = json_report(&[&["quadratic", "--xi", "0", "--xi1", "0", "--h", "0", "--seed", "9"], &args[..]].concat());
    let s = json_report(&[&["tail", "--statistic", "sum", "--seed", "10"], &args[..]].concat());
    for (a, b) in q.rows.iter().zip(&s.rows) {
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.p_hat - b.p_hat).abs() <= 3.0 * se, "x = {}: {} vs {}", a.x, a.p_hat, b.p_hat);
    }
}

#[test]
fn exit_status_contract() {
    assert_eq!(finpop(&["moments", "--population", "power:10:1"]).status.code(), Some(0));
    assert_eq!(finpop(&["moments", "--population", "nope"]).status.code(), Some(1));
    assert_eq!(finpop(&["moments", "--population", "file:/no/such/file"]).status.code(), Some(1));
    assert_eq!(finpop(&["tail", "--population", "power:10:1", "--n", "3", "--x", "2,1"]).status.code(), Some(1));
    assert_eq!(finpop(&["tail", "--population", "power:10:1", "--n", "3", "--workers", "0"]).status.code(), Some(1));
    assert_eq!(finpop(&["envelope", "--population", "power:10:1", "--n", "3"]).status.code(), Some(1));
    let bad = finpop(&["validate", "--fault", "curvature"]);
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8(bad.stderr).unwrap();
    assert!(err.contains("cgf_curvature_bound") && err.contains("z="), "{err}");
}

#[test]
fn quick_validation_passes() {
    let r = json_report(&["validate", "--level", "quick"]);
    assert!(r.failed_properties().is_empty());
    assert!(r.properties.iter().any(|p| p.name == "cgf_curvature_bound"));
    assert!(!r.properties.iter().any(|p| p.name == "dp_vs_mc"));
}

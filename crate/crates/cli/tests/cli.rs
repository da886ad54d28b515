use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_aptprice");

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn write_spec(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("spec.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn error_line(o: &Output) -> String {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    lines[0].to_string()
}

#[test]
fn selftest_passes_and_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&["selftest"], a.path()).status.success());
    assert!(run(&["selftest"], b.path()).status.success());
    let fa = std::fs::read(a.path().join("selftest.csv")).unwrap();
    let fb = std::fs::read(b.path().join("selftest.csv")).unwrap();
    assert_eq!(fa, fb);
    let (header, rows) = read_csv(&a.path().join("selftest.csv"));
    assert_eq!(header, ["check", "expected", "observed", "pass"]);
    assert!(rows.iter().all(|r| r[3] == "true"));
}

#[test]
fn cash_claim_prices_to_its_value() {
    let d = tempfile::tempdir().unwrap();
    let s = spec("cash_claim.json");
    let o = run(&["superreplicate", "--spec", s.to_str().unwrap()], d.path());
    assert!(o.status.success());
    let (header, rows) = read_csv(&d.path().join("superreplicate.csv"));
    assert_eq!(header, ["n", "primal", "dual", "gap"]);
    assert_eq!(rows.len(), 1);
    assert!((col(&rows, 1)[0] - 0.7).abs() < 1e-12);
    assert!((col(&rows, 2)[0] - 0.7).abs() < 1e-12);
    let (_, hedge) = read_csv(&d.path().join("superreplicate-hedge.csv"));
    assert!(col(&hedge, 1).iter().all(|h| h.abs() < 1e-12));
}

#[test]
fn bundled_convergence_gap_shrinks() {
    let d = tempfile::tempdir().unwrap();
    let s = spec("convergence_n2.json");
    let o = run(&["convergence", "--spec", s.to_str().unwrap()], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&d.path().join("convergence.csv"));
    assert_eq!(header, ["gamma", "price", "pi", "gap", "iterations", "runtime_ms"]);
    let gap = col(&rows, 3);
    assert_eq!(gap.len(), 5);
    assert!(gap.windows(2).all(|w| w[1] < w[0]), "{gap:?}");
    assert!(gap[4] < 0.05);
    assert!(col(&rows, 5).iter().all(|&t| t == 0.0));
}

#[test]
fn timing_flag_fills_runtime() {
    let d = tempfile::tempdir().unwrap();
    let s = spec("convergence_n2.json");
    let o = run(&["convergence", "--timing", "--spec", s.to_str().unwrap()], d.path());
    assert!(o.status.success());
    let (_, rows) = read_csv(&d.path().join("convergence.csv"));
    assert!(col(&rows, 5).iter().all(|&t| t > 0.0));
}

#[test]
fn harmonic_truncation_curve() {
    let d = tempfile::tempdir().unwrap();
    let s = spec("harmonic_truncation.json");
    assert!(run(&["truncation-curve", "--spec", s.to_str().unwrap()], d.path()).status.success());
    let (_, rows) = read_csv(&d.path().join("truncation-curve.csv"));
    let primal = col(&rows, 1);
    for (n, p) in (1..=8).zip(primal) {
        let tail: f64 = (n + 1..=8).map(|j| 1.0 / j as f64).sum();
        assert!((p - tail).abs() < 1e-8, "n={n}: {p} vs {tail}");
    }
}

#[test]
fn rational_mode_reports_exact_gap() {
    let d = tempfile::tempdir().unwrap();
    let s = spec("cash_claim.json");
    let o = run(&["superreplicate", "--rational", "--spec", s.to_str().unwrap()], d.path());
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("exact gap               0"), "{stdout}");
}

#[test]
fn utility_foc_case() {
    let d = tempfile::tempdir().unwrap();
    let s = spec("utility_foc.json");
    assert!(run(&["maximize-utility", "--spec", s.to_str().unwrap()], d.path()).status.success());
    let (_, rows) = read_csv(&d.path().join("maximize-utility-hedge.csv"));
    assert!((col(&rows, 1)[0] - 3f64.ln() / 2.0).abs() < 1e-6);
}

#[test]
fn moment_check_depends_only_on_seed() {
    let d = tempfile::tempdir().unwrap();
    let s = write_spec(
        d.path(),
        r#"{"spec_version": 1, "sources": [{"rademacher": true, "count": 5}],
            "model": {"b": [0.1, 0.0, 0.0, -0.2, 0.0]},
            "moment": {"gamma": 3.0, "n_h": 10, "n_mc": 500}}"#,
    );
    let s = s.to_str().unwrap();
    let read = |dir: &Path| std::fs::read(dir.join("moment-check-directions.csv")).unwrap();
    let (a, b, c) = (d.path().join("a"), d.path().join("b"), d.path().join("c"));
    assert!(run(&["moment-check", "--spec", s, "--seed", "5"], &a).status.success());
    assert!(run(&["moment-check", "--spec", s, "--seed", "5", "--threads", "1"], &b).status.success());
    assert!(run(&["moment-check", "--spec", s, "--seed", "6"], &c).status.success());
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let (header, _) = read_csv(&a.join("moment-check-tail.csv"));
    assert_eq!(header, ["level", "tail_second_moment"]);
}

#[test]
fn exit_codes_and_error_lines() {
    let d = tempfile::tempdir().unwrap();
    // unknown key
    let s = write_spec(
        d.path(),
        r#"{"spec_version": 1, "sources": [{"rademacher": true}], "model": {"b": [0.0]}, "colour": 1}"#,
    );
    let o = run(&["superreplicate", "--spec", s.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(error_line(&o).starts_with("error: kind=validation reason=\""));

    // missing spec file
    let o = run(&["dual-price", "--spec", "/nonexistent/spec.json"], d.path());
    assert_eq!(o.status.code(), Some(1));

    // shift outside the support: arbitrage
    let s = write_spec(
        d.path(),
        r#"{"spec_version": 1, "sources": [{"rademacher": true}], "model": {"b": [2.0]}, "claim": {"constant": 1.0}}"#,
    );
    let s = s.to_str().unwrap();
    let o = run(&["superreplicate", "--spec", s], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o).starts_with("error: kind=arbitrage"));
    let o = run(&["dual-price", "--spec", s], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o).starts_with("error: kind=infeasible"));
    // detecting arbitrage is what check-arbitrage is for
    let o = run(&["check-arbitrage", "--spec", s], d.path());
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&d.path().join("check-arbitrage.csv"));
    assert_eq!(rows[0][0], "false");

    // reservation price of a claim that is not nonnegative
    let s = write_spec(
        d.path(),
        r#"{"spec_version": 1, "sources": [{"rademacher": true}], "model": {"b": [0.0]},
            "claim": {"series": [1.0]}, "wealth": 1.0, "utility": {"family": "cara", "param": 1.0}}"#,
    );
    let o = run(&["reservation-price", "--spec", s.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["no-such-command"], d.path());
    assert_eq!(o.status.code(), Some(1));
}

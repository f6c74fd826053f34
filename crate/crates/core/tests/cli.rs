//! Black-box tests of the `tlmor` binary.

use std::path::Path;
use std::process::{Command, Output};

use tlmor::bench_io::{load_report, read_matrix_market, write_matrix_market};
use tlmor::linalg::Mat;

fn tlmor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlmor")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Row {
    method: String,
    values: Vec<Option<f64>>,
}

fn parse_table(text: &str) -> Vec<Row> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split_whitespace();
            let method = cols.next().unwrap().to_string();
            let values = cols.map(|c| c.parse().ok()).collect();
            Row { method, values }
        })
        .collect()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| if v.is_empty() { f64::NAN } else { v.parse().unwrap() }).collect())
        .collect();
    (header, rows)
}

#[test]
fn reduce_heat_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["reduce", "--gen-heat", "200", "--order", "5", "--horizon", "1", "--seed", "7", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = load_report(dir.path().join("report.json")).unwrap();
    assert_eq!(report.system.n, 200);
    assert_eq!(report.methods.len(), 2);
    let tl = report.methods.iter().find(|m| m.method.name() == "tlirka").unwrap();
    assert!(tl.metrics.e_c.is_some() && tl.metrics.e_b.is_some() && tl.metrics.e_lambda.is_some());
    assert!(tl.deviation_norms.is_some());
    for name in ["impulse_irka.csv", "impulse_tlirka.csv", "eigs_irka.csv", "eigs_tlirka.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    for key in ["\"E_c\"", "\"E_b\"", "\"E_lambda\"", "\"wall_clock_seconds\"", "\"iterations\""] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn invalid_order_exits_one() {
    let out = tlmor(&["reduce", "--gen-heat", "20", "--order", "0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("order must be at least 1"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&tlmor(&["reduce", "--gen-heat", "20", "--bogus"])), 1);
    assert_eq!(code(&tlmor(&["frobnicate"])), 1);
    assert_eq!(code(&tlmor(&["reduce", "--a", "A.mtx"])), 1);
    assert_eq!(code(&tlmor(&["--help"])), 0);
}

#[test]
fn missing_source_and_files_are_errors() {
    let out = tlmor(&["reduce"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no system source"));
    let out = tlmor(&["reduce", "--a", "/nonexistent/A.mtx", "--b", "B", "--c", "C"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("/nonexistent/A.mtx"));
}

#[test]
fn non_convergence_exits_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["reduce", "--gen-heat", "40", "--order", "3", "--max-iter", "1", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let report = load_report(dir.path().join("report.json")).unwrap();
    assert!(report.methods.iter().all(|m| !m.converged));
}

#[test]
fn compare_heat_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["compare", "--gen-heat", "60", "--order", "3", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    for col in ["Method", "E_c", "E_b", "E_lambda", "max|eps|"] {
        assert!(header.contains(col));
    }
    let rows = parse_table(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].method, "IRKA");
    assert_eq!(rows[1].method, "TL-IRKA");
    let (irka, tl) = (&rows[0].values, &rows[1].values);
    assert!(tl[0].unwrap() < irka[0].unwrap());
    assert!(tl[1].unwrap() < irka[1].unwrap());
    assert!(tl[2].unwrap().is_finite());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn compare_full_order_metrics_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["compare", "--gen-heat", "4", "--order", "4", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for row in parse_table(&stdout(&out)) {
        for v in &row.values {
            assert!(v.unwrap().abs() <= 1e-8, "{} {:?}", row.method, row.values);
        }
    }
}

#[test]
fn compare_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 1..=5 {
        let seed = seed.to_string();
        let args = ["compare", "--gen-heat", "30", "--order", "2", "--seed", &seed, "--out", dir_arg(dir.path())];
        let first = tlmor(&args);
        let second = tlmor(&args);
        assert_eq!(code(&first), code(&second));
        assert_eq!(stdout(&first), stdout(&second), "seed {seed}");
    }
}

#[test]
fn compare_stdout_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["compare", "--gen-heat", "30", "--order", "2", "--seed", "3", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let golden = include_str!("golden/compare_heat30_r2_seed3.txt");
    let (got, want) = (parse_table(&stdout(&out)), parse_table(golden));
    assert_eq!(stdout(&out).lines().next(), golden.lines().next());
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.method, w.method);
        for (a, b) in g.values.iter().zip(&w.values) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"source": {"kind": "heat", "n": 25, "diffusivity": 0.01}, "order": 2, "seed": 4}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = tlmor(&["reduce", "--config", dir_arg(&cfg), "--order", "3", "--out", dir_arg(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = load_report(out_dir.join("report.json")).unwrap();
    assert_eq!(report.config.order, 3);
    assert_eq!(report.config.seed, 4);
    assert_eq!(report.system.n, 25);
    assert_eq!(report.methods[0].eigenvalues.len(), 3);

    std::fs::write(&cfg, r#"{"order": 2, "colour": "blue"}"#).unwrap();
    assert_eq!(code(&tlmor(&["reduce", "--config", dir_arg(&cfg), "--gen-heat", "10"])), 1);
}

#[test]
fn verify_heat_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["verify", "--gen-heat", "50", "--order", "3", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().count() >= 8);
    assert!(!text.contains("FAIL"));
    assert!(text.contains("PASS trace identity P/Q"));
}

#[test]
fn verify_detects_corrupted_gramian() {
    let out = tlmor(&["verify", "--gen-heat", "50", "--order", "3", "--corrupt-gramian"]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("FAIL trace identity P/Q"));
}

#[test]
fn verify_rejects_zero_horizon() {
    let out = tlmor(&["verify", "--gen-heat", "50", "--order", "3", "--horizon", "0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("horizon must be positive"));
}

#[test]
fn impulse_files_share_time_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["impulse", "--gen-heat", "40", "--order", "3", "--plot-grid", "120", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (hf, full) = read_csv(&dir.path().join("impulse_full.csv"));
    let (ht, tl) = (read_csv(&dir.path().join("impulse_tlirka.csv")).0, read_csv(&dir.path().join("impulse_tlirka.csv")).1);
    assert_eq!(hf, "t,h_1_1");
    assert!(ht.starts_with("t,eps_abs"));
    assert_eq!(full.len(), 120);
    assert_eq!(tl.len(), 120);
    for (a, b) in full.iter().zip(&tl) {
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }
}

#[test]
fn impulse_full_order_error_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlmor(&["impulse", "--gen-heat", "4", "--order", "4", "--out", dir_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let peak = read_csv(&dir.path().join("impulse_full.csv")).1.iter().map(|r| r[1].abs()).fold(0.0, f64::max);
    for row in read_csv(&dir.path().join("impulse_tlirka.csv")).1 {
        assert!(row[1] <= 1e-10 * peak, "{row:?}");
    }
}

#[test]
fn gramians_scalar_demo() {
    let dir = tempfile::tempdir().unwrap();
    let one = |v: f64, name: &str| {
        let p = dir.path().join(name);
        write_matrix_market(&p, &Mat::from_element(1, 1, v)).unwrap();
        p
    };
    let (a, b, c) = (one(-1.0, "A.mtx"), one(1.0, "B.mtx"), one(1.0, "C.mtx"));
    let horizon = 2f64.ln().to_string();
    let out_dir = dir.path().join("g");
    let out = tlmor(&[
        "gramians", "--a", dir_arg(&a), "--b", dir_arg(&b), "--c", dir_arg(&c), "--order", "1", "--horizon", &horizon,
        "--out", dir_arg(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let p = read_matrix_market(out_dir.join("P_T.mtx")).unwrap();
    assert!((p[(0, 0)] - 0.375).abs() <= 1e-14);
    for name in ["P2_T", "Phat_T", "Q_T", "Q2_T", "Qhat_T"] {
        let m = read_matrix_market(out_dir.join(format!("{name}.mtx"))).unwrap();
        // Cross Gramians carry the sign of the orthonormal basis.
        assert!((m[(0, 0)].abs() - 0.375).abs() <= 1e-12, "{name}: {m}");
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ddeq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddeq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV file written by the CLI, after the hash comment and
/// the header.
fn rows(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let hash = lines.next().unwrap().strip_prefix("# config_hash: ").unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (hash, header, body)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_profile_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["solve", "--format", "spa", "--alpha", "1", "--lambda", "0.5"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (hash, header, body) = rows(&dir.path().join("profile.csv"));
    assert_eq!(header, ["theta", "br", "bm"]);
    assert_eq!(body.len(), 501);
    assert_eq!(hash.len(), 64);
    let report = json(&dir.path().join("profile.json"));
    assert_eq!(report["config_hash"], hash.as_str());
    assert_eq!(report["convergence"]["converged"], true);
    assert!(report["metrics"]["efficiency"].as_f64().unwrap() < 1.0);
    let (_, header, _) = rows(&dir.path().join("beliefs.csv"));
    assert_eq!(header, ["b", "H1", "H0", "H1'", "H0'"]);
}

#[test]
fn invalid_alpha_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["solve", "--alpha", "-1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn mixed_first_price_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["solve", "--format", "fpa", "--lambda", "0.3"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unsupported"), "{}", stderr(&o));
}

#[test]
fn pure_first_price_solves() {
    let dir = tempfile::tempdir().unwrap();
    for l in ["0", "1"] {
        let o = ddeq(&["solve", "--format", "fpa", "--alpha", "5", "--lambda", l], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
}

#[test]
fn non_convergence_exits_2_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["solve", "--max-iter", "1"], dir.path());
    assert_eq!(code(&o), 2);
    let report = json(&dir.path().join("profile.json"));
    assert_eq!(report["convergence"]["converged"], false);
    assert!(dir.path().join("profile.csv").exists());
}

#[test]
fn empty_lambda_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["sweep", "--lambda", ""], dir.path());
    assert_eq!(code(&o), 1);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"command": "sweep", "lambda": []}"#).unwrap();
    let o = ddeq(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));
}

#[test]
fn single_cell_sweep_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--alpha", "10", "--lambda", "0.5"];
    let solve: Vec<&str> = ["solve"].iter().chain(&args).copied().collect();
    let sweep: Vec<&str> = ["sweep"].iter().chain(&args).copied().collect();
    assert_eq!(code(&ddeq(&solve, dir.path())), 0);
    assert_eq!(code(&ddeq(&sweep, dir.path())), 0);
    let m = &json(&dir.path().join("profile.json"))["metrics"];
    let (_, header, body) = rows(&dir.path().join("sweep.csv"));
    assert_eq!(body.len(), 1);
    let col = |name: &str| -> f64 {
        body[0][header.iter().position(|h| h == name).unwrap()].parse().unwrap()
    };
    for name in ["revenue", "efficiency", "first_best"] {
        let a = m[name].as_f64().unwrap();
        assert!((col(name) - a).abs() <= 1e-8 * a.abs(), "{name}");
    }
    assert_eq!(body[0][header.iter().position(|h| h == "converged").unwrap()], "true");
}

#[test]
fn efficiency_sweep_is_u_shaped_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let lambdas: Vec<String> = (0..=20).map(|i| format!("{}", i as f64 / 20.0)).collect();
    let lambdas = lambdas.join(",");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let base = ["sweep", "--alpha", "1,5,10,20", "--lambda", lambdas.as_str()];
    assert_eq!(code(&ddeq(&base, &a)), 0);
    let mut one = base.to_vec();
    one.extend(["--workers", "1"]);
    assert_eq!(code(&ddeq(&one, &b)), 0);
    let fa = fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(fa, fs::read(b.join("sweep.csv")).unwrap());

    let (_, header, body) = rows(&a.join("sweep.csv"));
    assert_eq!(body.len(), 84);
    let idx = |n: &str| header.iter().position(|h| h == n).unwrap();
    for alpha in ["1.00000000", "5.00000000", "10.0000000", "20.0000000"] {
        let eff: Vec<f64> = body
            .iter()
            .filter(|r| r[idx("alpha")] == alpha)
            .map(|r| r[idx("efficiency")].parse().unwrap())
            .collect();
        assert_eq!(eff.len(), 21);
        let argmin = (0..eff.len()).min_by(|&i, &j| eff[i].total_cmp(&eff[j])).unwrap();
        assert!(argmin > 0 && argmin < 20, "alpha={alpha}: {eff:?}");
        assert!((eff[0] - 1.0).abs() < 1e-4 && (eff[20] - 1.0).abs() < 1e-4);
    }
}

#[test]
fn simulate_passes_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(
        &["simulate", "--format", "spa", "--alpha", "1", "--lambda", "0.5", "--n", "1000000"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("consistency.json"));
    assert_eq!(report["consistency"]["pass"], true, "{report}");
    let (_, header, body) = rows(&dir.path().join("dataset.csv"));
    assert_eq!(header, ["b1", "v1", "b2", "v2", "winner"]);
    assert_eq!(body.len(), 1_000_000);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--alpha", "3", "--lambda", "0.5", "--n", "20000", "--seed", "11"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&ddeq(&args, &a)), 0);
    assert_eq!(code(&ddeq(&args, &b)), 0);
    let (ra, rb) = (json(&a.join("consistency.json")), json(&b.join("consistency.json")));
    assert_eq!(ra["dataset_sha256"], rb["dataset_sha256"]);
    assert_eq!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
}

#[test]
fn zero_sample_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["simulate", "--n", "0"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("n:"), "{}", stderr(&o));
}

fn diagnostic(body: &[Vec<String>], who: &str, stat: &str) -> (f64, String) {
    let r = body.iter().find(|r| r[0] == who && r[1] == stat).expect("row present");
    (r[2].parse().unwrap(), r[3].clone())
}

#[test]
fn diagnose_binary_model() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ddeq(&["diagnose", "--alpha", "0,1,10"], dir.path())), 0);
    let (_, header, body) = rows(&dir.path().join("diagnostics.csv"));
    assert_eq!(header, ["alpha_or_model", "statistic", "value", "std_error"]);
    let (d0, _) = diagnostic(&body, "0", "max_deviation");
    let (d1, _) = diagnostic(&body, "1.00000000", "max_deviation");
    let (d10, _) = diagnostic(&body, "10.0000000", "max_deviation");
    assert!(d0 < 1e-8);
    assert!(d1 > 1e-3 && d10 > d1);
}

#[test]
fn diagnose_three_value_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddeq(&["diagnose", "--alpha", "1", "--k3", "--n", "200000", "--seed", "5"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, _, body) = rows(&dir.path().join("diagnostics.csv"));
    let (r, se) = diagnostic(&body, "k3-model", "moment_residual_b=0.5");
    let se: f64 = se.parse().unwrap();
    assert!(se > 0.0 && (r / se).abs() > 5.0);
    let (r, se) = diagnostic(&body, "k3-control-independent", "moment_residual_b=0.5");
    assert!((r / se.parse::<f64>().unwrap()).abs() < 4.0);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&ddeq(&["diagnose", "--alpha", "2,4", "--seed", "3"], &a)), 0);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"command": "diagnose", "alpha": [2, 4], "seed": 3}"#).unwrap();
    assert_eq!(code(&ddeq(&["--config", cfg.to_str().unwrap()], &b)), 0);
    assert_eq!(
        fs::read(a.join("diagnostics.csv")).unwrap(),
        fs::read(b.join("diagnostics.csv")).unwrap()
    );
}

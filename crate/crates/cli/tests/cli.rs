use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn klgame(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klgame"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn klgame")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_diagnostic(output: &Output) {
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error kind="), "{stderr}");
}

const SMALL_VERIFY: &[&str] = &[
    "--set", "verify.identity_instances=20",
    "--set", "verify.logit_pairs=500",
    "--set", "verify.stability_pairs=5",
    "--set", "verify.convergence_games=2",
    "--set", "verify.convergence_iterations=500",
    "--set", "verify.concentration_trials=40",
    "--set", "verify.oracle_games=5",
    "--set", "verify.sweeps=false",
];

#[test]
fn gen_with_zero_samples_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = klgame(&["gen", "--n", "0"], dir.path());
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("dataset.csv")).unwrap(), "x,a1,a2,p\n");
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    let out_dir = dir.path().join("out");
    for text in ["{\"eta\": ", "{\"eta\": -1}", "{\"unknown_field\": 3}", "[]"] {
        fs::write(&config, text).unwrap();
        for cmd in ["gen", "verify", "sweep-n"] {
            let out = klgame(&[cmd, "--config", config.to_str().unwrap()], &out_dir);
            assert_diagnostic(&out);
            assert!(!out_dir.exists(), "{cmd} wrote output for {text}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_diagnostic(&klgame(&["gen", "--bogus"], dir.path()));
    assert_diagnostic(&klgame(&["gen", "--set", "no_such_key=1"], dir.path()));
    assert_diagnostic(&klgame(&["gen", "--set", "eta=fast"], dir.path()));
    assert_diagnostic(&klgame(&["fit", "--data", "/nonexistent/data.csv"], dir.path()));
    assert_diagnostic(&klgame(&["report"], &dir.path().join("empty")));
}

#[test]
fn verify_writes_bounds_and_exit_code_tracks_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["verify"];
    args.extend_from_slice(SMALL_VERIFY);
    let out = klgame(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let bounds = read_json(&dir.path().join("bounds.json"));
    let reports = bounds.as_array().unwrap();
    assert!(reports.len() >= 10);
    for r in reports {
        assert_eq!(r["passed"], Value::Bool(true), "{r}");
        for key in ["name", "instances_checked", "max_violation", "tolerance"] {
            assert!(r.get(key).is_some(), "{key} missing in {r}");
        }
    }
}

#[test]
fn fit_from_file_matches_fit_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(klgame(&["gen", "--n", "300"], &a).status.success());
    assert!(klgame(&["fit", "--n", "300"], &a).status.success());
    let data = a.join("dataset.csv");
    assert!(klgame(&["fit", "--data", data.to_str().unwrap()], &b).status.success());
    assert_eq!(fs::read(a.join("fit.json")).unwrap(), fs::read(b.join("fit.json")).unwrap());
    assert_eq!(read_json(&a.join("fit.json"))["n"], 300);
}

#[test]
fn solve_and_selfplay_agree_on_the_fitted_game() {
    let dir = tempfile::tempdir().unwrap();
    assert!(klgame(&["solve"], dir.path()).status.success());
    assert!(klgame(&["selfplay", "--set", "iterations=20000"], dir.path()).status.success());
    let nash = read_json(&dir.path().join("nash.json"));
    let sp = read_json(&dir.path().join("policy.json"));
    assert!(nash["residual"].as_f64().unwrap() <= 1e-10);
    let a = nash["policy"]["p1"]["probs"].as_array().unwrap();
    let b = sp["policy"]["p1"]["probs"].as_array().unwrap();
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x.as_f64().unwrap() - y.as_f64().unwrap()).abs()).sum();
    assert!(l1 < 1e-3, "l1 = {l1}");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,alpha,V_t,residual"));
    assert_eq!(trace.lines().count(), 20_002);
}

#[test]
fn report_regenerates_sweep_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let grid = ["--set", "n_grid=[64,128,256,512]", "--set", "seeds=[0,1,2,3,4]"];
    let mut args = vec!["sweep-n"];
    args.extend_from_slice(&grid);
    assert!(klgame(&args, &a).status.success());
    let sweep = a.join("sweep.csv");
    assert!(klgame(&["report", "--data", sweep.to_str().unwrap()], &b).status.success());
    for name in ["plotdata_minimax.csv", "plotdata_baseline.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(&sweep).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4 * 5);
}

#[test]
fn master_seed_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(klgame(&["gen", "--n", "50"], &a).status.success());
    assert!(klgame(&["gen", "--n", "50", "--master-seed", "1"], &b).status.success());
    assert_ne!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
}

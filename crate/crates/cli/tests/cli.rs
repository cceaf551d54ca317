use std::path::Path;
use std::process::{Command, Output};

fn furn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_furn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run furn")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = furn(
        dir.path(),
        &["simulate", "--feedback", "k^2", "--feedback", "k^2", "--init", "1,1", "--steps", "1000", "--seed", "7"],
    );
    let summary = stdout_json(&o);
    assert_eq!(summary["steps"], 1000);
    let csv = std::fs::read_to_string(dir.path().join("simulate/trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,winner,x_1,x_2,chi_1,chi_2");
    assert_eq!(lines.len() - 1, 1000);
    assert!(dir.path().join("simulate/summary.json").exists());
}

#[test]
fn simulate_from_shares_and_market_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = furn(
        dir.path(),
        &["simulate", "--feedback", "sqrt(k)", "--agents", "3", "--shares", "0.1,0.1,0.8", "--N", "300", "--steps", "100", "--binary"],
    );
    let summary = stdout_json(&o);
    assert_eq!(summary["initial_counts"], serde_json::json!([30, 30, 240]));
    let total: u64 = summary["final_counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 400);
    let bytes = std::fs::read(dir.path().join("simulate/trajectory.purn")).unwrap();
    assert_eq!(&bytes[..4], b"PURN");
}

#[test]
fn invalid_expression_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = furn(dir.path(), &["simulate", "--feedback", "k^", "--init", "1,1", "--steps", "5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("SyntaxError at position"), "{err}");
    let o = furn(dir.path(), &["simulate", "--feedback", "k", "--init", "1,1,1", "--agents", "2", "--steps", "5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = furn(dir.path(), &["simulate", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_reports_total_monopoly_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = furn(
        dir.path(),
        &["analyze", "--feedback", "exp(k)", "--agents", "3", "--shares", "6/14,4/14,4/14", "--N", "14"],
    );
    let r = stdout_json(&o);
    let t = &r["bounds"]["tmon"][0];
    assert_eq!(t["counts"], serde_json::json!([6, 4, 4]));
    let round3 = |v: &serde_json::Value| (v.as_f64().unwrap() * 1000.0).round() / 1000.0;
    assert_eq!(round3(&t["lower"]), 0.652);
    assert_eq!(round3(&t["upper"]), 0.714);
    assert!(dir.path().join("analyze/report.json").exists());
}

#[test]
fn analyze_limit_shares_and_monopoly() {
    let dir = tempfile::tempdir().unwrap();
    let r = stdout_json(&furn(dir.path(), &["analyze", "--feedback", "k^0.5", "--feedback", "2*k^0.5"]));
    let v = r["limit_shares"]["verdict"]["Deterministic"].as_array().unwrap();
    assert!((v[0].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!((v[1].as_f64().unwrap() - 0.8).abs() < 1e-12);
    let r = stdout_json(&furn(dir.path(), &["analyze", "--feedback", "k*log(k+1)^2", "--agents", "2"]));
    assert_eq!(r["joint_verdict"], "StrongMonopoly");
}

#[test]
fn scaling_qvar_prints_limit() {
    let dir = tempfile::tempdir().unwrap();
    let r = stdout_json(&furn(
        dir.path(),
        &["scaling", "qvar", "--feedback", "sqrt(k)", "--agents", "3", "--shares", "0.8,0.1,0.1"],
    ));
    let q = r["qvar"][0].as_f64().unwrap();
    assert!((q - 0.2474).abs() <= 0.002, "{q}");
}

#[test]
fn scaling_ode_linear_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = furn(dir.path(), &["scaling", "ode", "--feedback", "k", "--agents", "2", "--shares", "0.3,0.7", "-T", "10"]);
    stdout_json(&o);
    let csv = std::fs::read_to_string(dir.path().join("scaling/ode.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,Z_1,Z_2,M_1,M_2,H_1,H_2,qvar_1,qvar_2");
    for l in lines {
        let z: Vec<f64> = l.split(',').skip(1).take(2).map(|v| v.parse().unwrap()).collect();
        assert!((z[0] - 0.3).abs() < 1e-12 && (z[1] - 0.7).abs() < 1e-12);
    }
}

#[test]
fn scaling_fclt_is_deterministic_given_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["scaling", "fclt", "--seed", "1", "--feedback", "k^2", "--agents", "3", "--shares", "0.4,0.3,0.3", "-T", "2"];
    stdout_json(&furn(a.path(), &args));
    stdout_json(&furn(b.path(), &args));
    let x = std::fs::read(a.path().join("scaling/fclt.csv")).unwrap();
    let y = std::fs::read(b.path().join("scaling/fclt.csv")).unwrap();
    assert_eq!(x, y);
    let c = tempfile::tempdir().unwrap();
    let mut other = args;
    other[3] = "2";
    stdout_json(&furn(c.path(), &other));
    assert_ne!(x, std::fs::read(c.path().join("scaling/fclt.csv")).unwrap());
}

#[test]
fn scaling_beta_and_fixed_points() {
    let dir = tempfile::tempdir().unwrap();
    let r = stdout_json(&furn(
        dir.path(),
        &["scaling", "beta", "--feedback", "k^2", "--agents", "3", "--shares", "0.5,0.3,0.2", "--N", "1000", "--beta", "0.8"],
    ));
    assert!((r["g"][0].as_f64().unwrap() - 0.15789).abs() < 1e-5);
    assert_eq!(r["regime"], "DeterministicCurve");
    assert!(dir.path().join("scaling/beta.csv").exists());
    let r = stdout_json(&furn(dir.path(), &["scaling", "fixed", "--feedback", "k^2", "--agents", "2"]));
    assert_eq!(r["points"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "feedback = [\"k\"]\nagents = 2\ninit = [2, 1]\nsteps = 50\nseed = 3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_furn"))
        .args(["simulate", "--steps", "20", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let r = stdout_json(&o);
    assert_eq!(r["steps"], 20);
    assert_eq!(r["seed"], 3);
    assert_eq!(r["initial_counts"], serde_json::json!([2, 1]));
    std::fs::write(&cfg, "nonsense = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_furn"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_persists_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = furn(dir.path(), &["experiment", "qvar_square_0.1908"]);
    assert!(o.status.success());
    let line = String::from_utf8_lossy(&o.stdout);
    assert!(line.starts_with("PASS"), "{line}");
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("qvar_square_0.1908/result.json")).unwrap()).unwrap();
    assert_eq!(r["verdict"], "Pass");
    assert!(dir.path().join("qvar_square_0.1908/data.csv").exists());
    let o = furn(dir.path(), &["experiment", "no_such_experiment"]);
    assert_eq!(o.status.code(), Some(2));
    let o = furn(dir.path(), &["experiment", "lln_convergence", "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_experiment_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // Ten replicas of a 2-agent sqrt urn cannot meet the 0.02 band after 10 steps.
    let o = furn(
        dir.path(),
        &["experiment", "sublinear_limit_sqrt", "--set", "steps=10", "--set", "replicas=10", "--set", "seed=1"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["simulate", "embed", "analyze", "scaling", "experiment"] {
        let o = Command::new(env!("CARGO_BIN_EXE_furn")).args([sub, "--help"]).output().unwrap();
        assert!(o.status.success(), "{sub}");
    }
}

#[test]
fn embed_writes_jump_times() {
    let dir = tempfile::tempdir().unwrap();
    let r = stdout_json(&furn(dir.path(), &["embed", "--feedback", "k", "--init", "1,1", "--steps", "200", "--seed", "4"]));
    assert_eq!(r["steps"], 200);
    let csv = std::fs::read_to_string(dir.path().join("embed/jump_chain.csv")).unwrap();
    assert!(csv.starts_with("n,t_n,winner,"));
    assert_eq!(csv.lines().count(), 201);
}

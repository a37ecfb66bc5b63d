//! End-to-end runs of the `nheavy` binary.

use std::path::Path;
use std::process::{Command, Output, Stdio};

use nheavy::estimation::{fit_one_step, FitConfig, FitResult};
use nheavy::model::PanelSeries;
use nheavy::network::{normalize, read_edge_csv};

fn nheavy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nheavy")).current_dir(dir).args(args).env_remove("NHEAVY_SEED").output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const SIM: &str = r#"{
  "params": {"phi": {"omega": 0.1, "alpha": 0.3, "lambda": 0.2, "beta": 0.4},
             "phi_r": {"omega": 0.1, "alpha": 0.3, "lambda": 0.2, "beta": 0.3}},
  "t_len": 600,
  "network": {"source": "file", "path": "net.csv", "n": 25},
  "dgp": {"kind": "direct"},
  "seed": 3,
  "outputs": {"panel": "panel.csv", "latent": "latent.csv"}
}"#;

fn setup(dir: &Path) {
    ok(&nheavy(dir, &["gen-network", "--kind", "dyad", "--n", "25", "--seed", "7", "--out", "net.csv"]));
    std::fs::write(dir.join("sim.json"), SIM).unwrap();
    ok(&nheavy(dir, &["simulate", "--config", "sim.json"]));
}

#[test]
fn gen_network_format_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = nheavy(d, &["gen-network", "--kind", "dyad", "--n", "25", "--seed", "7", "--out", "a.csv"]);
    ok(&out);
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("nd_analytic=") && report.contains("nd_empirical="));
    ok(&nheavy(d, &["gen-network", "--kind", "dyad", "--n", "25", "--seed", "7", "--out", "b.csv"]));
    let a = read(d, "a.csv");
    assert!(a.starts_with("src,dst\n"));
    assert_eq!(a, read(d, "b.csv"));
    let manifest: serde_json::Value = serde_json::from_str(&read(d, "a.csv.manifest.json")).unwrap();
    assert_eq!(manifest["seeds"]["seed"], 7);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |seed: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_nheavy"))
            .current_dir(d)
            .args(["gen-network", "--kind", "sbm", "--k", "3", "--n", "20", "--out", out])
            .env("NHEAVY_SEED", seed)
            .output()
            .unwrap()
    };
    ok(&run("11", "a.csv"));
    ok(&run("11", "b.csv"));
    ok(&nheavy(d, &["gen-network", "--kind", "sbm", "--k", "3", "--n", "20", "--seed", "11", "--out", "c.csv"]));
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert_eq!(read(d, "a.csv"), read(d, "c.csv"));
    assert_eq!(run("x", "e.csv").status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(nheavy(d, &["gen-network", "--kind", "sbm", "--k", "30", "--n", "25"]).status.code(), Some(3));
    assert_eq!(nheavy(d, &["gen-network", "--kind", "ring", "--n", "25"]).status.code(), Some(2));
    assert_eq!(nheavy(d, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(nheavy(d, &["estimate", "--panel", "missing.csv", "--network", "x.csv"]).status.code(), Some(3));
    std::fs::write(d.join("bad.json"), r#"{"t_len": 10, "dgp": {"kind": "direct"}, "extra": 1}"#).unwrap();
    let out = nheavy(d, &["simulate", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn nonstationary_parameters_are_refused_with_the_radius() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&nheavy(d, &["gen-network", "--kind", "dyad", "--n", "25", "--seed", "7", "--out", "net.csv"]));
    std::fs::write(d.join("sim.json"), SIM.replace(r#""beta": 0.3"#, r#""beta": 0.6"#)).unwrap();
    let out = nheavy(d, &["simulate", "--config", "sim.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectral radius"));
    assert!(!d.join("panel.csv").exists());
}

#[test]
fn simulate_records_theta_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let first = read(d, "panel.csv");
    assert!(first.starts_with("day,asset,r2,rm\n"));
    assert!(read(d, "latent.csv").starts_with("day,asset,h,mu\n"));
    let m: serde_json::Value = serde_json::from_str(&read(d, "panel.csv.manifest.json")).unwrap();
    assert_eq!(m["seeds"]["theta0"]["phi"]["alpha"], 0.3);
    assert_eq!(m["seeds"]["theta0"]["phi_r"]["beta"], 0.3);
    assert_eq!(m["config"]["seed"], 3);
    ok(&nheavy(d, &["simulate", "--config", "sim.json"]));
    assert_eq!(first, read(d, "panel.csv"));
    ok(&nheavy(d, &["simulate", "--config", "sim.json", "--seed", "4", "--out", "other.csv"]));
    assert_ne!(first, read(d, "other.csv"));
}

#[test]
fn estimate_matches_library_and_recovers_theta() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let out = nheavy(d, &["estimate", "--panel", "panel.csv", "--network", "net.csv", "--out", "fit.json"]);
    ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("omega_r") && table.contains("converged: true"));
    let fit: FitResult = serde_json::from_str(&read(d, "fit.json")).unwrap();
    let panel = PanelSeries::read_csv(std::fs::File::open(d.join("panel.csv")).unwrap(), "panel.csv").unwrap();
    let a = read_edge_csv(std::fs::File::open(d.join("net.csv")).unwrap(), Some(25), "net.csv").unwrap();
    let lib = fit_one_step(&panel, &normalize(&a), None, &FitConfig::default()).unwrap();
    assert_eq!(fit.theta_hat, lib.theta_hat);
    let truth = [0.1, 0.3, 0.2, 0.4, 0.1, 0.3, 0.2, 0.3];
    for ((e, t), se) in fit.estimates().iter().zip(truth).zip(&fit.std_errors) {
        assert!((e - t).abs() < 4.0 * se, "{e} vs {t}");
    }
    ok(&nheavy(
        d,
        &["estimate", "--panel", "panel.csv", "--network", "net.csv", "--method", "two-step", "--out", "fit2.json"],
    ));
    let two: serde_json::Value = serde_json::from_str(&read(d, "fit2.json")).unwrap();
    assert_eq!(two["se_label"], "moment-plug-in, not HAC-corrected");
}

#[test]
fn strict_mode_turns_nonconvergence_into_an_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    std::fs::write(d.join("est.json"), r#"{"fit": {"optimizer": {"max_iter": 1, "nelder_mead_fallback": false}}}"#)
        .unwrap();
    let args = ["estimate", "--panel", "panel.csv", "--network", "net.csv", "--config", "est.json", "--out", "f.json"];
    let lenient = nheavy(d, &args);
    ok(&lenient);
    let fit: serde_json::Value = serde_json::from_str(&read(d, "f.json")).unwrap();
    assert_eq!(fit["converged"], false);
    let mut strict = vec!["--strict"];
    strict.extend(args);
    assert_eq!(nheavy(d, &strict).status.code(), Some(4));
}

#[test]
fn forecast_rows_and_one_step_identity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    ok(&nheavy(d, &["estimate", "--panel", "panel.csv", "--network", "net.csv", "--out", "fit.json"]));
    ok(&nheavy(
        d,
        &[
            "forecast",
            "--fit",
            "fit.json",
            "--network",
            "net.csv",
            "--panel",
            "panel.csv",
            "--horizon",
            "3",
            "--out",
            "fc.csv",
        ],
    ));
    let text = read(d, "fc.csv");
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "s,asset,h_forecast,mu_forecast");
    assert_eq!(rows.len(), 1 + 3 * 25);

    // Same forecast from an explicit state file: s = 1 is one recursion step.
    let state = "asset,h,mu,rm\n".to_string()
        + &(0..25).map(|i| format!("{i},1.0,0.5,{}\n", 0.2 + 0.01 * i as f64)).collect::<String>();
    std::fs::write(d.join("state.csv"), state).unwrap();
    ok(&nheavy(
        d,
        &[
            "forecast",
            "--fit",
            "fit.json",
            "--network",
            "net.csv",
            "--state",
            "state.csv",
            "--horizon",
            "2",
            "--out",
            "fs.csv",
        ],
    ));
    let fit: FitResult = serde_json::from_str(&read(d, "fit.json")).unwrap();
    let a = read_edge_csv(std::fs::File::open(d.join("net.csv")).unwrap(), Some(25), "net.csv").unwrap();
    let w = normalize(&a);
    let rm: Vec<f64> = (0..25).map(|i| 0.2 + 0.01 * i as f64).collect();
    let wrm = w.apply(&rm);
    let (p, r) = (fit.theta_hat.phi, fit.theta_hat.phi_r);
    let out = read(d, "fs.csv");
    for line in out.lines().skip(1).filter(|l| l.starts_with("1,")) {
        let f: Vec<&str> = line.split(',').collect();
        let i: usize = f[1].parse().unwrap();
        let h: f64 = f[2].parse().unwrap();
        let mu: f64 = f[3].parse().unwrap();
        approx::assert_relative_eq!(
            h,
            p.omega + p.alpha * rm[i] + p.lambda * wrm[i] + p.beta * 1.0,
            max_relative = 1e-14
        );
        approx::assert_relative_eq!(
            mu,
            r.omega + r.alpha * rm[i] + r.lambda * wrm[i] + r.beta * 0.5,
            max_relative = 1e-14
        );
    }
    // Missing state rows are invalid input.
    std::fs::write(d.join("short.csv"), "asset,h,mu,rm\n0,1,1,1\n2,1,1,1\n").unwrap();
    let bad =
        nheavy(d, &["forecast", "--fit", "fit.json", "--network", "net.csv", "--state", "short.csv", "--horizon", "2"]);
    assert_eq!(bad.status.code(), Some(3));
    let none = nheavy(d, &["forecast", "--fit", "fit.json", "--network", "net.csv", "--horizon", "2"]);
    assert_eq!(none.status.code(), Some(3));
}

#[test]
fn backtest_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let args = [
        "backtest",
        "--panel",
        "panel.csv",
        "--network",
        "net.csv",
        "--window",
        "560",
        "--horizon",
        "2",
        "--model",
        "perfect-foresight",
        "--model",
        "nheavy-one-step",
        "--protocol",
        "fixed",
        "--out",
        "bt.csv",
        "--per-origin",
        "po.csv",
        "--json",
        "bt.json",
    ];
    ok(&nheavy(d, &args));
    let text = read(d, "bt.csv");
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][5], "mean_qlike");
    assert_eq!(rows[1][0], "perfect_foresight");
    assert_eq!(rows[1][4], "39"); // 600 - 560 - 2 + 1
    assert_eq!(rows[1][5].parse::<f64>().unwrap(), 0.0);
    assert_eq!(read(d, "po.csv").lines().count(), 1 + 2 * 39);
    let first = read(d, "bt.csv");
    ok(&nheavy(d, &args));
    assert_eq!(first, read(d, "bt.csv"));
}

#[test]
fn rmse_table_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("design.json"),
        r#"{"generator": {"kind": "dyad"}, "n": 25, "t_len": 150, "q_reps": 4, "method": "two_step",
            "theta0": {"phi": {"omega": 0.1, "alpha": 0.3, "lambda": 0.2, "beta": 0.4},
                       "phi_r": {"omega": 0.1, "alpha": 0.3, "lambda": 0.2, "beta": 0.3}},
            "dgp": {"kind": "direct"}}"#,
    )
    .unwrap();
    ok(&nheavy(d, &["--jobs", "1", "rmse-table", "--config", "design.json", "--seed", "2", "--out", "a.csv"]));
    ok(&nheavy(
        d,
        &["--jobs", "3", "rmse-table", "--config", "design.json", "--seed", "2", "--out", "b.csv", "--json", "b.json"],
    ));
    let a = read(d, "a.csv");
    assert_eq!(a, read(d, "b.csv"));
    assert!(a.starts_with(
        "method,n,t_len,q_used,failures,nonconverged,nd_mean,nd_analytic,parameter,theta0,mean,rmse,mc_se\n"
    ));
    assert_eq!(a.lines().count(), 1 + 6);
}

#[test]
fn diffusion_simulation_writes_intraday_prices() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("diff.json"),
        r#"{"t_len": 4, "dgp": {"kind": "diffusion", "tau": [0.5, 0.2], "m_ticks": 39}, "seed": 1,
            "outputs": {"panel": "dp.csv", "intraday": "ip.csv"}}"#,
    )
    .unwrap();
    ok(&nheavy(d, &["simulate", "--config", "diff.json"]));
    assert_eq!(read(d, "ip.csv").lines().count(), 1 + 4 * 39 * 2);
    assert_eq!(read(d, "dp.csv").lines().count(), 1 + 4 * 2);
}

#[test]
fn closed_stdout_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_nheavy"))
        .current_dir(dir.path())
        .args(["gen-network", "--kind", "dyad", "--n", "2000", "--seed", "1"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // Far more than a pipe buffer is written after the reader goes away.
    drop(child.stdout.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

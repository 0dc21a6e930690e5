//! End-to-end tests of the compiled binary: artifact shapes, byte-level
//! determinism, exit codes with machine-readable error reports, and schema
//! conformance of every JSON output.

mod common;

use common::{assert_valid, load_schema, read_json};
use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dde-lab"))
        .args(args)
        .output()
        .expect("dde-lab binary should spawn")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "dde-lab {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Exit code plus the parsed JSON error report from stderr.
fn run_err(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let code = out.status.code().expect("process exits normally");
    assert_ne!(code, 0, "dde-lab {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let report: Value = serde_json::from_str(stderr.trim())
        .unwrap_or_else(|e| panic!("stderr of {args:?} is not JSON ({e}): {stderr}"));
    (code, report)
}

fn read_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .map(str::to_owned)
        .collect()
}

fn field(row: &str, idx: usize) -> f64 {
    row.split(',')
        .nth(idx)
        .unwrap_or_else(|| panic!("row '{row}' has no field {idx}"))
        .parse()
        .unwrap_or_else(|e| panic!("field {idx} of '{row}' is not a number: {e}"))
}

#[test]
fn chart_emits_grid_rows_with_sidecar() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("chart.csv");
    run_ok(&["chart", "--mu-grid", "0:0.99:100", "-o", csv.to_str().unwrap()]);

    let lines = read_lines(&csv);
    assert_eq!(lines.len(), 102, "header plus 101 grid rows");
    assert_eq!(lines[0], "mu,nu1,nu2,nu3");
    assert_eq!(
        lines[1],
        "0.00000000000000e0,0.00000000000000e0,0.00000000000000e0,0.00000000000000e0",
        "all three curves vanish at mu = 0"
    );
    // nu2(0.5) = 0.2 lands on a grid node (mu step 0.0099 -> index 51 is
    // 0.5049; use the exact half point from the parsed values instead).
    let mid: Vec<&String> = lines
        .iter()
        .skip(1)
        .filter(|row| (field(row, 0) - 0.495).abs() < 1e-12)
        .collect();
    assert_eq!(mid.len(), 1, "mu = 0.495 is on the grid");

    let sidecar = read_json(&dir.path().join("chart.csv.config.json"));
    assert_valid(&load_schema("run_config"), &sidecar, "chart sidecar");
    assert_eq!(sidecar["subcommand"], "chart");
    assert_eq!(sidecar["precision"], 15);
}

#[test]
fn chart_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("chart.csv");
    let args = ["chart", "--mu-grid", "0:0.9:30", "-o"];
    run_ok(&[&args[..], &[csv.to_str().unwrap()]].concat());
    let first = fs::read(&csv).unwrap();
    let first_sidecar = fs::read(dir.path().join("chart.csv.config.json")).unwrap();
    run_ok(&[&args[..], &[csv.to_str().unwrap()]].concat());
    assert_eq!(first, fs::read(&csv).unwrap(), "rerun must not change a byte");
    assert_eq!(
        first_sidecar,
        fs::read(dir.path().join("chart.csv.config.json")).unwrap(),
        "sidecar is deterministic too"
    );
}

#[test]
fn spectrum_lists_conjugate_pairs_with_dominant_root() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("spec.json");
    run_ok(&[
        "spectrum", "--h", "10", "--zeta", "1", "--kmax", "2", "-o",
        path.to_str().unwrap(),
    ]);
    let spec = read_json(&path);
    assert_valid(&load_schema("spectrum"), &spec, "spectrum report");

    let roots = spec["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 6, "three strips, each holding a conjugate pair");
    for root in roots {
        let re = root["re"].as_f64().unwrap();
        let im = root["im"].as_f64().unwrap();
        assert!(root["residual"].as_f64().unwrap() < 1e-9);
        let has_conjugate = roots.iter().any(|other| {
            (other["re"].as_f64().unwrap() - re).abs() < 1e-9
                && (other["im"].as_f64().unwrap() + im).abs() < 1e-9
        });
        assert!(has_conjugate, "root {re} + {im}i lacks its mirror image");
    }
    // Converged dominant rate at (h, zeta) = (10, 1); the crude cubic-decay
    // seed -pi^2/(2h^3) = -4.9e-3 refines to this value.
    let dom_re = spec["dominant"]["re"].as_f64().unwrap();
    let dom_im = spec["dominant"]["im"].as_f64().unwrap().abs();
    assert!(
        (dom_re - (-3.60264741413e-3)).abs() < 1e-9,
        "dominant rate drifted: {dom_re}"
    );
    assert!(
        (dom_im - 0.286189731621).abs() < 1e-9,
        "dominant frequency drifted: {dom_im}"
    );
}

#[test]
fn fundsol_tabulates_matching_exact_and_numeric_paths() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("v.csv");
    run_ok(&[
        "fundsol", "--h", "2.5", "--t-end", "10", "--grid", "100", "--method", "both",
        "-o", path.to_str().unwrap(),
    ]);
    let lines = read_lines(&path);
    assert_eq!(lines.len(), 102, "header plus 101 rows");
    assert_eq!(lines[0], "t,v_exact,v_numeric");
    for row in &lines[1..] {
        let (ve, vn) = (field(row, 1), field(row, 2));
        assert!(
            (ve - vn).abs() < 1e-8,
            "exact and numeric paths disagree on '{row}'"
        );
    }
    // The delayed term is dormant on [0, h], so v(h) = e^{-h}; one interval
    // later v(2h) = e^{-h}(e^{-h} - zeta h) by direct integration.
    let knot = &lines[26];
    assert!((field(knot, 0) - 2.5).abs() < 1e-12);
    assert!(
        (field(knot, 1) - (-2.5f64).exp()).abs() < 1e-12,
        "v at t = h should be e^-h: '{knot}'"
    );
    let second = &lines[51];
    assert!((field(second, 0) - 5.0).abs() < 1e-12);
    let expected = (-2.5f64).exp() * ((-2.5f64).exp() - 2.5);
    assert!(
        (field(second, 1) - expected).abs() < 1e-12,
        "v at t = 2h should be {expected}: '{second}'"
    );
}

#[test]
fn envelope_attractor_and_hypotheses_reports_validate() {
    let dir = TempDir::new().unwrap();

    let env_path = dir.path().join("env.json");
    run_ok(&["envelope", "--h", "5", "-o", env_path.to_str().unwrap()]);
    let env = read_json(&env_path);
    assert_valid(&load_schema("envelope_report"), &env, "envelope report");
    let rate = env["rate"].as_f64().unwrap();
    assert!(
        (rate - std::f64::consts::PI.powi(2) / (3.0 * 125.0)).abs() < 1e-15,
        "rate must equal pi^2/(alpha h^3), got {rate}"
    );
    let c_hat = env["c_hat"].as_f64().unwrap();
    assert!(
        (0.38..0.42).contains(&c_hat),
        "envelope constant at h = 5 drifted: {c_hat}"
    );

    let att_path = dir.path().join("att.json");
    run_ok(&["attractor", "--zeta", "3", "-o", att_path.to_str().unwrap()]);
    let att = read_json(&att_path);
    assert_valid(&load_schema("attractor_interval"), &att, "attractor interval");
    let b = att["b"].as_f64().unwrap();
    assert!(
        (b - 2.9847045853578868).abs() < 1e-9,
        "cycle amplitude at zeta = 3 drifted: {b}"
    );
    assert!((att["a"].as_f64().unwrap() + b).abs() < 1e-9, "interval is symmetric");

    let deg_path = dir.path().join("att_sub.json");
    run_ok(&["attractor", "--zeta", "0.8", "-o", deg_path.to_str().unwrap()]);
    let deg = read_json(&deg_path);
    assert_eq!(deg["a"].as_f64().unwrap(), 0.0, "subcritical interval degenerates");
    assert_eq!(deg["b"].as_f64().unwrap(), 0.0);

    let hyp_path = dir.path().join("hyp.json");
    run_ok(&["hypotheses", "-o", hyp_path.to_str().unwrap()]);
    let hyp = read_json(&hyp_path);
    assert_valid(&load_schema("hypothesis_report"), &hyp, "hypothesis report");
    assert_eq!(hyp["h1_ok"], true);
    assert_eq!(hyp["h2_ok"], true);
    assert_eq!(hyp["h3_ok"], true);
    assert_eq!(hyp["witnesses"].as_array().unwrap().len(), 0);
}

#[test]
fn probe_report_is_deterministic_and_valid() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("probe.json");
    let args = [
        "probe", "--zeta", "1.02", "--h", "3", "--seed", "7", "-o",
        path.to_str().unwrap(),
    ];
    run_ok(&args);
    let report = read_json(&path);
    assert_valid(&load_schema("probe_report"), &report, "probe report");
    assert_eq!(report["verdict"], "AllConverged");
    assert_eq!(report["ensemble_size"], 16);
    assert_eq!(report["n_converged"], 16);
    let mu = report["mu"].as_f64().unwrap();
    assert!((mu - 1.0 / 1.02).abs() < 1e-12, "mu = 1/zeta, got {mu}");

    let first = fs::read(&path).unwrap();
    run_ok(&args);
    assert_eq!(first, fs::read(&path).unwrap(), "probe rerun must be byte-identical");
}

#[test]
fn simulate_starts_from_history_value() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("sim.csv");
    run_ok(&[
        "simulate", "--zeta", "1.02", "--h", "3", "--history", "sin:5:1",
        "--t-end", "50", "--grid", "100", "-o", path.to_str().unwrap(),
    ]);
    let lines = read_lines(&path);
    assert_eq!(lines.len(), 102);
    assert_eq!(lines[0], "t,x");
    assert_eq!(
        lines[1], "0.00000000000000e0,5.00000000000000e0",
        "sinusoid history peaks at s = 0"
    );
    let final_x = field(&lines[101], 1);
    assert!(
        final_x.abs() < 5.0,
        "stable point should contract the sinusoid, got {final_x}"
    );

    let ramp_path = dir.path().join("ramp.csv");
    run_ok(&[
        "simulate", "--zeta", "1.02", "--h", "3", "--history", "ramp:-1:1",
        "--t-end", "10", "--grid", "10", "-o", ramp_path.to_str().unwrap(),
    ]);
    let ramp_lines = read_lines(&ramp_path);
    assert!((field(&ramp_lines[1], 1) - 1.0).abs() < 1e-12, "ramp ends at 1 at t = 0");
}

fn write_sweep_config(path: &Path, body: &str) {
    fs::write(path, body).unwrap();
}

#[test]
fn sweep_writes_cells_and_summary_with_resume_support() {
    let dir = TempDir::new().unwrap();
    let cfg_path = dir.path().join("sweep.json");
    write_sweep_config(
        &cfg_path,
        r#"{
  "nonlinearity": "tanh",
  "zeta_grid": { "start": 1.05, "end": 1.15, "points": 3 },
  "h_grid": { "start": 0.5, "end": 1.5, "points": 3 },
  "ensemble": { "seed": 11 }
}"#,
    );
    let out1 = dir.path().join("run1");
    run_ok(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--out-dir", out1.to_str().unwrap(),
    ]);

    let summary = read_lines(&out1.join("summary.csv"));
    assert_eq!(summary[0], "zeta,h,mu,nu,label,verdict,flag");
    assert_eq!(summary.len(), 10, "header plus 9 cells");
    // Row-major order: zeta varies slowest.
    assert!((field(&summary[1], 0) - 1.05).abs() < 1e-12);
    assert!((field(&summary[1], 1) - 0.5).abs() < 1e-12);
    assert!((field(&summary[2], 1) - 1.0).abs() < 1e-12);
    for row in &summary[1..] {
        assert_eq!(row.split(',').count(), 7, "summary row '{row}'");
        assert!(row.ends_with(','), "no flag expected in '{row}'");
        assert!(
            row.contains("AllConverged"),
            "every cell here is deep in the stable region: '{row}'"
        );
    }

    let probe_schema = load_schema("probe_report");
    for index in 0..9 {
        let cell = read_json(&out1.join("cells").join(format!("cell_{index:04}.json")));
        assert_valid(&probe_schema, &cell, &format!("cell {index}"));
    }
    let run_cfg = read_json(&out1.join("config.json"));
    assert_valid(&load_schema("run_config"), &run_cfg, "sweep run config");
    assert!(
        !out1.join(".resume.json").exists(),
        "marker is removed after completion"
    );

    // Determinism: a second directory gets byte-identical cells and summary.
    let out2 = dir.path().join("run2");
    run_ok(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--out-dir", out2.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(out1.join("summary.csv")).unwrap(),
        fs::read(out2.join("summary.csv")).unwrap(),
        "summaries must match byte for byte"
    );
    assert_eq!(
        fs::read(out1.join("cells/cell_0004.json")).unwrap(),
        fs::read(out2.join("cells/cell_0004.json")).unwrap(),
        "cell reports must match byte for byte"
    );

    // Resume: a marker with the matching digest skips completed cells and
    // still produces the identical summary.
    let digest = run_cfg["parameters"]["digest"].as_str().unwrap();
    let before = fs::read(out1.join("summary.csv")).unwrap();
    fs::write(
        out1.join(".resume.json"),
        format!("{{\"digest\": \"{digest}\", \"completed\": 5}}"),
    )
    .unwrap();
    run_ok(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--out-dir", out1.to_str().unwrap(),
    ]);
    assert_eq!(
        before,
        fs::read(out1.join("summary.csv")).unwrap(),
        "resumed run reproduces the summary"
    );
    assert!(!out1.join(".resume.json").exists());

    // A marker from a different configuration is refused without --force.
    fs::write(
        out1.join(".resume.json"),
        "{\"digest\": \"0000000000000000\", \"completed\": 1}",
    )
    .unwrap();
    let (code, report) = run_err(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--out-dir", out1.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "mismatched digest is a configuration error");
    assert_eq!(report["error"], "config");
    run_ok(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--out-dir", out1.to_str().unwrap(), "--force",
    ]);
    assert_eq!(
        before,
        fs::read(out1.join("summary.csv")).unwrap(),
        "--force rebuilds the same summary"
    );
}

#[test]
fn sweep_verdict_flips_across_the_local_boundary() {
    // At zeta = 2 the local stability boundary sits at h = 1.2092: delays
    // below it converge, delays above it sustain oscillation.
    let dir = TempDir::new().unwrap();
    let cfg_path = dir.path().join("sweep.json");
    write_sweep_config(
        &cfg_path,
        r#"{
  "nonlinearity": "tanh",
  "zeta_grid": { "start": 2, "end": 2, "points": 1 },
  "h_grid": { "start": 0.9, "end": 1.5, "points": 7 },
  "ensemble": { "seed": 5 }
}"#,
    );
    let out = dir.path().join("run");
    run_ok(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--out-dir", out.to_str().unwrap(),
    ]);
    let summary = read_lines(&out.join("summary.csv"));
    assert_eq!(summary.len(), 8);
    let verdicts: Vec<&str> = summary[1..]
        .iter()
        .map(|row| row.split(',').nth(5).unwrap())
        .collect();
    assert_eq!(
        &verdicts[..4],
        &["AllConverged"; 4],
        "h = 0.9..1.2 lie below the boundary"
    );
    assert_eq!(
        &verdicts[4..],
        &["SomeDiverged"; 3],
        "h = 1.3..1.5 lie above the boundary"
    );
    for row in &summary[1..] {
        assert!(!row.contains("FATAL"), "no proved region is contradicted: '{row}'");
    }
}

#[test]
fn invalid_requests_exit_with_json_reports() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let out_s = out.to_str().unwrap();

    let (code, report) = run_err(&["chart", "--mu-grid", "0:1.5:10", "-o", out_s]);
    assert_eq!(code, 3, "mu beyond 1 is a domain error");
    assert_eq!(report["error"], "domain");
    assert!(report["message"].as_str().unwrap().len() > 4);

    let (code, report) = run_err(&["spectrum", "--h", "0.5", "--zeta", "1", "-o", out_s]);
    assert_eq!(code, 3, "strip-confined search needs h >= 1");
    assert_eq!(report["error"], "domain");

    let (code, report) = run_err(&["attractor", "--zeta", "-1", "-o", out_s]);
    assert_eq!(code, 2, "negative gain is rejected before any numerics");
    assert_eq!(report["error"], "config");

    let (code, _) = run_err(&["simulate", "--zeta", "1", "--h", "1", "--history",
        "wavelet:1", "--t-end", "5", "-o", out_s]);
    assert_eq!(code, 2);

    let (code, _) = run_err(&["probe", "--zeta", "1", "--h", "1", "--tol", "0.5",
        "-o", out_s]);
    assert_eq!(code, 2, "tolerance above 0.1 is rejected");

    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"nonlinearity": "tanh",
            "zeta_grid": {"start": 1, "end": 2, "points": 0},
            "h_grid": {"start": 1, "end": 2, "points": 2},
            "ensemble": {"seed": 0}}"#,
    )
    .unwrap();
    let (code, report) = run_err(&["sweep", "--config", cfg.to_str().unwrap(),
        "--out-dir", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(code, 2, "empty grid is a configuration error");
    assert_eq!(report["error"], "config");

    let sine_cfg = dir.path().join("sine.json");
    fs::write(
        &sine_cfg,
        r#"{"nonlinearity": "sine",
            "zeta_grid": {"start": 1, "end": 2, "points": 2},
            "h_grid": {"start": 1, "end": 2, "points": 2},
            "ensemble": {"seed": 0}}"#,
    )
    .unwrap();
    let (code, _) = run_err(&["sweep", "--config", sine_cfg.to_str().unwrap(),
        "--out-dir", dir.path().join("d2").to_str().unwrap()]);
    assert_eq!(code, 2, "unsupported nonlinearity is rejected");

    let (code, _) = run_err(&[]);
    assert_eq!(code, 2, "missing subcommand is a usage error");
}

#[test]
fn help_and_version_exit_cleanly() {
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dde-lab"));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}

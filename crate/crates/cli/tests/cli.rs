use std::path::Path;
use std::process::{Command, Output};

use rgam_core::fit::InferenceReport;
use rgam_core::io::{parse_covariates, parse_edges, parse_panel, Truth};

fn rgam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgam"))
        .args(args)
        .env_remove("RGAM_THREADS")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--setting", "III", "--n", "50", "--t", "10", "--seed", "7", "--out", path_str(dir)];
    args.extend_from_slice(extra);
    rgam(&args)
}

#[test]
fn simulate_writes_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), &["--trim-isolated"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth: Truth = serde_json::from_str(&read(&dir.path().join("truth.json"))).unwrap();
    let panel = parse_panel(&read(&dir.path().join("panel.csv"))).unwrap();
    assert_eq!(panel.n(), truth.n);
    assert_eq!(panel.t_len(), 10);
    // one row per node and time 0..=T plus the header
    assert_eq!(read(&dir.path().join("panel.csv")).lines().count(), truth.n * 11 + 1);
    let u = parse_covariates(&read(&dir.path().join("covariates.csv")), truth.n).unwrap();
    assert_eq!(u.p(), 1);
    assert!(!parse_edges(&read(&dir.path().join("edges.csv"))).unwrap().is_empty());
    assert!(read(&dir.path().join("scatter.svg")).starts_with("<svg"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), &["--trim-isolated"]).status.success());
    assert!(simulate(b.path(), &["--trim-isolated"]).status.success());
    for f in ["edges.csv", "covariates.csv", "panel.csv", "truth.json", "scatter.svg"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
}

#[test]
fn custom_graphon_is_validated_before_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, r#"{"breakpoints":[0.5],"values":[[0.5,0.1],[0.3,0.5]]}"#).unwrap();
    let out = rgam(&[
        "simulate", "--setting", "custom", "--graphon", path_str(&grid), "--baseline", "step",
        "--out", path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetric"));
}

#[test]
fn noiseless_fixture_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgam(&[
        "simulate", "--setting", "III", "--n", "60", "--t", "20", "--seed", "3", "--sigma", "0",
        "--burn-in", "0", "--trim-isolated", "--out", path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report.json");
    let out = rgam(&[
        "fit",
        "--panel", path_str(&dir.path().join("panel.csv")),
        "--edges", path_str(&dir.path().join("edges.csv")),
        "--covariates", path_str(&dir.path().join("covariates.csv")),
        "--out", path_str(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth: Truth = serde_json::from_str(&read(&dir.path().join("truth.json"))).unwrap();
    let r = InferenceReport::from_json(&read(&report)).unwrap();
    assert!((r.theta.alpha.est - truth.alpha).abs() < 1e-8);
    assert!((r.theta.beta.est - truth.beta).abs() < 1e-8);
}

#[test]
fn noisy_fit_report_round_trips_with_finite_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgam(&[
        "simulate", "--setting", "I", "--n", "120", "--t", "60", "--seed", "5", "--trim-isolated",
        "--out", path_str(dir.path()),
    ]);
    assert!(out.status.success());
    let report = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let fhat = dir.path().join("fhat.csv");
    let hist = dir.path().join("fhat.svg");
    let out = rgam(&[
        "fit",
        "--panel", path_str(&dir.path().join("panel.csv")),
        "--edges", path_str(&dir.path().join("edges.csv")),
        "--covariates", path_str(&dir.path().join("covariates.csv")),
        "--out", path_str(&report),
        "--csv", path_str(&csv),
        "--fhat", path_str(&fhat),
        "--hist", path_str(&hist),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&report);
    let r = InferenceReport::from_json(&text).unwrap();
    assert_eq!(r.to_json().unwrap(), text);
    let widths = [r.theta.alpha.ci, r.theta.beta.ci]
        .into_iter()
        .chain(r.gamma.iter().map(|g| g.ci))
        .chain(r.f.iter().map(|f| f.ci));
    for ci in widths {
        assert!(ci[1] - ci[0] > 0.0 && (ci[1] - ci[0]).is_finite());
    }
    assert!(r.diagnostics.as_ref().unwrap().connected);
    assert!(read(&csv).starts_with("parameter,index,est,se,ci_lo,ci_hi\n"));
    assert!(read(&fhat).starts_with("node,fhat\n"));
}

#[test]
fn node_mismatch_is_an_input_error_naming_the_node() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("edges.csv"), "src,dst\n0,1\n1,2\n2,0\n").unwrap();
    let mut panel = String::from("node,t,y\n");
    for i in 0..3 {
        for t in 0..5 {
            panel.push_str(&format!("{i},{t},{}\n", (i * 7 + t * 3) % 5));
        }
    }
    std::fs::write(d.join("panel.csv"), panel).unwrap();
    std::fs::write(d.join("cov.csv"), "node,u1\n0,0.5\n1,-0.2\n").unwrap();
    let out = rgam(&[
        "fit",
        "--panel", path_str(&d.join("panel.csv")),
        "--edges", path_str(&d.join("edges.csv")),
        "--covariates", path_str(&d.join("cov.csv")),
        "--out", path_str(&d.join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('2'));
}

#[test]
fn diagnose_triangle_and_malformed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("k3.csv");
    std::fs::write(&edges, "src,dst\n0,1\n1,2\n0,2\n").unwrap();
    let json = dir.path().join("d.json");
    let out = rgam(&["diagnose", "--edges", path_str(&edges), "--out", path_str(&json)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&read(&json)).unwrap();
    assert_eq!(v["connected"], true);
    assert_eq!(v["bipartite"], false);

    std::fs::write(&edges, "src,dst\n0,1\n1,x\n").unwrap();
    let out = rgam(&["diagnose", "--edges", path_str(&edges)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn isolated_nodes_need_the_trim_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("edges.csv"), "src,dst\n0,1\n1,2\n2,3\n3,0\n0,2\n").unwrap();
    let mut panel = String::from("node,t,y\n");
    let mut cov = String::from("node,u1\n");
    for i in 0..5 {
        cov.push_str(&format!("{i},{}\n", i as f64 * 0.3 - 0.5));
        for t in 0..8 {
            panel.push_str(&format!("{i},{t},{}\n", ((i * 13 + t * 7) % 11) as f64 / 3.0));
        }
    }
    std::fs::write(d.join("panel.csv"), panel).unwrap();
    std::fs::write(d.join("cov.csv"), cov).unwrap();
    let (panel, edges, cov, out) = (d.join("panel.csv"), d.join("edges.csv"), d.join("cov.csv"), d.join("r.json"));
    let base = [
        "fit",
        "--panel", path_str(&panel),
        "--edges", path_str(&edges),
        "--covariates", path_str(&cov),
        "--bandwidth", "1.0",
        "--out", path_str(&out),
    ];
    let out = rgam(&base);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trim-isolated"));
    let mut trimmed = base.to_vec();
    trimmed.push("--trim-isolated");
    let out = rgam(&trimmed);
    assert!(String::from_utf8_lossy(&out.stderr).contains("5 -> 4"));
}

#[test]
fn replicate_is_independent_of_thread_count() {
    let mut outputs = Vec::new();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4", "8"]) {
        let out = rgam(&[
            "replicate", "--setting", "III", "--n", "40", "--t", "12", "--reps", "12", "--seed", "9",
            "--burn-in", "50", "--threads", threads, "--out", path_str(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((read(&dir.path().join("table1.csv")), read(&dir.path().join("table2.csv"))));
        assert!(read(&dir.path().join("f_errors.svg")).starts_with("<svg"));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn replicate_reads_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# small run\nsetting = III\nn = 40\nt = 12\nreps = 3\nburn_in = 50\noutputs = res\n").unwrap();
    let out = rgam(&["replicate", "--config", path_str(&cfg), "--reps", "2", "--fix-network"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(&dir.path().join("res").join("table1.csv"));
    assert!(table.starts_with("parameter,mean_abs_error_x100,se_x1000,reps\n"));
    assert!(table.contains("alpha,") && table.lines().nth(1).unwrap().ends_with(",2"));
}

#[test]
fn bad_config_is_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgam(&["replicate", "--alpha", "0.7", "--beta", "0.5", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_writes_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgam(&[
        "simulate", "--setting", "III", "--n", "80", "--t", "20", "--seed", "4", "--trim-isolated",
        "--out", path_str(dir.path()),
    ]);
    assert!(out.status.success());
    let pred = dir.path().join("pred.csv");
    let out = rgam(&[
        "predict",
        "--panel", path_str(&dir.path().join("panel.csv")),
        "--edges", path_str(&dir.path().join("edges.csv")),
        "--covariates", path_str(&dir.path().join("covariates.csv")),
        "--last", "3",
        "--out", path_str(&pred),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&pred);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "target_t,method,mae");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("18,rgam,"));
    assert!(lines[4].starts_with("18,nar_ols,"));
}

#[test]
fn predict_rejects_targets_without_history() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &["--trim-isolated"]).status.success());
    let out = rgam(&[
        "predict",
        "--panel", path_str(&dir.path().join("panel.csv")),
        "--edges", path_str(&dir.path().join("edges.csv")),
        "--covariates", path_str(&dir.path().join("covariates.csv")),
        "--weeks", "2",
        "--method", "rgam",
        "--out", path_str(&dir.path().join("p.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

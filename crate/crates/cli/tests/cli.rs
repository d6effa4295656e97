use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptive-admm"))
        .args(args)
        .env_remove("ADAPTIVE_ADMM_OUT")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_trace_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = cli(&["run", "--nodes", "6", "--scheme", "ap", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("t,objective,max_primal,max_dual,eta_min,eta_max,eta_mean,converged")
    );
    let rows: Vec<&str> = lines.collect();
    let s = summary(&out);
    assert_eq!(rows.len() as u64, s["iterations"].as_u64().unwrap());
    assert!(rows.last().unwrap().ends_with(",1"));
    assert_eq!(s["scheme"], "ap");
    assert_eq!(s["reference"], "ground_truth");
    assert_eq!(s["per_node_angle_deg"].as_array().unwrap().len(), 6);
    assert!(s["max_angle_deg"].as_f64().unwrap() < 15.0);
}

#[test]
fn max_iterations_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = cli(&["run", "--nodes", "4", "--max-iterations", "3", "--out", out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(summary(tmp.path())["converged"], false);
}

#[test]
fn zero_nodes_is_rejected_with_field_name() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--nodes", "0", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("num_nodes must be ≥ 1"), "{}", stderr(&o));
    assert!(!tmp.path().join("trace.csv").exists());
}

#[test]
fn bad_config_values_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for (flag, value, field) in [
        ("--scheme", "fast", "scheme"),
        ("--topology", "torus", "topology"),
        ("--patience", "0", "patience"),
        ("--eta0", "-1", "eta0"),
    ] {
        let o = cli(&["run", flag, value, "--out", out]);
        assert_eq!(o.status.code(), Some(1), "{flag}");
        assert!(stderr(&o).contains(field), "{flag}: {}", stderr(&o));
    }
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "nodez = 3\n").unwrap();
    let o = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nodez"), "{}", stderr(&o));
}

#[test]
fn nap_budget_ceilings_stay_below_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = cli(&["run", "--scheme", "vp_nap", "--nodes", "8", "--topology", "ring", "--out", out]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let s = summary(tmp.path());
    let ceilings = s["budget_ceilings"].as_array().unwrap();
    assert!(!ceilings.is_empty());
    assert!(ceilings.iter().all(|c| (1.0..=2.0).contains(&c.as_f64().unwrap())));
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    std::fs::write(&cfg, "scheme = \"vp\"\nnodes = 5\nseed = 9\n").unwrap();
    let o = cli(&["print-config", "--config", cfg.to_str().unwrap(), "--nodes", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let v: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(v["scheme"].as_str(), Some("vp"));
    assert_eq!(v["nodes"].as_integer(), Some(7));
    assert_eq!(v["seed"].as_integer(), Some(9));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = cli(&[
        "sweep", "--schemes", "fixed,nap", "--topologies", "ring", "--node-counts", "5",
        "--seeds", "1,2", "--write-runs", "--out", out,
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let table = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("fixed,ring,5,2,"));
    assert!(rows[2].starts_with("nap,ring,5,2,"));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 2);
    let runs = tmp.path().join("runs");
    assert_eq!(std::fs::read_dir(&runs).unwrap().count(), 4);
}

#[test]
fn sweep_rejects_empty_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["sweep", "--schemes", "", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep.schemes"), "{}", stderr(&o));
}

#[test]
fn sfm_rejects_more_nodes_than_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["sfm", "--nodes", "40", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sfm.nodes"), "{}", stderr(&o));
}

#[test]
fn sfm_reads_measurement_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let m = adaptive_admm::data::generate_affine(&adaptive_admm::data::AffineSpec {
        frames: 12,
        points: 40,
        ..Default::default()
    })
    .unwrap();
    let csv = tmp.path().join("m.csv");
    std::fs::write(&csv, adaptive_admm_cli::measurements::measurements_csv(&m)).unwrap();
    let out = tmp.path().join("sfm");
    let o = cli(&[
        "sfm", "--measurements", csv.to_str().unwrap(), "--nodes", "3",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["reference"], "svd_oracle");
    assert!(s["max_angle_deg"].as_f64().unwrap() < 5.0);

    std::fs::write(&csv, "1,2,3\n4,oops,6\n").unwrap();
    let o = cli(&["sfm", "--measurements", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2, column 2"), "{}", stderr(&o));
}

#[test]
fn reruns_produce_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, extra) in [(&a, None), (&b, Some("--parallel"))] {
        let mut args = vec!["run", "--scheme", "vp_ap", "--nodes", "6", "--out", dir.to_str().unwrap()];
        args.extend(extra);
        let o = cli(&args);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    }
    assert_eq!(
        std::fs::read(a.join("trace.csv")).unwrap(),
        std::fs::read(b.join("trace.csv")).unwrap()
    );
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_adaptive-admm"))
        .args(["run", "--nodes", "3", "--max-iterations", "5"])
        .env("ADAPTIVE_ADMM_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    assert!(tmp.path().join("trace.csv").exists());
}

#[test]
fn usage_errors_do_not_look_like_max_iterations() {
    let o = cli(&["run", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

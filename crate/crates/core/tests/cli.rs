use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levy_spde_lab::harness::report::CSV_MAGIC;
use levy_spde_lab::harness::{Curve, ExperimentConfig, ExperimentReport, Status};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-spde-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![kind, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cli(&args)
}

fn report_in(dir: &Path) -> ExperimentReport {
    ExperimentReport::from_json_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = cli(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["contraction", "concentration", "certificates", "galerkin", "moments", "rates"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn rates_writes_report_and_csv_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("rates", &configs().join("rates_lipschitz.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("[pass]")));
    let report = report_in(dir.path());
    assert_eq!(report.status, Status::Pass);
    assert_eq!(report.experiment, "rates");
    assert!(!report.artifacts.is_empty());
    for file in &report.artifacts {
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(text.starts_with(CSV_MAGIC), "{file} lacks the header line");
        let curve = Curve::from_csv_str(file.trim_end_matches(".csv"), &text).unwrap();
        let series = report.series(&curve.name).unwrap();
        assert_eq!(&curve, series);
    }
}

#[test]
fn json_curve_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("rates", &configs().join("rates_lipschitz.json"), dir.path(), &["--format", "json"]);
    assert!(out.status.success());
    let report = report_in(dir.path());
    for file in &report.artifacts {
        assert!(file.ends_with(".json"));
        let curve: Curve = serde_json::from_str(&std::fs::read_to_string(dir.path().join(file)).unwrap()).unwrap();
        assert_eq!(report.series(&curve.name), Some(&curve));
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_path(&configs().join("contraction_lipschitz.json")).unwrap();
    cfg.run.members = 8;
    cfg.model.n_modes = 8;
    cfg.run.horizon = 0.05;
    let path = dir.path().join("small.json");
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run("contraction", &path, &a, &["--seed", "99"]);
    run("contraction", &path, &b, &[]);
    let (ra, rb) = (report_in(&a), report_in(&b));
    assert_eq!(ra.provenance.master_seed, 99);
    assert_eq!(ra.config.run.seed, 99);
    assert_eq!(rb.provenance.master_seed, cfg.run.seed);
    assert_ne!(ra.series, rb.series);
}

#[test]
fn failing_bound_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("certificates", &configs().join("certificates_gaussian.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().contains("[FAIL]"));
    assert_eq!(report_in(dir.path()).status, Status::Fail);
}

#[test]
fn unresolvable_window_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_path(&configs().join("concentration_gaussian.json")).unwrap();
    cfg.run.members = 10;
    if let levy_spde_lab::harness::config::ExperimentKind::Concentration { r_grid, .. } = &mut cfg.experiment {
        *r_grid = vec![0.0, 5.0];
    }
    let path = dir.path().join("c.json");
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();
    let out = run("concentration", &path, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run("rates", &dir.path().join("nope.json"), dir.path(), &[]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8(missing.stderr).unwrap().starts_with("error:"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"model\": 3}").unwrap();
    assert_eq!(run("rates", &bad, dir.path(), &[]).status.code(), Some(1));

    // subcommand and experiment kind disagree
    let wrong = run("galerkin", &configs().join("rates_lipschitz.json"), dir.path(), &[]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = cli(&["rates", "--config", "x.json", "--bogus"]);
    assert!(!out.status.success());
}

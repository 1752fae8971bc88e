use std::path::Path;
use std::process::{Command, Output};

fn krflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krflow")).args(args).output().expect("spawn krflow")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.ini");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary_value(out: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no `{key}` in summary:\n{text}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_run_at_desk_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nbase_grid = 16\nfiber_grid = 16\n");
    let out = dir.path().join("out");
    let o = krflow(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("monitors.csv")).unwrap();
    assert!(csv.lines().count() > 160);
    assert!(!csv.contains("NaN") && !csv.contains("inf"));
    assert_eq!(summary_value(&out, "pass"), "true");
    assert!(out.join("oracle.csv").exists() && out.join("final.krfl").exists() && out.join("config.ini").exists());
}

#[test]
#[ignore = "the 32^4 default run takes about a quarter hour on one core"]
fn default_run_at_full_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let o = krflow(&["simulate", "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(dir.path().join("monitors.csv")).unwrap().lines().count() > 160);
}

#[test]
fn zero_potential_stays_at_roundoff() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nbase_grid = 8\nfiber_grid = 8\ninitial_potential = 0\n[flow]\nt_end = 4\ndt_sample = 0.1\n");
    let out = dir.path().join("out");
    let o = krflow(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(summary_value(&out, "sup_phi.max").parse::<f64>().unwrap() < 1e-8);
}

#[test]
fn huge_steps_finish_or_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[geometry]\nbase_grid = 8\nfiber_grid = 8\ninitial_potential = prod(0.05; 1,0,1,0)\n[flow]\nt_end = 2\ndt_max = 1\nc_cfl = 100\ndt_sample = 0.5\nmax_halvings = 2\n",
    );
    let out = dir.path().join("out");
    let o = krflow(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    if o.status.success() {
        let csv = std::fs::read_to_string(out.join("monitors.csv")).unwrap();
        assert!(!csv.contains("NaN") && !csv.contains("inf"));
    } else {
        let err = stderr(&o);
        assert!(err.contains("kind=PositivityLost") || err.contains("kind=CheckFailed"), "{err}");
        assert_eq!(summary_value(&out, "pass"), "false");
    }
}

#[test]
fn oracle_check_passes_and_catches_a_scaled_volume_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nbase_grid = 16\nfiber_grid = 16\n");
    let ok = krflow(&["oracle-check", "--config", &cfg]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    let bad = krflow(&["oracle-check", "--config", &cfg, "--corrupt-omega"]);
    assert_eq!(bad.status.code(), Some(1));
    let table = String::from_utf8_lossy(&bad.stdout);
    let line = table.lines().find(|l| l.starts_with("stationar")).expect("stationary row");
    let dev: f64 = line.split_whitespace().rev().nth(2).unwrap().parse().unwrap();
    assert!((dev - 1.01f64.ln()).abs() < 1e-6, "{line}");
}

#[test]
fn oracle_check_on_the_coarsest_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nbase_grid = 8\nfiber_grid = 8\n");
    let o = krflow(&["oracle-check", "--config", &cfg]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
}

#[test]
fn fit_reruns_on_saved_monitors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nbase_grid = 8\nfiber_grid = 8\ninitial_potential = prod(0.05; 1,0,1,0)\n[flow]\nt_end = 6\ndt_sample = 0.1\n[analysis]\nfit_window = 2, 6\n");
    let out = dir.path().join("out");
    let o = krflow(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = krflow(&["fit", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(f.status.success(), "{}", stderr(&f));
    let text = String::from_utf8_lossy(&f.stdout);
    assert!(text.lines().any(|l| l.starts_with("decay.constant")));
    assert_eq!(summary_value(&out, "decay.constant"), text.lines().find(|l| l.starts_with("decay.constant")).unwrap().split('=').nth(1).unwrap().trim());
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[flow]\nt_end = -1\n");
    let o = krflow(&["simulate", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("kind=ConfigInvalid"), "{}", stderr(&o));
}

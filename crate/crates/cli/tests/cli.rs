use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn groupflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupflow"))
        .args(args)
        .env("GROUPFLOW_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = groupflow(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SHORT_CALIBRATION: &str =
    "[scenario]\nkind = \"calibration-corridor\"\nseed = 5\nsteps = 120\n";

#[test]
fn run_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SHORT_CALIBRATION);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", s(&a)]);
    ok(&["run", "--config", &cfg, "--out", s(&b)]);
    for name in [
        "trajectory.csv",
        "frames.csv",
        "speeds.csv",
        "fd.csv",
        "relpos.csv",
        "density.pgm",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_flag_changes_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SHORT_CALIBRATION);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", s(&a)]);
    ok(&["run", "--config", &cfg, "--out", s(&b), "--seed", "6"]);
    assert_ne!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(b.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SHORT_CALIBRATION);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", s(&a)]);
    let manifest = a.join("manifest.toml");
    ok(&["run", "--config", s(&manifest), "--out", s(&b)]);
    assert_eq!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(b.join("trajectory.csv")).unwrap()
    );
    assert_eq!(
        fs::read(&manifest).unwrap(),
        fs::read(b.join("manifest.toml")).unwrap()
    );
}

#[test]
fn analyze_recomputes_identical_metrics() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SHORT_CALIBRATION);
    let (run_dir, again) = (tmp.path().join("run"), tmp.path().join("again"));
    ok(&["run", "--config", &cfg, "--out", s(&run_dir)]);
    ok(&["analyze", "--record", s(&run_dir), "--out", s(&again)]);
    for name in [
        "speeds.csv",
        "fd.csv",
        "density.csv",
        "relpos.csv",
        "summary.txt",
    ] {
        assert_eq!(
            fs::read(run_dir.join(name)).unwrap(),
            fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn existing_outputs_need_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SHORT_CALIBRATION);
    let out = tmp.path().join("o");
    ok(&["run", "--config", &cfg, "--out", s(&out)]);
    let before = fs::read(out.join("trajectory.csv")).unwrap();
    let again = groupflow(&["run", "--config", &cfg, "--out", s(&out), "--seed", "9"]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(fs::read(out.join("trajectory.csv")).unwrap(), before);
    ok(&[
        "run",
        "--config",
        &cfg,
        "--out",
        s(&out),
        "--seed",
        "9",
        "--force",
    ]);
    assert_ne!(fs::read(out.join("trajectory.csv")).unwrap(), before);
}

#[test]
fn bad_config_exits_with_two_and_a_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "[scenario]\nkind = \"calibration-corridor\"\n\n[weights]\nkappa_q = 3\n",
    );
    let out = groupflow(&["run", "--config", &cfg, "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
    let missing = groupflow(&["run", "--config", s(&tmp.path().join("none.toml"))]);
    assert_ne!(missing.status.code(), Some(0));
}

#[test]
fn wrong_kind_for_command_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SHORT_CALIBRATION);
    let out = groupflow(&["fd", "--config", &cfg, "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fd_rows_match_windows() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "fd.toml",
        "[scenario]\nkind = \"periodic-corridor\"\nsteps = 600\nwarmup_steps = 200\nwindow_steps = 40\n\n[campaign]\nreplicas = 1\n",
    );
    let out = tmp.path().join("fd");
    ok(&[
        "fd",
        "--config",
        &cfg,
        "--out",
        s(&out),
        "--density",
        "1",
        "--dyads",
        "0",
        "--dyads",
        "0.5",
    ]);
    for name in ["fd_d1_y0_r0.csv", "fd_d1_y0.5_r0.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("window_start,density,speed,flow"));
        assert_eq!(lines.count(), (600 - 200) / 40, "{name}");
    }
    let summary = fs::read_to_string(out.join("fd_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn bottleneck_writes_flow_and_maps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bn.toml",
        "[scenario]\nkind = \"bottleneck-room\"\npopulation = 120\nsteps = 300\nwarmup_steps = 100\n\n[campaign]\nreplicas = 1\n",
    );
    let out = tmp.path().join("bn");
    ok(&[
        "bottleneck",
        "--config",
        &cfg,
        "--out",
        s(&out),
        "--width",
        "2",
        "--dyads",
        "0.5",
    ]);
    let flow = fs::read_to_string(out.join("flow.csv")).unwrap();
    let rows: Vec<&str> = flow.lines().collect();
    assert_eq!(
        rows[0],
        "width,dyad_fraction,replica,crossings,duration,flow,specific_flow"
    );
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("2,0,0,"));
    assert!(rows[2].starts_with("2,0.5,0,"));
    for name in ["density_w2_y0.pgm", "density_w2_y0.5.pgm"] {
        let bytes = fs::read(out.join(name)).unwrap();
        assert!(bytes.starts_with(b"P5\n"), "{name}");
    }
}

#[test]
fn sweep_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "sw.toml",
        "[scenario]\nkind = \"calibration-corridor\"\nsteps = 150\n\n[sweep]\ndelta = { from = 6, to = 7 }\nkappa_c = { from = 11, to = 12 }\nreplicas = 2\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["sweep", "--config", &cfg, "--out", s(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_groupflow"))
        .args(["sweep", "--config", &cfg, "--out", s(&b)])
        .env("GROUPFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let sweep = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(sweep, fs::read_to_string(b.join("sweep.csv")).unwrap());
    assert_eq!(sweep.lines().count(), 5);
}

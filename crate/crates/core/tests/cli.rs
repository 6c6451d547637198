use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wpt-rx"))
}

fn proto_cfg() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/prototype.cfg")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of `key = value` in a report.
fn field(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{report}"))
        .trim()
        .parse()
        .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn design_midpoint_matches_closed_forms() {
    let o = run(&["design", "--fs", "200e3", "--ils-max", "0.8", "--vo-min", "24", "--ripple", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8_lossy(&o.stderr).into_owned();
    let w = 2.0 * PI * 1.29 * 200e3;
    let y = 3.75 * 0.8 / 24.0;
    let y_max = 5.0 * 0.8 / 24.0;
    assert!(rel(field(&report, "y"), y) < 1e-12);
    assert!(rel(field(&report, "cf"), y / w) < 1e-12);
    assert!(rel(field(&report, "lf"), 1.0 / (y * w)) < 1e-12);
    assert!(rel(field(&report, "co_min"), 5.41 * (y_max / w) / 0.01) < 1e-12);
    // rounded figures quoted for this design
    assert!((field(&report, "cf") - 77.1e-9).abs() < 0.05e-9);
    assert!((field(&report, "lf") - 4.94e-6).abs() < 0.005e-6);
    assert!((field(&report, "co_min") - 55.6e-6).abs() < 0.5e-6);
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 1 + 11);
}

#[test]
fn design_rejects_zero_ripple() {
    let o = run(&["design", "--fs", "200e3", "--ils-max", "0.8", "--vo-min", "24", "--ripple", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ripple"));
}

#[test]
fn design_two_points_writes_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.csv");
    let o = run(&[
        "design", "--fs", "200e3", "--ils-max", "0.8", "--vo-min", "24", "--ripple", "1", "--points", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn missing_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = run(&["steady", "--config", "/nonexistent/x.cfg", "--D", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_override_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let cfg = proto_cfg();
    let o = run(&[
        "steady", "--config", cfg.to_str().unwrap(), "--set", "nonsense=1", "--D", "0.1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn steady_at_zero_phase_delivers_little_current() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cycle.csv");
    let cfg = proto_cfg();
    let o = run(&["steady", "--config", cfg.to_str().unwrap(), "--D", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    // full-scale current at D = 0.25 is 0.795 * 0.8; the detuned tank leaks a few percent
    assert!(field(&report, "io_avg").abs() < 0.1 * 0.795 * 0.8, "{report}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,vcf,ilf,vo,ils,gate\n"));
    assert_eq!(csv.lines().count(), 1 + 1001);
}

#[test]
fn steady_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = proto_cfg();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&[
            "steady", "--config", cfg.to_str().unwrap(), "--D", "0.15", "--R", "36", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outputs.push((stdout(&o), std::fs::read(&out).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn steady_non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let cfg = proto_cfg();
    let o = run(&[
        "steady", "--config", cfg.to_str().unwrap(), "--set", "ss_tol=1e-300", "--D", "0.1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_single_step_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = proto_cfg();
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--param", "R", "--from", "36", "--to", "72", "--steps", "1",
        "--D", "0.2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "value,D,vo_avg,io_avg,p_avg,zvs_on,zvs_ok,reg_error,ok");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("36,"));
}

#[test]
fn sweep_load_at_fixed_phase_keeps_current() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = proto_cfg();
    // tank sized for 0.8 A over the 11.4 V the heaviest load sees at D = 0.24
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--set", "lf=2.3494e-6", "--set", "cf=1.6198e-7", "--param",
        "R", "--from", "18", "--to", "144", "--steps", "3", "--D", "0.24", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let io: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let (lo, hi) = io.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo - 1.0 < 0.05, "{io:?}");
}

#[test]
fn closed_loop_coil_sweep_holds_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = proto_cfg();
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--param", "ils", "--from", "0.7", "--to", "0.8", "--steps",
        "2", "--closed-loop", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    for line in csv.lines().skip(1) {
        let vo: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((vo - 24.0).abs() <= 0.1, "{line}");
    }
}

#[test]
fn sweep_failure_is_flagged_and_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = proto_cfg();
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--set", "ss_tol=1e-300", "--param", "R", "--from", "36",
        "--to", "36", "--steps", "1", "--D", "0.2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"));
}

#[test]
fn bode_default_grid_rows_and_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("bode");
    let cfg = proto_cfg();
    let o = run(&["bode", "--config", cfg.to_str().unwrap(), "--out", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plant = std::fs::read_to_string(dir.path().join("bode_plant.csv")).unwrap();
    let lp = std::fs::read_to_string(dir.path().join("bode_loop.csv")).unwrap();
    assert_eq!(plant.lines().count(), 51);
    assert_eq!(lp.lines().count(), 51);
    // integrator crossing 0 dB at 100 Hz: |T| = 100 / f
    for row in lp.lines().skip(1) {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - 20.0 * (100.0 / v[0]).log10()).abs() < 0.1, "{row}");
    }
}

#[test]
fn bode_rejects_inverted_grid() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("bode");
    let cfg = proto_cfg();
    let o = run(&[
        "bode", "--config", cfg.to_str().unwrap(), "--fmin", "100", "--fmax", "10", "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn open_loop_simulation_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let cfg = proto_cfg();
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--scenario", "open_loop", "--D", "0.2", "--t-end", "0.002",
        "--stride", "100", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,vcf,ilf,vo,ils,gate"));
    assert!(csv.lines().count() > 100);
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn xmo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xmo")).args(args).output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    xmo(&all)
}

fn json(dir: &Path, cmd: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{cmd}.json"))).unwrap()).unwrap()
}

fn csv_rows(dir: &Path, cmd: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(format!("{cmd}.csv"))).unwrap();
    assert!(!text.contains('\r'));
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sine_translation_profile_is_two_over_pi() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["oscillation", "--f", "sin(x1)", "--mode", "translation", "--cube", "[-pi/2,pi/2]", "--radii", "2pi,4pi,6pi"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(dir.path(), "oscillation");
    assert_eq!(rows[0][..2], ["parameter", "value"]);
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        let v: f64 = r[1].parse().unwrap();
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-3, "{v}");
    }
}

#[test]
fn unit_weights_give_constant_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["weights", "--w1", "1", "--w2", "1", "--p1", "2", "--p2", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(dir.path(), "weights");
    assert_eq!(rows[0], ["p1", "p2", "p", "constant"]);
    assert_eq!(rows[1][3], "1");
    assert_eq!(json(dir.path(), "weights")["report"]["constant"], 1.0);
}

#[test]
fn approximation_error_within_ten_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["approx", "--f", "smoothed_log", "--eps", "0.5", "--kmax", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(dir.path(), "approx");
    let err = r["report"]["approximation_error"]["value"].as_f64().unwrap();
    assert!(err <= 10.0 * 0.5, "{err}");
    assert_eq!(r["config"]["eps"], "0.5");
    assert_eq!(csv_rows(dir.path(), "approx")[0], ["alpha", "radius", "value"]);
}

#[test]
fn report_embeds_version_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["weights"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(dir.path(), "weights");
    assert_eq!(r["tool"], "xmo");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["command"], "weights");
    // derived defaults are written back
    assert_eq!(r["config"]["resolution"], "64");
    let text = std::fs::read_to_string(dir.path().join("weights.json")).unwrap();
    let keys: Vec<&str> = r["config"].as_object().unwrap().keys().map(String::as_str).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(text.find("\"command\"").unwrap() < text.find("\"config\"").unwrap());
}

#[test]
fn unknown_command_exits_one() {
    let o = xmo(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(xmo(&[]).status.code(), Some(1));
}

#[test]
fn schema_violations_exit_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["weights", "--p1", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`p1`"), "{}", stderr(&o));
    let o = run_in(dir.path(), &["weights", "--p1", "two"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`p1`"));
    let o = run_in(dir.path(), &["weights", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
    let o = run_in(dir.path(), &["oscillation", "--f", "sin(x1)", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`mode`"));
    let o = run_in(dir.path(), &["oscillation", "--f", "sin(x1", "--mode", "small"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`f`"));
    let o = run_in(dir.path(), &["oscillation", "--f", "sin(x1)", "--mode", "translation", "--cube", "[0,1]x[0,1]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`cube`"));
    let o = run_in(dir.path(), &["commutator", "--kernel", "riesz"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["weights", "--w1", "x1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = run_in(dir.path(), &["oscillation", "--f", "log(x1)", "--mode", "translation", "--cube", "[-1,1]", "--radii", "0.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("oscillation.json").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# weights run\np1 = 3\np2 = 2pi\nextent = 4\n").unwrap();
    let o = run_in(dir.path(), &["weights", "--config", cfg.to_str().unwrap(), "--p1", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(dir.path(), "weights");
    assert_eq!(r["config"]["p1"], "5");
    assert_eq!(r["config"]["extent"], "4");
    let p2 = r["report"]["p2"].as_f64().unwrap();
    assert!((p2 - 2.0 * std::f64::consts::PI).abs() < 1e-12);

    std::fs::write(&cfg, "p3 = 1\n").unwrap();
    let o = run_in(dir.path(), &["weights", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`p3`"));

    let o = run_in(dir.path(), &["weights", "--config", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn serial_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["kernel-verify", "--threads", "1", "--samples", "2000", "--seed", "99"];
    assert_eq!(run_in(dir.path(), &args).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("kernel-verify.json")).unwrap();
    let first_csv = std::fs::read(dir.path().join("kernel-verify.csv")).unwrap();
    assert_eq!(run_in(dir.path(), &args).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("kernel-verify.json")).unwrap());
    assert_eq!(first_csv, std::fs::read(dir.path().join("kernel-verify.csv")).unwrap());
    assert_eq!(json(dir.path(), "kernel-verify")["report"]["verification"]["seed"], 99);
}

fn assert_close(a: &Value, b: &Value) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()), "{x} {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).for_each(|(p, q)| assert_close(p, q));
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
            x.iter().zip(y).for_each(|((_, p), (_, q))| assert_close(p, q));
        }
        _ => assert_eq!(a, b),
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&serial, "1"), (&parallel, "4")] {
        let o = run_in(dir.path(), &["oscillation", "--f", "smoothed_log", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        let o = run_in(
            dir.path(),
            &["compactness", "--threads", threads, "--half-width", "8", "--spacing", "0.125", "--a-list", "2,4", "--resolution", "16"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for cmd in ["oscillation", "compactness"] {
        assert_close(&json(serial.path(), cmd)["report"], &json(parallel.path(), cmd)["report"]);
    }
}

#[test]
fn classify_csv_lists_all_profiles() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["oscillation", "--f", "bump"]).status.code(), Some(0));
    let r = json(dir.path(), "oscillation");
    assert_eq!(r["report"]["cmo_largescale_ok"], true);
    assert_eq!(r["report"]["label"], "numerical diagnostic");
    let rows = csv_rows(dir.path(), "oscillation");
    assert_eq!(rows[0][0], "profile");
    for p in ["small_scale", "translation", "large_scale", "annulus"] {
        assert!(rows.iter().any(|r| r[0] == p));
    }
}

#[test]
fn kernel_and_commutator_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["kernel-verify"]).status.code(), Some(0));
    let r = json(dir.path(), "kernel-verify");
    assert_eq!(r["report"]["verification"]["all_passed"], true);
    let slope = r["report"]["decay_slope"].as_f64().unwrap();
    assert!((slope + 4.0).abs() < 0.05, "{slope}");

    let o = run_in(dir.path(), &["commutator", "--b", "x1", "--points", "0;0.5", "--slot", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(dir.path(), "commutator");
    assert_eq!(rows[0], ["x1", "integrand", "operator_form"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(json(dir.path(), "commutator")["report"]["consistent"], true);
}

#[test]
fn compactness_families() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["compactness", "--family", "zero"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(dir.path(), "compactness");
    assert_eq!(r["report"]["verdict"]["bounded"], true);
    assert!(r["report"]["note"].as_str().unwrap().contains("finite"));
    let o = run_in(
        dir.path(),
        &["compactness", "--family", "far_translate", "--half-width", "100", "--spacing", "0.125", "--a-list", "10,20,40"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(dir.path(), "compactness")["report"]["verdict"]["vanishes_at_infinity"], false);
    let rows = csv_rows(dir.path(), "compactness");
    assert_eq!(rows[0], ["curve", "parameter", "value"]);
}

#[test]
fn help_and_version_exit_zero() {
    let o = xmo(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
    let o = xmo(&["approx", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("--eps"));
}

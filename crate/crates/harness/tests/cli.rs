use std::fs;
use std::path::Path;
use std::process::Command;

const WALK: &str = r#"{"name": "walk", "family": "quadratic-walk", "dimension": 3, "horizon": 25, "modulus": 2, "epsilon": 0.1, "seed": 11}"#;

fn soco(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_soco"))
        .args(args)
        .env("SOCO_OUT_DIR", dir.join("env-out"))
        .current_dir(dir)
        .output()
        .expect("soco runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_deterministic_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "walk.json", WALK);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = soco(tmp.path(), &["run", &cfg, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("walk.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("walk.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,H,M,level,balance_residual,tracking_error,H_opt,M_opt");
    assert_eq!(text.lines().count(), 26);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("walk.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["verdicts"]["competitive_ratio"], "pass");
}

#[test]
fn env_var_sets_default_output_and_seed_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "walk.json", WALK);
    assert!(soco(tmp.path(), &["run", &cfg]).status.success());
    let base = fs::read(tmp.path().join("env-out/walk.csv")).unwrap();
    assert!(soco(tmp.path(), &["run", &cfg, "--seed", "12"]).status.success());
    assert_ne!(base, fs::read(tmp.path().join("env-out/walk.csv")).unwrap());
}

#[test]
fn unknown_keys_fail_with_error_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &WALK.replace("\"seed\"", "\"colour\": 1, \"seed\""));
    let o = soco(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn failing_verdict_gives_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    // Balance parameter far outside the guarantee regime with huge jumps.
    let cfg = write_config(
        tmp.path(),
        "tiny.json",
        r#"{"name": "tiny", "family": "quadratic-walk", "dimension": 2, "horizon": 30, "modulus": 0.5, "epsilon": 1, "seed": 3, "beta": 0.01, "walk": "adversarial"}"#,
    );
    let o = soco(tmp.path(), &["run", &cfg, "--out-dir", "out"]);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("out/tiny.summary.json")).unwrap()).unwrap();
    let expected = if summary["passed"] == true { 0 } else { 1 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn sweep_and_lqr_sim() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "walk.json", WALK);
    let o = soco(tmp.path(), &["sweep", &cfg, "--param", "epsilon", "--values", "0.05,0.1,0.2", "--out-dir", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(tmp.path().join("s/walk.sweep.csv")).unwrap();
    let regrets: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert_eq!(regrets.len(), 3);
    assert!(regrets.windows(2).all(|w| w[0] <= w[1]));

    let lqr = write_config(
        tmp.path(),
        "lqr.json",
        r#"{"name": "ctl", "family": "lqr", "dimension": 2, "horizon": 10, "modulus": 1, "epsilon": 0.1, "seed": 2}"#,
    );
    let o = soco(tmp.path(), &["lqr-sim", &lqr, "--out-dir", "l"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("l/ctl.controls.csv").exists());
}

#[test]
fn verify_selected_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let o = soco(tmp.path(), &["verify", "reduction-roundtrip"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("reduction-roundtrip"));
    assert_eq!(soco(tmp.path(), &["verify", "nope"]).status.code(), Some(2));
}

use std::path::Path;
use std::process::{Command, Output};

fn prsloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prsloc"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SHORT: &str =
    r#"{"trajectory": {"synthetic": {"n_points": 8}}, "attack": {"kind": "jamming"}}"#;

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("out");
    let res = prsloc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for f in ["epochs.csv", "metrics.json", "config_resolved.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config_resolved.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["seed"], 5);
    assert_eq!(resolved["profile"], "test");

    let out2 = dir.path().join("out2");
    let again = prsloc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out2.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(again.status.success());
    assert_eq!(
        std::fs::read(out.join("epochs.csv")).unwrap(),
        std::fs::read(out2.join("epochs.csv")).unwrap()
    );
}

#[test]
fn unknown_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"attack": {"kind": "jamming", "volume": 11}}"#,
    );
    let res = prsloc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("volume"));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("sweep");
    let res = prsloc(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "attack.power_dbm",
        "--values",
        "30",
        "48",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("sweep.json").is_file());
    let dirs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(dirs, 2);
}

#[test]
fn bad_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let res = prsloc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--profile",
        "huge",
    ]);
    assert!(!res.status.success());
}

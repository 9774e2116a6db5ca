use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_volterra-sing");

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn volterra(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().unwrap()
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let out = Command::new(BIN).arg("validate-config").arg("--config").arg(&path).output().unwrap();
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        }
    }
}

#[test]
fn passing_audit_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("audit_power_75.json");
    let out = volterra(&["kernel-audit", "--config", cfg.to_str().unwrap(), "--seed", "42"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS a1_ii"));
    let meta = std::fs::read_to_string(dir.path().join("meta.txt")).unwrap();
    assert!(meta.contains("seed: 42"));
    assert!(dir.path().join("verdicts.csv").exists());
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("audit_power_45.json");
    let out = volterra(&["kernel-audit", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let verdicts = std::fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    assert!(verdicts.lines().any(|l| l.contains(",a1_ii,") && l.ends_with(",fail")));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("audit_power_75.json");
    // subcommand and config disagree
    let out = volterra(&["clt-rate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"seed\"", "\"sead\"");
    std::fs::write(&bad, text).unwrap();
    let out = Command::new(BIN).args(["validate-config", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    let out = volterra(&["kernel-audit", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

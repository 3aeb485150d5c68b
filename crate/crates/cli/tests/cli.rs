#[path = "../src/report.rs"]
#[allow(dead_code)]
mod report;

use std::path::PathBuf;
use std::process::{Command, Output};

use report::{EntailReport, ExecReport, VerifyReport, REPORT_VERSION};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(format!("{name}.invc")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepinv")).args(args).env_remove("SEPINV_CONFIG").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["verify"])), 2);
    let missing = run(&["verify", "/no/such/file.invc"]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("file not found"));
    assert_eq!(code(&run(&["gen-data", "--count", "1", "--pred", "no_such_pred"])), 2);
}

#[test]
fn verify_exit_code_reflects_result() {
    assert_eq!(code(&run(&["verify", &corpus("list"), "--func", "reverse"])), 0);
    assert_eq!(code(&run(&["verify", &corpus("list"), "--func", "clear_tail"])), 1);
}

#[test]
fn verify_json_round_trips() {
    let out = run(&["verify", &corpus("list"), "--func", "iterator", "--json", "--oracle", "3"]);
    assert_eq!(code(&out), 0);
    let rep: VerifyReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep.report_version, REPORT_VERSION);
    assert!(rep.verified);
    assert!(rep.functions[0].loops[0].oracle.unwrap().ok());
    let again: VerifyReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(again, rep);
}

#[test]
fn exec_prints_requested_states() {
    let out = run(&["exec", &corpus("list"), "--func", "iterator", "--steps", "2", "--json"]);
    let rep: ExecReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep.states.len(), 3);
    let text = run(&["exec", &corpus("list"), "--func", "iterator", "--steps", "2"]);
    assert!(String::from_utf8_lossy(&text.stdout).lines().any(|l| l.starts_with("S2: ")));
}

#[test]
fn entail_reports_each_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("goals.txt");
    std::fs::write(&path, "x->tail == y |- lseg(x, y)\nlseg(x, y) |- x->tail == y\n").unwrap();
    let out = run(&["entail", path.to_str().unwrap(), "--oracle", "2", "--json"]);
    assert_eq!(code(&out), 1);
    let rep: EntailReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep.results.iter().map(|r| r.proved).collect::<Vec<_>>(), [true, false]);
    assert_eq!(rep.results[1].oracle_valid, Some(false));
    assert!(rep.results[1].counter_model.is_some());
}

#[test]
fn gen_data_is_deterministic() {
    let a = run(&["gen-data", "--count", "25", "--seed", "3"]);
    let b = run(&["gen-data", "--count", "25", "--seed", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<serde_json::Value> =
        String::from_utf8(a.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 25);
    assert!(lines.iter().all(|l| l["label"].is_string() && l["inputs"].is_array()));
    let empty = run(&["gen-data", "--count", "0"]);
    assert_eq!(code(&empty), 0);
    assert!(empty.stdout.is_empty());
}

#[test]
fn config_file_is_read_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "max_nun = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sepinv"))
        .args(["verify", &corpus("list"), "--func", "reverse"])
        .env("SEPINV_CONFIG", &bad)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_nun"));
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "max_num = 4\nseed = 9\n").unwrap();
    let out = run(&["--config", good.to_str().unwrap(), "verify", &corpus("list"), "--func", "reverse"]);
    assert_eq!(code(&out), 0);
}

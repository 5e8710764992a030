use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gfra(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfra"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_files(out: &Output) -> Vec<String> {
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    v["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_owned()).collect()
}

fn stderr_error(out: &Output) -> (String, String) {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    (
        v["error"]["kind"].as_str().unwrap().to_owned(),
        v["error"]["message"].as_str().unwrap().to_owned(),
    )
}

#[test]
fn negotiate_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = gfra(&["negotiate", "--out-dir", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = stdout_files(&out);
    assert_eq!(files.len(), 3);
    for f in &files {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("res/negotiation.csv")).unwrap();
    assert!(csv.starts_with("delta,"));
}

#[test]
fn run_is_reproducible_and_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| ["run", "--trials", "2", "--seed", "7", "--scheme", "fap", "--format", "json", "--out-dir", o];
    let a = gfra(&args("a"), dir.path());
    let b = gfra(&args("b"), dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let files = stdout_files(&a);
    assert_eq!(files.len(), 4);
    for f in &files {
        let name = Path::new(f).file_name().unwrap();
        assert_eq!(fs::read(dir.path().join("a").join(name)).unwrap(), fs::read(dir.path().join("b").join(name)).unwrap());
    }
    assert!(b.status.success());
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/summary_setup1.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 2);
    assert_eq!(summary["scheme"], "fap");
    assert!(dir.path().join("a/cycles_setup1.json").is_file());
}

#[test]
fn benches_accept_small_configs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("small.toml"),
        "[estimation]\nn_min = 8\nn_max = 9\nschemes = [\"ss-ml-ls\", \"msem\"]\n\n\
         [failprob]\nks = [8]\nw_min = 10\nw_max = 12\n\n\
         [prediction]\nreplications = 2\n\n\
         [tables]\nsingle_slot_w = [4]\nwhole_cycle = [[3, 2, 2]]\n",
    )
    .unwrap();
    for (cmd, trials) in [("bench-estimation", "20"), ("bench-failprob", "500"), ("bench-prediction", "2"), ("table-cache", "1")] {
        let mut args = vec![cmd, "--config", "small.toml", "--trials", trials, "--out-dir", cmd];
        if cmd == "bench-prediction" {
            args.push("--no-diagnostics");
        }
        let out = gfra(&args, dir.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let files = stdout_files(&out);
        assert!(!files.is_empty(), "{cmd}");
        assert!(files.iter().all(|f| dir.path().join(f).is_file()), "{cmd}: {files:?}");
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gfra(&["negotiate", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out).0, "io");
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_config_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[scenario]\nscheme = \"greedy\"\n").unwrap();
    let out = gfra(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let (kind, message) = stderr_error(&out);
    assert_eq!(kind, "parse");
    assert!(message.contains("bad.toml"), "{message}");
}

#[test]
fn invalid_values_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = gfra(&["run", "--trials", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out).0, "invalid_config");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["run", "--format", "xml"], &[]] {
        let out = gfra(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr_error(&out).0, "usage");
    }
}

#[test]
fn help_succeeds() {
    let out = gfra(&["--help"], Path::new("."));
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("bench-failprob"));
}

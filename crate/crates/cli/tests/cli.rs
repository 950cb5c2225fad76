//! The `retro` binary: exit codes, eval reports, seed/dump/restore and the
//! serve lifecycle.

mod common;

use std::fs;
use std::net::TcpListener;

use common::{repo_root, retro, Server};
use retro_core::eval::BenchmarkOutcome;
use serde_json::json;

fn dataset() -> String {
    repo_root().join("data/replica.jsonl").display().to_string()
}

fn replay_dir(prompt: u8) -> String {
    repo_root().join(format!("data/replay/prompt{prompt}")).display().to_string()
}

#[test]
fn usage_errors_exit_64() {
    let out = retro().args(["eval", "--dataset", &dataset(), "--prompt", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let out = retro().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let out = retro().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn replay_without_a_directory_is_a_usage_error() {
    let out = retro()
        .args(["eval", "--dataset", &dataset(), "--prompt", "1", "--classifier", "replay"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn replay_eval_writes_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("p2.json");
    let out = retro()
        .args(["eval", "--dataset", &dataset(), "--prompt", "2", "--classifier", "replay"])
        .args(["--replay-dir", &replay_dir(2), "--report"])
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: BenchmarkOutcome = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let scored = parsed.runs[0].result.as_ref().unwrap();
    assert_eq!(
        (scored.counts.n_correct(), scored.counts.n_incorrect(), scored.counts.n_missing(), scored.counts.n_duplicated()),
        (148, 45, 7, 0)
    );
    assert_eq!((scored.metrics.match_overall, scored.metrics.match_simple), (74, 77));
}

#[test]
fn fallback_runs_are_identical() {
    let out = retro()
        .args(["eval", "--dataset", &dataset(), "--prompt", "3", "--classifier", "fallback", "--runs", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let runs: Vec<&str> = stdout.split("== run ").skip(1).map(|r| r.split_once('\n').unwrap().1).collect();
    assert_eq!(runs.len(), 3);
    // The last run section runs into the summary; compare the count block only.
    let block = |r: &str| r.split("\n\n").next().unwrap().to_string();
    assert_eq!(block(runs[0]), block(runs[1]));
    assert_eq!(block(runs[1]), block(runs[2]));
}

#[test]
fn a_failed_run_exits_2_and_is_reported() {
    // Only the first call has a recorded answer; the second run fails.
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_dir(replay_dir(1)).unwrap().next().unwrap().unwrap().path();
    let name = src.file_name().unwrap().to_str().unwrap().replace(".txt", ".1.txt");
    fs::copy(&src, dir.path().join(name)).unwrap();
    let report = dir.path().join("report.json");
    let out = retro()
        .args(["eval", "--dataset", &dataset(), "--prompt", "1", "--classifier", "replay", "--runs", "2"])
        .arg("--replay-dir")
        .arg(dir.path())
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let parsed: BenchmarkOutcome = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(!parsed.runs[0].failed());
    assert!(parsed.runs[1].failed());
    assert_eq!(parsed.summary.failed, 1);
}

#[test]
fn seed_twice_refuses_the_second_time() {
    let dir = tempfile::tempdir().unwrap();
    let first = retro().arg("--data-dir").arg(dir.path()).arg("seed").output().unwrap();
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let second = retro().arg("--data-dir").arg(dir.path()).arg("seed").output().unwrap();
    assert_eq!(second.status.code(), Some(5));
}

#[test]
fn data_dir_comes_from_the_environment_unless_overridden() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let out = retro().env("RETRO_DATA_DIR", env_dir.path()).arg("seed").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.path().join("retro.store").exists());
    let out = retro()
        .env("RETRO_DATA_DIR", env_dir.path())
        .arg("--data-dir")
        .arg(flag_dir.path())
        .arg("seed")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_dir.path().join("retro.store").exists());
}

#[cfg(unix)]
#[test]
fn unwritable_data_dir_exits_4() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let locked = dir.path().join("ro");
    fs::create_dir(&locked).unwrap();
    fs::set_permissions(&locked, fs::Permissions::from_mode(0o500)).unwrap();
    // Root ignores permission bits; nothing to check then.
    if fs::write(locked.join("probe"), b"x").is_ok() {
        return;
    }
    let out = retro().arg("--data-dir").arg(&locked).arg("seed").output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn dump_and_restore_round_trip() {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    let dump = src.path().join("dump.jsonl");
    assert!(retro().arg("--data-dir").arg(src.path()).arg("seed").output().unwrap().status.success());
    let out = retro().arg("--data-dir").arg(src.path()).args(["dump", "--output"]).arg(&dump).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = retro().arg("--data-dir").arg(dst.path()).args(["restore", "--input"]).arg(&dump).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let again = retro().arg("--data-dir").arg(dst.path()).args(["restore", "--input"]).arg(&dump).output().unwrap();
    assert_eq!(again.status.code(), Some(5));

    let redump = dst.path().join("redump.jsonl");
    retro().arg("--data-dir").arg(dst.path()).args(["dump", "--output"]).arg(&redump).output().unwrap();
    assert_eq!(fs::read_to_string(&dump).unwrap(), fs::read_to_string(&redump).unwrap());
}

#[test]
fn serve_answers_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    assert!(retro().arg("--data-dir").arg(dir.path()).arg("seed").output().unwrap().status.success());
    let server = Server::start(dir.path());
    let (status, dash) = server.request("GET", "/api/v1/dashboard", None);
    assert_eq!(status, 200);
    let board = dash[0]["board_id"].as_str().unwrap().to_string();
    let (status, created) = server.request("POST", &format!("/api/v1/boards/{board}/comments"), Some(&json!({"text": "Demo went smoothly"})));
    assert_eq!(status, 201);
    assert!(created["id"].is_string());

    // A second server on the same data dir is refused while the first runs.
    let out = retro().arg("--data-dir").arg(dir.path()).args(["serve", "--port", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    assert_eq!(server.terminate(), Some(0));
    let store = retro_store::Store::open(dir.path()).unwrap();
    assert!(!store.is_empty());
}

#[test]
fn busy_port_exits_3() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = retro().arg("--data-dir").arg(dir.path()).args(["serve", "--port", &port]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

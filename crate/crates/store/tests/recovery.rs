//! Crash recovery: truncated journals and a writer killed mid-flight.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use retro_store::{Expect, Kind, Store, StoreOptions, Write, STORE_FILE};
use serde_json::{json, Value};

const CHILD_ENV: &str = "RETRO_STORE_CRASH_CHILD_DIR";

fn state(store: &Store) -> BTreeMap<(Kind, String), (u64, Value)> {
    Kind::ALL
        .iter()
        .flat_map(|&k| store.scan(k, |_| true))
        .map(|r| ((r.kind, r.id), (r.version, r.value)))
        .collect()
}

fn fast(dir: &Path) -> Store {
    Store::open_with(dir, StoreOptions { sync: false }).unwrap()
}

#[test]
fn every_truncation_of_the_last_batch_recovers_old_or_new() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(STORE_FILE);
    let (old_state, new_state, old_len) = {
        let s = fast(dir.path());
        s.put_checked(Kind::Board, "a", &json!({"text": "first"}), Expect::Absent).unwrap();
        s.put_checked(Kind::Project, "p", &json!({"name": "Payments"}), Expect::Absent).unwrap();
        let old = state(&s);
        let old_len = fs::metadata(&path).unwrap().len() as usize;
        s.commit(vec![
            Write::put(Kind::Board, "a", &json!({"text": "second, a bit longer"}), Expect::Version(1)).unwrap(),
            Write::put(Kind::ProjectBoards, "p", &json!(["a"]), Expect::Absent).unwrap(),
            Write::delete(Kind::Project, "p", Expect::Version(1)),
        ])
        .unwrap();
        (old, state(&s), old_len)
    };
    let full = fs::read(&path).unwrap();
    assert_ne!(old_state, new_state);

    for cut in old_len..=full.len() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join(STORE_FILE), &full[..cut]).unwrap();
        let s = fast(d.path());
        let got = state(&s);
        let expected = if cut == full.len() { &new_state } else { &old_state };
        assert_eq!(&got, expected, "cut at byte {cut} of {}", full.len());
        // The store stays writable after recovery.
        s.put_checked(Kind::Audit, "after", &json!(cut), Expect::Absent).unwrap();
        drop(s);
        assert!(state(&fast(d.path())).contains_key(&(Kind::Audit, "after".to_string())));
    }
}

#[test]
fn torn_header_is_treated_as_empty_store() {
    for cut in 0..5 {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join(STORE_FILE), &b"RETROSTORE 1\n"[..cut]).unwrap();
        let s = fast(d.path());
        assert!(s.is_empty());
    }
}

/// Record written by the crash child: the digest lets the parent tell a
/// torn value from an intact one.
fn payload(seq: u64) -> Value {
    let pad = "x".repeat((seq % 700) as usize);
    json!({"seq": seq, "pad": pad, "check": seq * 7 + pad.len() as u64})
}

fn payload_ok(v: &Value) -> bool {
    let seq = v["seq"].as_u64().unwrap();
    v["check"].as_u64() == Some(seq * 7 + v["pad"].as_str().unwrap().len() as u64)
}

/// Entry point for the child process; inert in a normal test run.
#[test]
fn crash_child_writer() {
    let Ok(dir) = env::var(CHILD_ENV) else { return };
    let s = Store::open(&dir).unwrap();
    let mut seq = 0u64;
    loop {
        seq += 1;
        let slot = format!("r{}", seq % 8);
        let expect = s.version(Kind::Board, &slot).map_or(Expect::Absent, Expect::Version);
        let pair = s.version(Kind::ProjectBoards, "pair").map_or(Expect::Absent, Expect::Version);
        let pair2 = s.version(Kind::Project, "pair").map_or(Expect::Absent, Expect::Version);
        s.commit(vec![
            Write::put(Kind::Board, &slot, &payload(seq), expect).unwrap(),
            Write::put(Kind::ProjectBoards, "pair", &payload(seq), pair).unwrap(),
            Write::put(Kind::Project, "pair", &payload(seq), pair2).unwrap(),
        ])
        .unwrap();
    }
}

#[test]
fn killed_writer_leaves_no_torn_records() {
    let exe = env::current_exe().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut last_seq = 0;
    for round in 0..3 {
        let mut child = Command::new(&exe)
            .args(["--exact", "crash_child_writer", "--nocapture", "--test-threads=1"])
            .env(CHILD_ENV, dir.path())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let started = Instant::now();
        let path = dir.path().join(STORE_FILE);
        let base = fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        while fs::metadata(&path).map(|m| m.len()).unwrap_or(0) < base + 20_000
            && started.elapsed() < Duration::from_secs(10)
        {
            thread::sleep(Duration::from_millis(5));
        }
        child.kill().unwrap(); // SIGKILL on unix
        child.wait().unwrap();

        let s = Store::open(dir.path()).unwrap();
        let records: Vec<_> = Kind::ALL.iter().flat_map(|&k| s.scan(k, |_| true)).collect();
        assert!(!records.is_empty(), "round {round}: child wrote nothing");
        for r in &records {
            assert!(payload_ok(&r.value), "round {round}: torn record {r:?}");
        }
        let a = s.get(Kind::ProjectBoards, "pair").unwrap().value["seq"].as_u64().unwrap();
        let b = s.get(Kind::Project, "pair").unwrap().value["seq"].as_u64().unwrap();
        assert_eq!(a, b, "round {round}: batch applied partially");
        let newest = records.iter().filter(|r| r.kind == Kind::Board).map(|r| r.value["seq"].as_u64().unwrap()).max();
        assert_eq!(newest, Some(a), "round {round}: slot and pair disagree");
        // Each child restarts its sequence at 1, so only check progress within the round.
        assert!(a > 0);
        last_seq = a;
    }
    assert!(last_seq > 0);
}

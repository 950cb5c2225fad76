//! Durable record storage behind a small key-value-with-scan contract.
//!
//! Everything lives in one append-only journal file inside the data
//! directory. The full live set is kept in memory; the journal exists for
//! durability and is replayed on open. Batches are the unit of atomicity:
//! either every write in a batch survives a crash or none does.

mod journal;
mod record;

use std::collections::{BTreeMap, HashSet};
use std::env;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, BufRead, BufReader, Read, Write as _};
use std::path::{Path, PathBuf};

use log::{info, warn};
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use record::{Expect, Kind, StoredRecord, Write, SCHEMA_VERSION};
use record::Entry;

pub const STORE_FILE: &str = "retro.store";
const LOCK_FILE: &str = "retro.lock";
pub const DATA_DIR_ENV: &str = "RETRO_DATA_DIR";
const DUMP_FORMAT: &str = "retro-dump";
/// Records per journal line when compacting or restoring.
const BULK_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("version conflict on {kind}/{id}: expected {expected:?}, found {current:?}")]
    VersionConflict {
        kind: Kind,
        id: String,
        expected: Option<u64>,
        current: Option<u64>,
    },
    #[error("serialization error: {0}")]
    Serialization(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("store file is corrupt at line {line}")]
    Corrupt { line: usize },
    #[error("record schema version {found} is newer than supported version {SCHEMA_VERSION}")]
    UnsupportedSchema { found: u32 },
    #[error("unsupported store format `{0}`")]
    UnsupportedFormat(String),
    #[error("{0} is not a store file")]
    BadMagic(PathBuf),
    #[error("data directory {0} is in use by another process")]
    Locked(PathBuf),
    #[error("store already contains records")]
    NonEmptyStore,
    #[error("batch writes {kind}/{id} more than once")]
    RepeatedKey { kind: Kind, id: String },
    #[error("invalid dump: {0}")]
    InvalidDump(String),
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// fsync after every commit. Turning this off trades crash durability
    /// for speed and is meant for tests only.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self { sync: true }
    }
}

/// Directory named by `RETRO_DATA_DIR`, if set.
pub fn data_dir_from_env() -> Option<PathBuf> {
    env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

type Key = (Kind, String);

struct Inner {
    records: BTreeMap<Key, StoredRecord>,
    file: File,
    len: u64,
}

pub struct Store {
    path: PathBuf,
    opts: StoreOptions,
    inner: RwLock<Inner>,
    // Held for the lifetime of the store; the OS releases it if we die.
    _lock: File,
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    format: String,
    schema_version: u32,
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, StoreOptions::default())
    }

    pub fn open_with(dir: impl AsRef<Path>, opts: StoreOptions) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(StoreError::Locked(dir.to_path_buf())),
            Err(TryLockError::Error(e)) => return Err(e.into()),
        }

        let path = dir.join(STORE_FILE);
        let (records, valid_len, lines) = recover(&path)?;
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let on_disk = file.metadata()?.len();
        if on_disk != valid_len {
            warn!("discarding {} bytes of torn journal tail in {}", on_disk - valid_len, path.display());
            file.set_len(valid_len)?;
            file.sync_all()?;
        }
        if valid_len == 0 {
            file.write_all(journal::header().as_bytes())?;
            file.sync_all()?;
            sync_dir(dir);
        }
        let len = file.metadata()?.len();

        let store = Self {
            path,
            opts,
            inner: RwLock::new(Inner { records, file, len }),
            _lock: lock,
        };
        let live = store.len();
        if lines > 64 && lines > 2 * live {
            store.compact()?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.inner.read().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, kind: Kind, id: &str) -> Option<StoredRecord> {
        self.inner.read().records.get(&(kind, id.to_string())).cloned()
    }

    pub fn version(&self, kind: Kind, id: &str) -> Option<u64> {
        self.inner.read().records.get(&(kind, id.to_string())).map(|r| r.version)
    }

    /// Decoded value and its version.
    pub fn get_as<T: DeserializeOwned>(&self, kind: Kind, id: &str) -> Result<Option<(T, u64)>, StoreError> {
        match self.get(kind, id) {
            Some(r) => Ok(Some((r.decode()?, r.version))),
            None => Ok(None),
        }
    }

    /// Every current record of `kind` accepted by `pred`, in id order, taken
    /// from a single consistent snapshot.
    pub fn scan(&self, kind: Kind, pred: impl Fn(&StoredRecord) -> bool) -> Vec<StoredRecord> {
        let inner = self.inner.read();
        inner
            .records
            .range((kind, String::new())..)
            .take_while(|((k, _), _)| *k == kind)
            .map(|(_, r)| r)
            .filter(|r| pred(r))
            .cloned()
            .collect()
    }

    pub fn put_checked<T: Serialize>(&self, kind: Kind, id: &str, value: &T, expect: Expect) -> Result<u64, StoreError> {
        let versions = self.commit(vec![Write::put(kind, id, value, expect)?])?;
        Ok(versions[0])
    }

    /// Applies `writes` atomically after checking every precondition.
    /// Returns the new version of each written key (0 for deletions).
    pub fn commit(&self, writes: Vec<Write>) -> Result<Vec<u64>, StoreError> {
        if writes.is_empty() {
            return Ok(Vec::new());
        }
        let mut seen = HashSet::new();
        for w in &writes {
            if !seen.insert((w.kind, w.id.as_str())) {
                return Err(StoreError::RepeatedKey {
                    kind: w.kind,
                    id: w.id.clone(),
                });
            }
        }

        let mut inner = self.inner.write();
        let mut entries = Vec::with_capacity(writes.len());
        for w in writes {
            let current = inner.records.get(&(w.kind, w.id.clone())).map(|r| r.version);
            if !w.expect.admits(current) {
                return Err(StoreError::VersionConflict {
                    kind: w.kind,
                    id: w.id,
                    expected: w.expect.expected(),
                    current,
                });
            }
            let version = if w.value.is_some() { current.unwrap_or(0) + 1 } else { 0 };
            entries.push(Entry {
                kind: w.kind,
                id: w.id,
                version,
                schema_version: SCHEMA_VERSION,
                value: w.value,
            });
        }
        self.append(&mut inner, &entries)?;
        Ok(entries.into_iter().map(|e| apply(&mut inner.records, e)).collect())
    }

    fn append(&self, inner: &mut Inner, entries: &[Entry]) -> Result<(), StoreError> {
        let line = journal::encode(entries);
        let written = inner.file.write_all(&line).and_then(|_| {
            if self.opts.sync {
                inner.file.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            // Leave no partial line behind for later appends to follow.
            let _ = inner.file.set_len(inner.len);
            return Err(e.into());
        }
        inner.len += line.len() as u64;
        Ok(())
    }

    /// Writes every record as line-delimited JSON, preceded by a header line.
    pub fn dump(&self, out: &mut dyn io::Write) -> Result<usize, StoreError> {
        let inner = self.inner.read();
        let header = DumpHeader {
            format: DUMP_FORMAT.into(),
            schema_version: SCHEMA_VERSION,
        };
        let ser = |e: serde_json::Error| StoreError::Serialization(e.to_string());
        writeln!(out, "{}", serde_json::to_string(&header).map_err(ser)?)?;
        for r in inner.records.values() {
            writeln!(out, "{}", serde_json::to_string(r).map_err(ser)?)?;
        }
        out.flush()?;
        Ok(inner.records.len())
    }

    /// Loads a dump into an empty store, preserving record versions.
    pub fn restore(&self, input: &mut dyn Read) -> Result<usize, StoreError> {
        let mut lines = BufReader::new(input).lines();
        let header: DumpHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?).map_err(|_| StoreError::InvalidDump("missing header line".into()))?,
            None => return Err(StoreError::InvalidDump("empty input".into())),
        };
        if header.format != DUMP_FORMAT {
            return Err(StoreError::InvalidDump(format!("unknown format `{}`", header.format)));
        }
        if header.schema_version > SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema {
                found: header.schema_version,
            });
        }
        let mut records = Vec::new();
        let mut keys = HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: StoredRecord = serde_json::from_str(&line)
                .map_err(|e| StoreError::InvalidDump(format!("line {}: {e}", i + 2)))?;
            if r.schema_version > SCHEMA_VERSION {
                return Err(StoreError::UnsupportedSchema { found: r.schema_version });
            }
            if r.version == 0 {
                return Err(StoreError::InvalidDump(format!("line {}: version must be positive", i + 2)));
            }
            if !keys.insert((r.kind, r.id.clone())) {
                return Err(StoreError::InvalidDump(format!("line {}: duplicate {}/{}", i + 2, r.kind, r.id)));
            }
            records.push(r);
        }

        let mut inner = self.inner.write();
        if !inner.records.is_empty() {
            return Err(StoreError::NonEmptyStore);
        }
        let entries: Vec<Entry> = records
            .into_iter()
            .map(|r| Entry {
                kind: r.kind,
                id: r.id,
                version: r.version,
                schema_version: r.schema_version,
                value: Some(r.value),
            })
            .collect();
        // One line keeps the whole restore atomic.
        self.append(&mut inner, &entries)?;
        let n = entries.len();
        for e in entries {
            apply(&mut inner.records, e);
        }
        Ok(n)
    }

    /// Rewrites the journal to hold only live records.
    pub fn compact(&self) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        let tmp = self.path.with_extension("compact");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(journal::header().as_bytes())?;
            let entries: Vec<Entry> = inner
                .records
                .values()
                .map(|r| Entry {
                    kind: r.kind,
                    id: r.id.clone(),
                    version: r.version,
                    schema_version: r.schema_version,
                    value: Some(r.value.clone()),
                })
                .collect();
            for chunk in entries.chunks(BULK_CHUNK) {
                f.write_all(&journal::encode(chunk))?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        if let Some(dir) = self.path.parent() {
            sync_dir(dir);
        }
        inner.file = OpenOptions::new().read(true).append(true).open(&self.path)?;
        inner.len = inner.file.metadata()?.len();
        info!("compacted {} to {} records", self.path.display(), inner.records.len());
        Ok(())
    }
}

fn apply(records: &mut BTreeMap<Key, StoredRecord>, e: Entry) -> u64 {
    let key = (e.kind, e.id.clone());
    match e.value {
        Some(value) => {
            records.insert(
                key,
                StoredRecord {
                    kind: e.kind,
                    id: e.id,
                    version: e.version,
                    schema_version: e.schema_version,
                    value,
                },
            );
            e.version
        }
        None => {
            records.remove(&key);
            0
        }
    }
}

/// Replays the journal. Returns the live records, the length of the valid
/// prefix of the file, and the number of batch lines read.
fn recover(path: &Path) -> Result<(BTreeMap<Key, StoredRecord>, u64, usize), StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let mut records = BTreeMap::new();
    let mut pos = match journal::read_header(&bytes) {
        journal::Header::Missing => return Ok((records, 0, 0)),
        journal::Header::Valid { len } => len,
        journal::Header::Unsupported(v) => return Err(StoreError::UnsupportedFormat(v)),
        journal::Header::BadMagic => return Err(StoreError::BadMagic(path.to_path_buf())),
    };
    let mut lines = 0;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            break; // torn tail without newline
        };
        let Some(entries) = journal::decode(&rest[..nl]) else {
            if pos + nl + 1 == bytes.len() {
                break; // damaged final line
            }
            return Err(StoreError::Corrupt { line: lines + 2 });
        };
        for e in &entries {
            if e.schema_version > SCHEMA_VERSION {
                return Err(StoreError::UnsupportedSchema { found: e.schema_version });
            }
        }
        for e in entries {
            apply(&mut records, e);
        }
        lines += 1;
        pos += nl + 1;
    }
    Ok((records, pos as u64, lines))
}

fn sync_dir(dir: &Path) {
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

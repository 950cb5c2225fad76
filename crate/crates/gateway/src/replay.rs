//! Offline stub answering prompts from recorded transcripts.
//!
//! A transcript directory holds one file per prompt, named
//! `<sha256 of the prompt, lowercase hex>.txt`, whose content is the response
//! text returned verbatim. A file named `<hash>.<k>.txt` answers only the
//! k-th call (1-based) with that prompt and takes precedence, which lets one
//! directory script different answers for repeated runs.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use retro_core::{Completion, CompletionError};
use sha2::{Digest, Sha256};

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug)]
pub struct ReplayCompletion {
    dir: PathBuf,
    calls: Mutex<HashMap<String, usize>>,
}

impl ReplayCompletion {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            calls: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_hash(prompt)))
    }

    /// Stores `response` as the recorded answer to `prompt`.
    pub fn record(&self, prompt: &str, response: &str) -> io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(prompt);
        fs::write(&path, response)?;
        Ok(path)
    }
}

fn read_if_present(path: &Path) -> Result<Option<String>, CompletionError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CompletionError::Unavailable(format!("reading {}: {e}", path.display()))),
    }
}

impl Completion for ReplayCompletion {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let hash = prompt_hash(prompt);
        let call = {
            let mut calls = self.calls.lock();
            let n = calls.entry(hash.clone()).or_insert(0);
            *n += 1;
            *n
        };
        if let Some(text) = read_if_present(&self.dir.join(format!("{hash}.{call}.txt")))? {
            return Ok(text);
        }
        read_if_present(&self.path_for(prompt))?
            .ok_or_else(|| CompletionError::Unavailable(format!("no recorded response for prompt {hash} (call {call})")))
    }

    /// Call order decides which sequenced file answers, so callers should
    /// not race.
    fn supports_concurrency(&self) -> bool {
        false
    }
}

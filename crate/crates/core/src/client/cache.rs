//! Content-addressed, append-only log of raw model calls.
//!
//! The log file holds one JSON record per line and is the single source of
//! truth for everything a survey has asked any model. Replaying a run with
//! the same log replays the stored records byte-identically.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClientError, DecodingParams, Result};

/// One raw model interaction, exactly as cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub cache_key: String,
    pub model: String,
    pub prompt: String,
    pub params: DecodingParams,
    /// Assistant message text, when the endpoint returned one.
    pub content: Option<String>,
    /// First-token top-k (token, logprob) pairs, empty when not requested.
    pub top_logprobs: Vec<(String, f64)>,
    /// Unix seconds at the time of the original network call.
    pub timestamp: u64,
}

/// Content address of a call: SHA-256 over the model name, decoding
/// parameters, and the full prompt.
pub fn cache_key(model: &str, prompt: &str, params: &DecodingParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"v1\x1f");
    hasher.update(model.as_bytes());
    hasher.update(b"\x1f");
    hasher.update(format!("{}|{}|{}", params.temperature, params.max_tokens, params.top_logprobs));
    hasher.update(b"\x1f");
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

struct LogState {
    index: HashMap<String, usize>,
    records: Vec<CallRecord>,
    file: std::fs::File,
}

/// Append-only persistent store of [`CallRecord`]s, indexed by cache key.
pub struct RecordLog {
    path: PathBuf,
    state: Mutex<LogState>,
}

impl RecordLog {
    /// Open (or create) the log at `path` and build the in-memory index.
    ///
    /// A truncated final line without a newline — the footprint of an
    /// interrupted write — is dropped silently; the call it belonged to
    /// will simply be made again. Corruption anywhere else is an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let io_err = |source| ClientError::CacheIo { path: path.display().to_string(), source };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(io_err)?;
            }
        }
        let existing = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(e)),
        };
        let mut index = HashMap::new();
        let mut records = Vec::new();
        let complete_lines = existing.ends_with('\n');
        let lines: Vec<&str> = existing.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CallRecord>(line) {
                Ok(record) => {
                    index.insert(record.cache_key.clone(), records.len());
                    records.push(record);
                }
                Err(e) if i + 1 == lines.len() && !complete_lines => {
                    // Torn final line from an interrupted append; ignore it.
                    let _ = e;
                }
                Err(e) => {
                    return Err(ClientError::CacheCorrupt {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        Ok(RecordLog { path, state: Mutex::new(LogState { index, records, file }) })
    }

    pub fn path(&self) -> &std::path::Path {
        &self.path
    }

    pub fn get(&self, cache_key: &str) -> Option<CallRecord> {
        let state = self.state.lock().expect("record log lock");
        state.index.get(cache_key).map(|&i| state.records[i].clone())
    }

    pub fn contains(&self, cache_key: &str) -> bool {
        self.state.lock().expect("record log lock").index.contains_key(cache_key)
    }

    /// Append a record unless its key is already present (idempotent).
    pub fn append(&self, record: &CallRecord) -> Result<()> {
        let mut state = self.state.lock().expect("record log lock");
        if state.index.contains_key(&record.cache_key) {
            return Ok(());
        }
        let mut line = serde_json::to_string(record).expect("call record serializes");
        line.push('\n');
        state
            .file
            .write_all(line.as_bytes())
            .and_then(|()| state.file.flush())
            .map_err(|source| ClientError::CacheIo { path: self.path.display().to_string(), source })?;
        let at = state.records.len();
        state.index.insert(record.cache_key.clone(), at);
        state.records.push(record.clone());
        Ok(())
    }

    /// All records in append order.
    pub fn records(&self) -> Vec<CallRecord> {
        self.state.lock().expect("record log lock").records.clone()
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("record log lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(key_text: &str) -> CallRecord {
        let params = DecodingParams::multiple_choice();
        CallRecord {
            cache_key: cache_key("m", key_text, &params),
            model: "m".into(),
            prompt: key_text.into(),
            params,
            content: None,
            top_logprobs: vec![("A".into(), -0.1)],
            timestamp: 1_700_000_000,
        }
    }

    #[test]
    fn keys_are_deterministic_and_distinct() {
        let params = DecodingParams::multiple_choice();
        assert_eq!(cache_key("m", "p", &params), cache_key("m", "p", &params));
        assert_ne!(cache_key("m", "p", &params), cache_key("m2", "p", &params));
        assert_ne!(cache_key("m", "p", &params), cache_key("m", "p2", &params));
        assert_ne!(
            cache_key("m", "p", &params),
            cache_key("m", "p", &DecodingParams::open_ended())
        );
        assert_eq!(cache_key("m", "p", &params).len(), 64);
    }

    #[test]
    fn appends_persist_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let log = RecordLog::open(&path).unwrap();
        let r = record("hello");
        log.append(&r).unwrap();
        log.append(&r).unwrap(); // idempotent
        assert_eq!(log.len(), 1);
        drop(log);
        let reloaded = RecordLog::open(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded.get(&r.cache_key), Some(r));
    }

    #[test]
    fn torn_final_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let log = RecordLog::open(&path).unwrap();
        log.append(&record("one")).unwrap();
        drop(log);
        let mut file = OpenOptions::new().append(true).open(&path).unwrap();
        file.write_all(b"{\"cache_key\": \"trunca").unwrap();
        drop(file);
        let reloaded = RecordLog::open(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
    }

    #[test]
    fn interior_corruption_is_an_error_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let log = RecordLog::open(&path).unwrap();
        log.append(&record("one")).unwrap();
        drop(log);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.insert_str(0, "not json\n");
        std::fs::write(&path, text).unwrap();
        let Err(err) = RecordLog::open(&path) else { panic!("expected corrupt-log error") };
        match err {
            ClientError::CacheCorrupt { line, .. } => assert_eq!(line, 1),
            other => panic!("expected CacheCorrupt, got {other}"),
        }
    }
}

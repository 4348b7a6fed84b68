//! Persistent response cache: one append-only JSON-lines file per backend id
//! plus an in-memory index.
//!
//! A record that fails to parse, or whose checksum or digest no longer
//! matches, is dropped with a warning and fetched again on next use.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use conner_core::Endpoint;
use log::warn;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::protocol::canonical_json;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub backend_id: String,
    pub endpoint: Endpoint,
    /// SHA-256 of the canonical request.
    pub request_digest: [u8; 32],
}

impl CacheKey {
    pub fn new(backend_id: &str, endpoint: Endpoint, request: &Value) -> Self {
        let digest = Sha256::digest(canonical_json(request).as_bytes());
        CacheKey {
            backend_id: backend_id.to_string(),
            endpoint,
            request_digest: digest.into(),
        }
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.request_digest)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    backend_id: String,
    endpoint: Endpoint,
    digest: String,
    request: Value,
    response: Value,
    check: String,
}

fn checksum(response: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(response).as_bytes()))
}

fn file_name(backend_id: &str) -> String {
    let safe: String = backend_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    index: RwLock<HashMap<CacheKey, Value>>,
    files: Mutex<HashMap<String, File>>,
    invalidated: AtomicU64,
}

impl ResponseCache {
    /// A cache that lives only as long as the process.
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    /// Opens (creating if needed) a cache directory and indexes every record in it.
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let cache = ResponseCache {
            dir: Some(dir.clone()),
            ..Default::default()
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for p in paths {
            cache.load_file(&p)?;
        }
        Ok(cache)
    }

    fn load_file(&self, path: &Path) -> std::io::Result<()> {
        let reader = BufReader::new(File::open(path)?);
        let mut index = self.index.write().expect("cache index poisoned");
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    warn!("{}:{}: unreadable cache record dropped: {e}", path.display(), n + 1);
                    self.invalidated.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
            };
            let key = CacheKey::new(&record.backend_id, record.endpoint, &record.request);
            if key.digest_hex() != record.digest || checksum(&record.response) != record.check {
                warn!("{}:{}: corrupt cache record dropped", path.display(), n + 1);
                self.invalidated.fetch_add(1, Ordering::Relaxed);
                index.remove(&key);
                continue;
            }
            index.insert(key, record.response);
        }
        Ok(())
    }

    pub fn get(&self, key: &CacheKey) -> Option<Value> {
        self.index.read().expect("cache index poisoned").get(key).cloned()
    }

    pub fn put(&self, key: CacheKey, request: &Value, response: Value) -> std::io::Result<()> {
        if let Some(dir) = &self.dir {
            let record = Record {
                backend_id: key.backend_id.clone(),
                endpoint: key.endpoint,
                digest: key.digest_hex(),
                request: request.clone(),
                check: checksum(&response),
                response: response.clone(),
            };
            let mut line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
            line.push('\n');
            let mut files = self.files.lock().expect("cache writer poisoned");
            let file = match files.entry(key.backend_id.clone()) {
                std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
                std::collections::hash_map::Entry::Vacant(v) => v.insert(
                    OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(dir.join(file_name(&key.backend_id)))?,
                ),
            };
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.index.write().expect("cache index poisoned").insert(key, response);
        Ok(())
    }

    /// Drops an entry from the index (the file keeps it until overwritten by a newer record).
    pub fn invalidate(&self, key: &CacheKey) {
        self.invalidated.fetch_add(1, Ordering::Relaxed);
        self.index.write().expect("cache index poisoned").remove(key);
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn invalidated(&self) -> u64 {
        self.invalidated.load(Ordering::Relaxed)
    }

    /// Looks `request` up under `key` and decodes it; a stored value that no
    /// longer decodes is invalidated.
    pub fn lookup<Resp: DeserializeOwned>(&self, key: &CacheKey) -> Option<Resp> {
        let value = self.get(key)?;
        match serde_json::from_value(value) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("cache entry {} for {} does not decode, refetching: {e}", key.digest_hex(), key.backend_id);
                self.invalidate(key);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_includes_backend_and_endpoint() {
        let r = json!({"premise": "a", "hypothesis": "b"});
        assert_ne!(CacheKey::new("x", Endpoint::Nli, &r), CacheKey::new("y", Endpoint::Nli, &r));
        assert_ne!(CacheKey::new("x", Endpoint::Nli, &r), CacheKey::new("x", Endpoint::Rank, &r));
        assert_eq!(
            CacheKey::new("x", Endpoint::Nli, &r),
            CacheKey::new("x", Endpoint::Nli, &json!({"hypothesis": "b ", "premise": " a"}))
        );
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_name("models/nli:v1"), "models_nli_v1.jsonl");
    }
}

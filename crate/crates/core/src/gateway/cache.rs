use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::GatewayError;

/// SHA-256 of the canonical JSON form of `fingerprint`, hex encoded.
pub fn cache_key(fingerprint: &Value) -> String {
    // serde_json maps are sorted by key, so this serialization is canonical
    let canonical = serde_json::to_string(fingerprint).expect("json values always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    fingerprint: Value,
    response: Value,
}

enum Store {
    Memory(HashMap<String, Value>),
    Disk(PathBuf),
}

/// Response cache keyed by request fingerprint. Writes are serialized.
pub struct ResponseCache {
    store: Mutex<Store>,
}

impl ResponseCache {
    pub fn memory() -> Self {
        Self {
            store: Mutex::new(Store::Memory(HashMap::new())),
        }
    }

    /// One JSON file per key under `dir`.
    pub fn disk(dir: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| GatewayError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            store: Mutex::new(Store::Disk(dir)),
        })
    }

    pub fn get<T: DeserializeOwned>(&self, fingerprint: &Value) -> Result<Option<T>, GatewayError> {
        let key = cache_key(fingerprint);
        let store = self.store.lock().expect("cache lock poisoned");
        let raw = match &*store {
            Store::Memory(map) => map.get(&key).cloned(),
            Store::Disk(dir) => {
                let path = dir.join(format!("{key}.json"));
                match fs::read_to_string(&path) {
                    Ok(text) => {
                        let entry: Entry = serde_json::from_str(&text)
                            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
                        Some(entry.response)
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                    Err(e) => return Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
                }
            }
        };
        raw.map(|v| serde_json::from_value(v).map_err(|e| GatewayError::Cache(e.to_string())))
            .transpose()
    }

    /// Stores `response` unless the key is already present; first write wins.
    pub fn put<T: Serialize>(&self, fingerprint: &Value, response: &T) -> Result<(), GatewayError> {
        let key = cache_key(fingerprint);
        let response = serde_json::to_value(response).map_err(|e| GatewayError::Cache(e.to_string()))?;
        let mut store = self.store.lock().expect("cache lock poisoned");
        match &mut *store {
            Store::Memory(map) => {
                map.entry(key).or_insert(response);
            }
            Store::Disk(dir) => {
                let path = dir.join(format!("{key}.json"));
                if path.exists() {
                    return Ok(());
                }
                let entry = Entry {
                    key: key.clone(),
                    fingerprint: fingerprint.clone(),
                    response,
                };
                let tmp = dir.join(format!(".{key}.tmp"));
                let body = serde_json::to_string_pretty(&entry).map_err(|e| GatewayError::Cache(e.to_string()))?;
                fs::write(&tmp, body)
                    .and_then(|_| fs::rename(&tmp, &path))
                    .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(())
    }
}

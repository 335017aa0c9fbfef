//! Prompt-keyed response cache so remote-backend runs replay offline.

use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Directory of cached responses keyed by a digest of (model, payload).
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
        })
    }

    pub fn key(model: &str, payload: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model.as_bytes());
        hasher.update(b"\n");
        hasher.update(payload.as_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        std::fs::read_to_string(self.path_for(key)).ok()
    }

    pub fn put(&self, key: &str, value: &str) -> io::Result<()> {
        let tmp = self.dir.join(format!("{key}.tmp"));
        std::fs::write(&tmp, value)?;
        std::fs::rename(tmp, self.path_for(key))
    }

    /// Number of cached entries.
    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().map(|x| x == "txt").unwrap_or(false))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = ResponseCache::key("model-a", "prompt text");
        assert!(cache.get(&key).is_none());
        cache.put(&key, "{\"label\": \"HOUSING\"}").unwrap();
        assert_eq!(cache.get(&key).unwrap(), "{\"label\": \"HOUSING\"}");
        assert_eq!(cache.len(), 1);

        // Different model, same payload: different key.
        let other = ResponseCache::key("model-b", "prompt text");
        assert_ne!(key, other);
    }
}

//! Content-addressed on-disk store of raw judge replies.
//!
//! Entries live at `<dir>/<key[..2]>/<key>.json`. Writes go through a temporary
//! file and a rename, so readers never observe a partial entry; writers of the
//! same key are serialized by a striped lock.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::JudgeTask;

const STRIPES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedReply {
    pub key: String,
    pub task: JudgeTask,
    pub feedback_id: String,
    pub reply: String,
    /// The reply came after a reprompt for valid JSON.
    pub reprompted: bool,
}

pub struct ReplyCache {
    dir: PathBuf,
    locks: Vec<Mutex<()>>,
}

impl ReplyCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            locks: (0..STRIPES).map(|_| Mutex::new(())).collect(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn stripe(&self, key: &str) -> &Mutex<()> {
        let idx = u8::from_str_radix(&key[..2], 16).unwrap_or(0) as usize % STRIPES;
        &self.locks[idx]
    }

    pub fn get(&self, key: &str) -> std::io::Result<Option<CachedReply>> {
        match fs::read(self.path(key)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, entry: &CachedReply) -> std::io::Result<()> {
        let _guard = self.stripe(&entry.key).lock().unwrap();
        let path = self.path(&entry.key);
        fs::create_dir_all(path.parent().unwrap())?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(entry)?)?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)
    }
}

/// Hex SHA-256 over length-prefixed parts, so `("ab", "c")` and `("a", "bc")` differ.
pub fn content_key<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplyCache::open(dir.path()).unwrap();
        let key = content_key(["a", "b"]);
        assert_eq!(cache.get(&key).unwrap(), None);
        let entry = CachedReply {
            key: key.clone(),
            task: JudgeTask::Pedagogy,
            feedback_id: "f".into(),
            reply: "{}".into(),
            reprompted: false,
        };
        cache.put(&entry).unwrap();
        assert_eq!(cache.get(&key).unwrap(), Some(entry));
    }

    #[test]
    fn keys_are_length_prefixed() {
        assert_ne!(content_key(["ab", "c"]), content_key(["a", "bc"]));
        assert_eq!(content_key(["x"]).len(), 64);
    }

    #[test]
    fn concurrent_writers_leave_a_valid_entry() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplyCache::open(dir.path()).unwrap();
        let key = content_key(["same"]);
        std::thread::scope(|s| {
            for i in 0..8 {
                let cache = &cache;
                let key = key.clone();
                s.spawn(move || {
                    cache
                        .put(&CachedReply {
                            key,
                            task: JudgeTask::Engagement,
                            feedback_id: "f".into(),
                            reply: format!("reply {i}"),
                            reprompted: false,
                        })
                        .unwrap();
                });
            }
        });
        assert!(cache.get(&key).unwrap().unwrap().reply.starts_with("reply "));
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crops::CropRect;

/// Everything that determines a caption response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    /// SHA-256 of the original image file.
    pub image_sha256: String,
    /// `None` for the uncropped image.
    pub rect: Option<CropRect>,
    pub prompt: String,
    pub model: String,
}

impl CacheKey {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("cache key serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: CacheKey,
    text: String,
}

/// On-disk response cache: `<dir>/<2 hex>/<64 hex>.json`.
#[derive(Debug)]
pub struct CaptionCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl CaptionCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(&digest[..2]).join(format!("{digest}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        let raw = fs::read(self.path(&key.digest())).ok()?;
        let entry: Entry = serde_json::from_slice(&raw).ok()?;
        // Guard against digest collisions and stale layouts.
        (entry.key == *key).then_some(entry.text)
    }

    pub fn put(&self, key: &CacheKey, text: &str) -> std::io::Result<()> {
        let digest = key.digest();
        let path = self.path(&digest);
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer(
                &mut f,
                &Entry {
                    key: key.clone(),
                    text: text.to_owned(),
                },
            )?;
            f.flush()?;
        }
        fs::rename(tmp, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(prompt: &str) -> CacheKey {
        CacheKey {
            image_sha256: "ab".repeat(32),
            rect: Some(CropRect::new(0, 0, 4, 4)),
            prompt: prompt.into(),
            model: "m".into(),
        }
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CaptionCache::open(dir.path()).unwrap();
        assert_eq!(cache.get(&key("p")), None);
        cache.put(&key("p"), "a cat").unwrap();
        assert_eq!(cache.get(&key("p")).as_deref(), Some("a cat"));
        assert_eq!(cache.get(&key("q")), None);
        let reopened = CaptionCache::open(dir.path()).unwrap();
        assert_eq!(reopened.get(&key("p")).as_deref(), Some("a cat"));
    }

    #[test]
    fn rect_is_part_of_key() {
        let mut other = key("p");
        other.rect = None;
        assert_ne!(key("p").digest(), other.digest());
    }
}

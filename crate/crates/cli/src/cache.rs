//! Content-addressed artifact directories.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

const DONE_MARKER: &str = ".done";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

/// Hash of a stage name, its parameters (as JSON) and upstream keys.
pub fn stage_key<P: Serialize>(stage: &str, params: &P, inputs: &[&str]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(params)?);
    for i in inputs {
        h.update([0]);
        h.update(i.as_bytes());
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
    enabled: bool,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>, enabled: bool) -> Self {
        Self {
            root: root.into(),
            enabled,
        }
    }

    pub fn dir(&self, stage: &str, key: &str) -> PathBuf {
        self.root.join(format!("{stage}-{}", &key[..16]))
    }

    pub fn is_complete(&self, dir: &Path) -> bool {
        self.enabled && dir.join(DONE_MARKER).is_file()
    }

    /// Clears a stale directory so a stage can write into it.
    pub fn begin(&self, dir: &Path) -> Result<()> {
        if dir.exists() {
            fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
    }

    pub fn finish(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(DONE_MARKER), b"").with_context(|| format!("marking {}", dir.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_every_part() {
        let a = stage_key("ppmi", &(2, 300), &["abc"]).unwrap();
        assert_eq!(a, stage_key("ppmi", &(2, 300), &["abc"]).unwrap());
        assert_ne!(a, stage_key("ppmi", &(2, 301), &["abc"]).unwrap());
        assert_ne!(a, stage_key("ppmi", &(2, 300), &["abd"]).unwrap());
        assert_ne!(a, stage_key("svd", &(2, 300), &["abc"]).unwrap());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn completion_marker() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = Cache::new(tmp.path(), true);
        let dir = cache.dir("x", &"0".repeat(64));
        cache.begin(&dir).unwrap();
        assert!(!cache.is_complete(&dir));
        cache.finish(&dir).unwrap();
        assert!(cache.is_complete(&dir));
        assert!(!Cache::new(tmp.path(), false).is_complete(&dir));
        let f = tmp.path().join("f");
        fs::write(&f, b"abc").unwrap();
        assert_eq!(
            hash_file(&f).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use breakscan_common::sha256_hex;

/// Content-addressed evidence directory: `<sha256>.<ext>`.
#[derive(Debug, Clone)]
pub struct EvidenceStore {
    root: PathBuf,
}

impl EvidenceStore {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stores `bytes` once and returns their hash.
    pub fn put(&self, bytes: &[u8], ext: &str) -> std::io::Result<String> {
        let hash = sha256_hex(bytes);
        let path = self.path_of(&hash, ext);
        if !path.exists() {
            let tmp = self.root.join(format!(".{hash}.{ext}.tmp"));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(hash)
    }

    pub fn put_png(&self, bytes: &[u8]) -> std::io::Result<String> {
        self.put(bytes, "png")
    }

    pub fn path_of(&self, hash: &str, ext: &str) -> PathBuf {
        self.root.join(format!("{hash}.{ext}"))
    }

    pub fn contains(&self, hash: &str, ext: &str) -> bool {
        self.path_of(hash, ext).exists()
    }
}

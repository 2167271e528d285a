use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use breakscan_common::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub key: String,
    pub url: String,
    pub status: u16,
    /// Response headers minus hop-by-hop fields, in arrival order.
    pub headers: Vec<(String, String)>,
    pub body_hash: String,
    /// Unix milliseconds.
    pub first_seen: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub recorded_at: u64,
    pub seed_site: String,
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
    /// Set when the main document could not be recorded.
    #[serde(default)]
    pub unreachable: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Index {
    meta: ArchiveMeta,
    entries: Vec<ArchiveEntry>,
}

/// `<dir>/index.json` plus `<dir>/bodies/<sha256>`.
#[derive(Debug, Clone)]
pub struct ReplayArchive {
    dir: PathBuf,
    pub meta: ArchiveMeta,
    entries: BTreeMap<String, ArchiveEntry>,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl ReplayArchive {
    /// Opens the archive in `dir`, or starts an empty one there.
    pub fn create(dir: &Path, seed_site: &str) -> Result<Self> {
        if dir.join("index.json").is_file() {
            return Self::open(dir);
        }
        fs::create_dir_all(dir.join("bodies"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta: ArchiveMeta {
                recorded_at: now_ms(),
                seed_site: seed_site.to_string(),
                ..ArchiveMeta::default()
            },
            entries: BTreeMap::new(),
        })
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let index: Index = serde_json::from_slice(&fs::read(dir.join("index.json"))?)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta: index.meta,
            entries: index.entries.into_iter().map(|e| (e.key.clone(), e)).collect(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&ArchiveEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ArchiveEntry> {
        self.entries.values()
    }

    /// Adds an entry unless the key is already present; existing entries
    /// and stored bodies are never rewritten.
    pub fn insert(&mut self, key: &str, url: &str, status: u16, headers: Vec<(String, String)>, body: &[u8]) -> Result<bool> {
        if self.entries.contains_key(key) {
            return Ok(false);
        }
        let body_hash = sha256_hex(body);
        let path = self.body_path(&body_hash);
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, body)?;
            fs::rename(&tmp, &path)?;
        }
        self.entries.insert(
            key.to_string(),
            ArchiveEntry {
                key: key.to_string(),
                url: url.to_string(),
                status,
                headers,
                body_hash,
                first_seen: now_ms(),
            },
        );
        Ok(true)
    }

    /// Drops an entry from the index; its body file stays in place.
    pub fn remove(&mut self, key: &str) -> Option<ArchiveEntry> {
        self.entries.remove(key)
    }

    pub fn body(&self, entry: &ArchiveEntry) -> Result<Vec<u8>> {
        Ok(fs::read(self.body_path(&entry.body_hash))?)
    }

    pub fn body_count(&self) -> Result<usize> {
        Ok(fs::read_dir(self.dir.join("bodies"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_none())
            .count())
    }

    pub fn save(&self) -> Result<()> {
        let index = Index {
            meta: self.meta.clone(),
            entries: self.entries.values().cloned().collect(),
        };
        let tmp = self.dir.join("index.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&index)?)?;
        fs::rename(&tmp, self.dir.join("index.json"))?;
        Ok(())
    }

    fn body_path(&self, hash: &str) -> PathBuf {
        self.dir.join("bodies").join(hash)
    }
}

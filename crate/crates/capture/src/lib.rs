//! Resource logs of single visits and the missing-resource pipeline: keep
//! what every control run loaded, subtract what treatment runs loaded, drop
//! non-200 and filter-listed resources, then confirm the rest by refetching.

mod har;
mod pipeline;

use breakscan_common::{canonical_key, canonicalize_url, mime_for_path, sha256_hex, UrlError, VolatileParams};
use serde::{Deserialize, Serialize};

pub use har::{read_log, to_har, write_log};
pub use pipeline::{
    confirm_candidate, missing_candidates, stable_set, CandidateVerdict, MissingResourceCandidate, ResourceProbe,
    StableSet,
};

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("need at least 2 control runs, got {0}")]
    InsufficientRuns(usize),
    #[error("log mixes phases or sites: {0}")]
    MixedLogs(String),
    #[error(transparent)]
    Url(#[from] UrlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CaptureError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Image,
    Video,
    Script,
    Stylesheet,
    Document,
    Other,
}

impl ResourceKind {
    /// From the MIME type, falling back to the URL extension when the MIME
    /// type is missing or generic.
    pub fn classify(mime: &str, url: &str) -> Self {
        let essence = mime.split(';').next().unwrap_or_default().trim().to_ascii_lowercase();
        match Self::from_mime(&essence) {
            Some(k) => k,
            None => {
                let path = url.split(['?', '#']).next().unwrap_or_default();
                let path = path.split_once("://").map(|(_, rest)| rest).unwrap_or(path);
                let path = path.find('/').map(|i| &path[i..]).unwrap_or("/");
                Self::from_mime(mime_for_path(path)).unwrap_or(Self::Other)
            }
        }
    }

    fn from_mime(essence: &str) -> Option<Self> {
        let essence = essence.split(';').next().unwrap_or_default().trim();
        Some(match essence {
            m if m.starts_with("image/") => Self::Image,
            m if m.starts_with("video/") || m.starts_with("audio/") => Self::Video,
            "application/vnd.apple.mpegurl" | "application/x-mpegurl" | "application/dash+xml" => Self::Video,
            "application/javascript" | "text/javascript" | "application/x-javascript" | "application/ecmascript" => {
                Self::Script
            }
            "text/css" => Self::Stylesheet,
            "text/html" | "application/xhtml+xml" => Self::Document,
            "" | "application/octet-stream" | "binary/octet-stream" => return None,
            _ => Self::Other,
        })
    }

    /// Filter-engine request type for this resource.
    pub fn request_type(self) -> breakscan_filters::ResourceType {
        use breakscan_filters::ResourceType as R;
        match self {
            Self::Image => R::Image,
            Self::Video => R::Media,
            Self::Script => R::Script,
            Self::Stylesheet => R::Stylesheet,
            Self::Document => R::Subdocument,
            Self::Other => R::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Image => "image",
            Self::Video => "video",
            Self::Script => "script",
            Self::Stylesheet => "stylesheet",
            Self::Document => "document",
            Self::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub url: String,
    pub canonical_key: String,
    pub status: u16,
    pub mime: String,
    pub resource_type: ResourceKind,
    pub body_hash: String,
    pub size_bytes: u64,
}

impl ResourceRecord {
    pub fn new(
        method: &str,
        url: &str,
        status: u16,
        mime: &str,
        body: &[u8],
        volatile: &VolatileParams,
    ) -> Result<Self> {
        let url = canonicalize_url(url)?;
        Ok(Self {
            canonical_key: canonical_key(method, &url, volatile)?,
            resource_type: ResourceKind::classify(mime, &url),
            url,
            status,
            mime: mime.to_string(),
            body_hash: sha256_hex(body),
            size_bytes: body.len() as u64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Control,
    Treatment,
    Confirm,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Control => "control",
            Self::Treatment => "treatment",
            Self::Confirm => "confirm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLog {
    pub site: String,
    pub phase: Phase,
    pub run_index: u32,
    pub records: Vec<ResourceRecord>,
}

impl ResourceLog {
    pub fn new(site: impl Into<String>, phase: Phase, run_index: u32) -> Self {
        Self {
            site: site.into(),
            phase,
            run_index,
            records: Vec::new(),
        }
    }

    /// `(key, status, body_hash)` triples, sorted; equal for two visits that
    /// saw the same responses regardless of arrival order.
    pub fn multiset(&self) -> Vec<(String, u16, String)> {
        let mut v: Vec<_> = self
            .records
            .iter()
            .map(|r| (r.canonical_key.clone(), r.status, r.body_hash.clone()))
            .collect();
        v.sort();
        v
    }

    pub fn keys(&self) -> std::collections::BTreeSet<&str> {
        self.records.iter().map(|r| r.canonical_key.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(ResourceKind::classify("image/png", "http://a/x"), ResourceKind::Image);
        assert_eq!(ResourceKind::classify("text/javascript; charset=utf-8", "http://a/x"), ResourceKind::Script);
        assert_eq!(ResourceKind::classify("", "http://a/live/index.m3u8?x=1"), ResourceKind::Video);
        assert_eq!(ResourceKind::classify("application/octet-stream", "http://a/v.mpd"), ResourceKind::Video);
        assert_eq!(ResourceKind::classify("application/octet-stream", "http://a/logo.png"), ResourceKind::Image);
        assert_eq!(ResourceKind::classify("", "http://a/"), ResourceKind::Other);
        assert_eq!(ResourceKind::classify("application/json", "http://a/x.png"), ResourceKind::Other);
        assert_eq!(ResourceKind::classify("video/mp4", "http://a/clip"), ResourceKind::Video);
    }

    #[test]
    fn record_keys_strip_volatile_params() {
        let v = VolatileParams::default();
        let a = ResourceRecord::new("GET", "http://A.com/p.js?x=1&cb=9", 200, "", b"b", &v).unwrap();
        let b = ResourceRecord::new("GET", "http://a.com/p.js?x=1&cb=3", 200, "", b"b", &v).unwrap();
        assert_eq!(a.canonical_key, b.canonical_key);
        assert_eq!(a.resource_type, ResourceKind::Script);
        assert_eq!(a.size_bytes, 1);
        assert!(ResourceRecord::new("GET", "ftp://a.com/", 200, "", b"", &v).is_err());
    }
}

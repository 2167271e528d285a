use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolStatus {
    Included,
    ExcludedCdn,
    ExcludedUnreachable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub rank: u64,
    pub domain: String,
    pub status: PoolStatus,
    /// Final landing status seen by the reachability probe.
    #[serde(default)]
    pub landing_status: Option<u16>,
    #[serde(default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePool {
    pub entries: Vec<PoolEntry>,
}

impl SitePool {
    pub fn included(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.iter().filter(|e| e.status == PoolStatus::Included)
    }

    pub fn count(&self, status: PoolStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let bytes = std::fs::read(path).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))
    }
}

/// `rank,domain` lines. Blank lines and `#` comments are skipped; a header
/// line whose rank is not a number is allowed only as the first line.
pub fn parse_toplist(text: &str) -> Result<Vec<(u64, String)>, OrchestratorError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| OrchestratorError::Toplist { line: i + 1, msg: msg.to_string() };
        let (rank, domain) = line.split_once(',').ok_or_else(|| err("expected rank,domain"))?;
        let domain = domain.trim().trim_end_matches('.').to_ascii_lowercase();
        let rank: u64 = match rank.trim().parse() {
            Ok(r) => r,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(err(&format!("rank {:?} is not a number", rank.trim()))),
        };
        if domain.is_empty() || domain.contains(['/', ' ', ',']) {
            return Err(err(&format!("bad domain {domain:?}")));
        }
        out.push((rank, domain));
    }
    Ok(out)
}

/// Domains of content-delivery networks: listed registrable suffixes plus
/// any domain containing a keyword.
#[derive(Debug, Clone, Default)]
pub struct CdnRules {
    suffixes: Vec<String>,
    keywords: Vec<String>,
}

impl CdnRules {
    pub fn new<S: AsRef<str>>(suffixes: impl IntoIterator<Item = S>, keywords: impl IntoIterator<Item = S>) -> Self {
        let norm = |s: S| s.as_ref().trim().trim_start_matches('.').to_ascii_lowercase();
        Self {
            suffixes: suffixes.into_iter().map(norm).filter(|s| !s.is_empty() && !s.starts_with('#')).collect(),
            keywords: keywords.into_iter().map(norm).filter(|s| !s.is_empty()).collect(),
        }
    }

    /// One suffix per line, `#` comments; the keyword "cdn" is always on.
    pub fn from_list(text: &str) -> Self {
        Self::new(text.lines().map(str::to_string), ["cdn".to_string()])
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::from_list(&text))
    }

    pub fn matches(&self, domain: &str) -> Option<String> {
        let d = domain.to_ascii_lowercase();
        if let Some(s) = self.suffixes.iter().find(|s| d == **s || d.ends_with(&format!(".{s}"))) {
            return Some(format!("cdn suffix {s}"));
        }
        self.keywords.iter().find(|k| d.contains(k.as_str())).map(|k| format!("cdn keyword {k}"))
    }
}

pub trait ReachabilityProbe: Sync {
    /// Final status of the landing page after redirects.
    fn probe(&self, domain: &str) -> Result<u16, String>;
}

/// GET of the landing page, redirects followed, 10 s timeout.
pub struct HttpProbe {
    client: reqwest::blocking::Client,
    scheme: String,
}

impl HttpProbe {
    pub const TIMEOUT: Duration = Duration::from_secs(10);

    /// `resolve_all` sends every host to one address, as for a local corpus
    /// server that dispatches on the Host header.
    pub fn new(scheme: &str, resolve_all: Option<SocketAddr>, hosts: &[&str]) -> Result<Self, OrchestratorError> {
        let mut b = reqwest::blocking::Client::builder()
            .no_proxy()
            .timeout(Self::TIMEOUT)
            .redirect(reqwest::redirect::Policy::limited(10));
        if let Some(addr) = resolve_all {
            for h in hosts {
                b = b.resolve(h, addr);
            }
        }
        Ok(Self {
            client: b.build().map_err(|e| OrchestratorError::Config(e.to_string()))?,
            scheme: scheme.to_string(),
        })
    }
}

impl ReachabilityProbe for HttpProbe {
    fn probe(&self, domain: &str) -> Result<u16, String> {
        self.client
            .get(format!("{}://{domain}/", self.scheme))
            .send()
            .map(|r| r.status().as_u16())
            .map_err(|e| e.to_string())
    }
}

/// Ranks `[1, head_n]` plus `tail_range` (inclusive), first occurrence of
/// each rank and domain kept, in rank order. CDN domains are excluded before
/// probing; without a probe every remaining candidate is included.
pub fn curate_pool(
    toplist: &str,
    head_n: u64,
    tail_range: Option<[u64; 2]>,
    cdn: &CdnRules,
    probe: Option<&dyn ReachabilityProbe>,
) -> Result<SitePool, OrchestratorError> {
    let mut rows = parse_toplist(toplist)?;
    rows.sort_by_key(|(r, _)| *r);
    let in_range = |r: u64| (1..=head_n).contains(&r) || tail_range.is_some_and(|[a, b]| (a..=b).contains(&r));
    let mut seen_rank = HashSet::new();
    let mut seen_domain = HashSet::new();
    let mut entries = Vec::new();
    for (rank, domain) in rows {
        if !in_range(rank) || !seen_rank.insert(rank) || !seen_domain.insert(domain.clone()) {
            continue;
        }
        let mut e = PoolEntry {
            rank,
            domain,
            status: PoolStatus::Included,
            landing_status: None,
            reason: None,
        };
        if let Some(why) = cdn.matches(&e.domain) {
            e.status = PoolStatus::ExcludedCdn;
            e.reason = Some(why);
        } else if let Some(p) = probe {
            match p.probe(&e.domain) {
                Ok(200) => e.landing_status = Some(200),
                Ok(s) => {
                    e.status = PoolStatus::ExcludedUnreachable;
                    e.landing_status = Some(s);
                    e.reason = Some(format!("landing status {s}"));
                }
                Err(why) => {
                    e.status = PoolStatus::ExcludedUnreachable;
                    e.reason = Some(why);
                }
            }
        }
        entries.push(e);
    }
    Ok(SitePool { entries })
}

//! EasyList-syntax filter lists.
//!
//! Supports network filters built from the `||` domain anchor, `|` start and
//! end anchors, the `^` separator, the `*` wildcard and `$` options
//! (seven resource types, party, `domain=`, `match-case`). Cosmetic filters,
//! regex rules and other options parse to a classified rule that never
//! matches anything.

mod compile;
mod list;
mod matcher;
mod options;
mod rule;

pub use compile::{CompileStats, CompiledFilterSet, Decision, MatchVerdict};
pub use list::{parse_hosts_line, parse_list, ListFormat};
pub use options::{Party, ResourceType, RuleOptions};
pub use rule::{parse_line, FilterRule, Pattern, PatternToken, RuleKind};

use breakscan_common::{canonicalize_url, host_of, UrlError};

#[derive(Debug, thiserror::Error)]
pub enum FilterError {
    #[error("invalid request url: {0}")]
    Url(#[from] UrlError),
    #[error("reading filter list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One request as seen by the blocker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestContext {
    url: String,
    host: String,
    origin_host: String,
    resource_type: ResourceType,
}

impl RequestContext {
    pub fn new(url: &str, origin_host: &str, resource_type: ResourceType) -> Result<Self, FilterError> {
        let url = canonicalize_url(url)?;
        let host = host_of(&url)?;
        Ok(Self {
            url,
            host,
            origin_host: origin_host.trim().trim_end_matches('.').to_ascii_lowercase(),
            resource_type,
        })
    }

    /// Canonical form of the request URL (the text patterns are matched against).
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn origin_host(&self) -> &str {
        &self.origin_host
    }

    pub fn resource_type(&self) -> ResourceType {
        self.resource_type
    }

    pub fn is_third_party(&self) -> bool {
        !breakscan_common::is_same_site(&self.host, &self.origin_host)
    }
}

/// Reads and parses a list file from disk.
pub fn load_list(path: &std::path::Path, format: ListFormat) -> Result<Vec<FilterRule>, FilterError> {
    let text = std::fs::read_to_string(path).map_err(|source| FilterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_list(&text, format))
}

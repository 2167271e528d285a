//! Uniform browser-control surface.
//!
//! [`BrowserSession`] is implemented twice: [`webdriver::WebDriverSession`]
//! drives a real browser over the WebDriver wire protocol, and
//! [`fixture::FixtureSession`] replays scripted page behavior over a local
//! corpus so every detector can be exercised deterministically.

pub mod dom;
pub mod evidence;
pub mod fixture;
pub mod locate;
pub mod render;
pub mod snapshot;
pub mod webdriver;

use std::sync::Arc;

use breakscan_filters::CompiledFilterSet;
use serde::{Deserialize, Serialize};

pub use evidence::EvidenceStore;
pub use snapshot::{diff_snapshots, DomChange, DomSnapshot, DEFAULT_SNAPSHOT_DEPTH};

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("session error: {0}")]
    Session(String),
    #[error("stale target {0}")]
    StaleTarget(String),
    #[error("no page loaded")]
    NoPage,
    #[error("webdriver protocol error: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid fixture manifest: {0}")]
    Manifest(String),
}

pub type Result<T, E = BridgeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverMode {
    Live,
    Fixture,
}

/// A simulated blocker: filter-driven request denial plus behavior toggles.
#[derive(Debug, Clone)]
pub struct BlockerConfig {
    pub id: String,
    pub filters: Arc<CompiledFilterSet>,
    pub block_network: bool,
    /// Also fail requests a page marks as bait, whether or not a filter
    /// matches them (behavior-based blockers).
    pub inject_bait_failure: bool,
}

impl BlockerConfig {
    pub fn new(id: impl Into<String>, filters: CompiledFilterSet) -> Self {
        Self {
            id: id.into(),
            filters: Arc::new(filters),
            block_network: true,
            inject_bait_failure: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub mode: DriverMode,
    /// `None` in control phases.
    pub blocker: Option<BlockerConfig>,
    /// `host:port` of the capture/replay proxy.
    pub proxy_endpoint: Option<String>,
    pub page_load_timeout_ms: u64,
    pub headless_display: bool,
    /// Wait after load before the page is inspected.
    pub settle_ms: u64,
    pub scroll_dwell_ms: u64,
    pub scroll_step_cap: usize,
}

impl SessionConfig {
    pub fn new(mode: DriverMode) -> Self {
        Self {
            mode,
            blocker: None,
            proxy_endpoint: None,
            page_load_timeout_ms: 30_000,
            headless_display: true,
            settle_ms: 5_000,
            scroll_dwell_ms: 500,
            scroll_step_cap: 30,
        }
    }

    pub fn with_blocker(mut self, blocker: Option<BlockerConfig>) -> Self {
        self.blocker = blocker;
        self
    }

    pub fn with_proxy(mut self, endpoint: impl Into<String>) -> Self {
        self.proxy_endpoint = Some(endpoint.into());
        self
    }

    pub fn with_timeout(mut self, ms: u64) -> Self {
        self.page_load_timeout_ms = ms;
        self
    }

    pub fn is_control(&self) -> bool {
        self.blocker.is_none()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.page_load_timeout_ms == 0 {
            return Err(BridgeError::Session("page_load_timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavResult {
    Loaded,
    Timeout,
    ConnectionError,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigationOutcome {
    pub final_url: String,
    pub http_status: Option<u16>,
    pub load_time_ms: u64,
    pub result: NavResult,
}

impl NavigationOutcome {
    pub fn loaded(&self) -> bool {
        self.result == NavResult::Loaded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementCategory {
    Button,
    Link,
    Login,
    Dropdown,
    Input,
}

impl ElementCategory {
    pub const ALL: [ElementCategory; 5] = [
        ElementCategory::Button,
        ElementCategory::Link,
        ElementCategory::Login,
        ElementCategory::Dropdown,
        ElementCategory::Input,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Button => "button",
            Self::Link => "link",
            Self::Login => "login",
            Self::Dropdown => "dropdown",
            Self::Input => "input",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionTarget {
    pub category: ElementCategory,
    pub xpath: String,
    pub display_text: String,
    /// Same xpath resolved on two consecutive fresh sessions.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSource {
    /// Frame indices from the top document; empty for the top document.
    pub frame_path: Vec<usize>,
    pub url: String,
    pub source_text: String,
    /// False when the frame's markup could not be read.
    pub accessible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionOutcome {
    Clicked,
    Stale,
    Intercepted,
    NavigatedAway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub level: String,
    pub text: String,
    pub timestamp: u64,
}

/// One browser session. Single-owner: a session is driven by exactly one
/// worker and may be moved between threads but never shared.
pub trait BrowserSession: Send {
    fn navigate(&mut self, url: &str, timeout_ms: u64) -> NavigationOutcome;
    fn current_url(&self) -> Option<String>;
    fn enumerate_frames(&mut self) -> Result<Vec<FrameSource>>;
    /// Same-site anchor targets, absolute, deduplicated, longest first.
    fn collect_anchors(&mut self) -> Result<Vec<String>>;
    fn locate_elements(&mut self, category: ElementCategory) -> Result<Vec<InteractionTarget>>;
    fn snapshot_subtree(&mut self, target: &InteractionTarget, depth: usize) -> Result<DomSnapshot>;
    fn interact(&mut self, target: &InteractionTarget) -> Result<InteractionOutcome>;
    fn console_log(&mut self) -> Result<Vec<LogEntry>>;
    /// PNG bytes of the viewport, or of one element's box.
    fn screenshot(&mut self, region: Option<&InteractionTarget>) -> Result<Vec<u8>>;
    fn scroll_to_bottom(&mut self) -> Result<usize>;
    fn close(self: Box<Self>) -> Result<()>;
}

/// Opens sessions. One site visit gets one fresh session.
pub trait SessionFactory: Send + Sync {
    fn open_session(&self, cfg: &SessionConfig) -> Result<Box<dyn BrowserSession>>;
}

/// Sorts same-site anchor URLs by descending length (ties lexicographic)
/// and removes duplicates.
pub fn order_anchors(mut urls: Vec<String>) -> Vec<String> {
    urls.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    urls.dedup();
    urls
}

/// Resolves anchor hrefs against `page_url`, keeping only http(s) targets on
/// the page's registrable domain.
pub fn same_site_anchors<'a, I>(page_url: &str, hrefs: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let Ok(base) = url::Url::parse(page_url) else { return Vec::new() };
    let Some(site) = base.host_str().map(breakscan_common::registrable_domain) else {
        return Vec::new();
    };
    let urls = hrefs
        .into_iter()
        .filter(|h| !h.trim().is_empty())
        .filter_map(|h| base.join(h.trim()).ok())
        .filter(|u| matches!(u.scheme(), "http" | "https"))
        .filter(|u| u.host_str().map(breakscan_common::registrable_domain).as_deref() == Some(site.as_str()))
        .map(|mut u| {
            u.set_fragment(None);
            u.to_string()
        })
        .collect();
    order_anchors(urls)
}

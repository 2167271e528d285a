//! Deterministic fixture driver.
//!
//! Pages are plain HTML; their dynamic behavior comes from a [`DriverManifest`]
//! (`driver.json`) that says what each page does on load and on activation.
//! Timing uses a virtual clock: every fetch costs a fixed number of
//! milliseconds, so load times and timeouts do not depend on the host.

mod fetch;
pub mod script;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use breakscan_filters::{RequestContext, ResourceType};
use url::Url;

pub use fetch::{landing_path, safe_join, CorpusSource, RawFetch};
pub use script::{Action, ActivateRule, Condition, DriverManifest, LoadRule, PageScript};

use crate::dom::{Dom, NodeId, Selector};
use crate::locate::{default_navigation, is_text_entry, locate};
use crate::render::{render_png, REGION, VIEWPORT};
use crate::snapshot::DomSnapshot;
use crate::{
    same_site_anchors, BridgeError, BrowserSession, DriverMode, ElementCategory, FrameSource, InteractionOutcome,
    InteractionTarget, LogEntry, NavResult, NavigationOutcome, Result, SessionConfig, SessionFactory,
};

const DOCUMENT_COST_MS: u64 = 10;
const RESOURCE_COST_MS: u64 = 5;
const MAX_FRAME_DEPTH: usize = 5;
const MAX_SCRIPTED_NAVIGATIONS: usize = 5;

/// Corpus plus the state that outlives a session: per-page visit counters,
/// which stand in for server-side behavior that varies between visits.
#[derive(Debug)]
pub struct FixtureWorld {
    manifest: DriverManifest,
    source: CorpusSource,
    visits: Mutex<HashMap<String, u64>>,
}

impl FixtureWorld {
    pub fn new(manifest: DriverManifest, source: CorpusSource) -> Self {
        Self {
            manifest,
            source,
            visits: Mutex::new(HashMap::new()),
        }
    }

    /// Serves files from `root`, reading `root/driver.json` when present.
    pub fn from_dir(root: &Path) -> Result<Self> {
        let manifest = load_manifest(root)?;
        Ok(Self::new(manifest, CorpusSource::Directory(root.to_path_buf())))
    }

    pub fn manifest(&self) -> &DriverManifest {
        &self.manifest
    }

    fn next_visit(&self, key: &str) -> u64 {
        let mut v = self.visits.lock().expect("visit counter poisoned");
        let slot = v.entry(key.to_string()).or_insert(0);
        let n = *slot;
        *slot += 1;
        n
    }
}

pub fn load_manifest(root: &Path) -> Result<DriverManifest> {
    let path = root.join("driver.json");
    if !path.exists() {
        return Ok(DriverManifest::default());
    }
    DriverManifest::from_json(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone)]
pub struct FixtureFactory {
    world: Arc<FixtureWorld>,
}

impl FixtureFactory {
    pub fn new(world: Arc<FixtureWorld>) -> Self {
        Self { world }
    }

    pub fn world(&self) -> &Arc<FixtureWorld> {
        &self.world
    }

    pub fn open(&self, cfg: &SessionConfig) -> Result<FixtureSession> {
        cfg.validate()?;
        if cfg.mode != DriverMode::Fixture {
            return Err(BridgeError::Session("fixture factory needs mode=fixture".into()));
        }
        let client = match self.world.source {
            CorpusSource::Network => Some(fetch::http_client(cfg.proxy_endpoint.as_deref())?),
            CorpusSource::Directory(_) => None,
        };
        Ok(FixtureSession {
            world: Arc::clone(&self.world),
            cfg: cfg.clone(),
            client,
            page: None,
            log: Vec::new(),
            clock: 0,
        })
    }
}

impl SessionFactory for FixtureFactory {
    fn open_session(&self, cfg: &SessionConfig) -> Result<Box<dyn BrowserSession>> {
        Ok(Box::new(self.open(cfg)?))
    }
}

#[derive(Debug, Clone)]
struct Frame {
    path: Vec<usize>,
    url: String,
    dom: Option<Dom>,
}

#[derive(Debug, Clone)]
struct Page {
    url: Url,
    script: PageScript,
    visit: u64,
    frames: Vec<Frame>,
    loaded: BTreeSet<String>,
    lazy: Vec<NodeId>,
    height: usize,
    scroll_pos: usize,
}

impl Page {
    fn top(&self) -> &Dom {
        self.frames[0].dom.as_ref().expect("top frame always has a document")
    }

    fn top_mut(&mut self) -> &mut Dom {
        self.frames[0].dom.as_mut().expect("top frame always has a document")
    }
}

/// Per-load bookkeeping.
struct Load {
    deadline: u64,
    timeout_ms: u64,
    timed_out: bool,
    crashed: bool,
    navigate_to: Option<String>,
}

impl Load {
    fn halted(&self) -> bool {
        self.timed_out || self.crashed
    }
}

enum SubFetch {
    Loaded { body: Vec<u8>, final_url: Url },
    NotLoaded,
}

pub struct FixtureSession {
    world: Arc<FixtureWorld>,
    cfg: SessionConfig,
    client: Option<reqwest::blocking::Client>,
    page: Option<Page>,
    log: Vec<LogEntry>,
    clock: u64,
}

fn status_text(status: u16) -> &'static str {
    match status {
        200 => "OK",
        403 => "Forbidden",
        404 => "Not Found",
        500 => "Internal Server Error",
        502 => "Bad Gateway",
        503 => "Service Unavailable",
        504 => "Gateway Timeout",
        _ => "",
    }
}

fn eval(cond: &Condition, loaded: &BTreeSet<String>, visit: u64) -> bool {
    match cond {
        Condition::Always => true,
        Condition::Loaded(p) => loaded.contains(p),
        Condition::Missing(p) => !loaded.contains(p),
        Condition::VisitMod { modulus, residues } => *modulus > 0 && residues.contains(&(visit % modulus)),
        Condition::All(cs) => cs.iter().all(|c| eval(c, loaded, visit)),
    }
}

fn same_document(a: &Url, b: &Url) -> bool {
    a.scheme() == b.scheme() && a.host_str() == b.host_str() && a.port() == b.port() && a.path() == b.path()
}

impl FixtureSession {
    fn log_entry(&mut self, level: &str, text: String) {
        self.log.push(LogEntry {
            level: level.to_string(),
            text,
            timestamp: self.clock,
        });
    }

    fn raw_fetch(&self, url: &Url, timeout_ms: u64) -> RawFetch {
        match (&self.world.source, &self.client) {
            (CorpusSource::Directory(root), _) => fetch::fetch_directory(root, &self.world.manifest, url),
            (CorpusSource::Network, Some(client)) => {
                fetch::fetch_network(client, url, Duration::from_millis(timeout_ms.max(1)))
            }
            (CorpusSource::Network, None) => RawFetch::Failed("no http client".into()),
        }
    }

    fn is_blocked(&self, url: &Url, rtype: ResourceType, top_host: &str, script: &PageScript) -> bool {
        let Some(blocker) = &self.cfg.blocker else { return false };
        if blocker.inject_bait_failure && script.bait.iter().any(|b| b == url.path()) {
            return true;
        }
        if !blocker.block_network {
            return false;
        }
        RequestContext::new(url.as_str(), top_host, rtype)
            .map(|ctx| blocker.filters.match_request(&ctx).is_blocked())
            .unwrap_or(false)
    }

    /// Fetches one subresource on behalf of the current page.
    fn fetch_sub(&mut self, page: &mut Page, url: &Url, rtype: ResourceType, load: &mut Load) -> SubFetch {
        self.clock += RESOURCE_COST_MS;
        let top_host = page.url.host_str().unwrap_or_default().to_string();
        if self.is_blocked(url, rtype, &top_host, &page.script) {
            self.log_entry("SEVERE", format!("{url} - Failed to load resource: net::ERR_BLOCKED_BY_CLIENT"));
            return SubFetch::NotLoaded;
        }
        match self.raw_fetch(url, load.timeout_ms) {
            RawFetch::Response { status, body, final_url, .. } => {
                if (200..300).contains(&status) {
                    page.loaded.insert(url.path().to_string());
                    SubFetch::Loaded { body, final_url }
                } else {
                    self.log_entry(
                        "SEVERE",
                        format!(
                            "{url} - Failed to load resource: the server responded with a status of {status} ({})",
                            status_text(status)
                        ),
                    );
                    SubFetch::NotLoaded
                }
            }
            RawFetch::TimedOut => {
                load.timed_out = true;
                SubFetch::NotLoaded
            }
            RawFetch::Failed(reason) => {
                self.log_entry("SEVERE", format!("{url} - Failed to load resource: net::ERR_FAILED ({reason})"));
                SubFetch::NotLoaded
            }
        }
    }

    /// Loads the subresources referenced by `ids` in frame `fi`, appending
    /// child frames for iframes.
    fn load_resources(&mut self, page: &mut Page, fi: usize, ids: &[NodeId], load: &mut Load, depth: usize) {
        for &id in ids {
            if load.halted() {
                return;
            }
            let Some(el) = page.frames[fi].dom.as_ref().and_then(|d| d.element(id)).cloned() else { continue };
            let (attr, rtype) = match el.name.as_str() {
                "script" => ("src", ResourceType::Script),
                "link" if el.attr("rel").is_some_and(|r| r.split_whitespace().any(|t| t.eq_ignore_ascii_case("stylesheet"))) => {
                    ("href", ResourceType::Stylesheet)
                }
                "img" if fi == 0 && el.attr("loading") == Some("lazy") => {
                    page.lazy.push(id);
                    continue;
                }
                "img" => ("src", ResourceType::Image),
                "video" | "audio" | "source" => ("src", ResourceType::Media),
                "iframe" | "frame" => ("src", ResourceType::Subdocument),
                _ => continue,
            };
            let Some(raw) = el.attr(attr).map(str::trim).filter(|s| !s.is_empty()) else { continue };
            let base = Url::parse(&page.frames[fi].url).unwrap_or_else(|_| page.url.clone());
            let Ok(url) = base.join(raw) else { continue };
            if rtype != ResourceType::Subdocument {
                self.fetch_sub(page, &url, rtype, load);
                continue;
            }
            let index = page.frames[fi]
                .dom
                .as_ref()
                .map(|d| {
                    d.elements()
                        .into_iter()
                        .filter(|&e| d.element(e).is_some_and(|x| x.name == "iframe" || x.name == "frame"))
                        .position(|e| e == id)
                        .unwrap_or(0)
                })
                .unwrap_or(0);
            let mut path = page.frames[fi].path.clone();
            path.push(index);
            let (child_dom, frame_url) = match depth < MAX_FRAME_DEPTH {
                true => match self.fetch_sub(page, &url, rtype, load) {
                    SubFetch::Loaded { body, final_url } => {
                        (Some(Dom::parse(&String::from_utf8_lossy(&body))), final_url.to_string())
                    }
                    SubFetch::NotLoaded => (None, url.to_string()),
                },
                false => (None, url.to_string()),
            };
            let has_doc = child_dom.is_some();
            page.frames.push(Frame {
                path,
                url: frame_url,
                dom: child_dom,
            });
            if has_doc {
                let ci = page.frames.len() - 1;
                let child_ids = page.frames[ci].dom.as_ref().map(Dom::elements).unwrap_or_default();
                self.load_resources(page, ci, &child_ids, load, depth + 1);
            }
        }
    }

    fn select_all(page: &Page, selector: &str) -> Vec<NodeId> {
        let Some(sel) = Selector::parse(selector) else { return Vec::new() };
        sel.select(page.top())
    }

    fn run_actions(&mut self, page: &mut Page, actions: &[Action], load: &mut Load) {
        for action in actions {
            if load.halted() {
                return;
            }
            match action {
                Action::AppendHtml { parent, html } => {
                    if let Some(&p) = Self::select_all(page, parent).first() {
                        let new = page.top_mut().append_html(p, html);
                        self.load_resources(page, 0, &new, load, 0);
                    }
                }
                Action::SetAttr { target, name, value } => {
                    for id in Self::select_all(page, target) {
                        page.top_mut().set_attr(id, name, value);
                    }
                }
                Action::RemoveAttr { target, name } => {
                    for id in Self::select_all(page, target) {
                        page.top_mut().remove_attr(id, name);
                    }
                }
                Action::Remove { target } => {
                    for id in Self::select_all(page, target) {
                        page.top_mut().detach(id);
                    }
                }
                Action::Fetch { url } => {
                    if let Ok(u) = page.url.join(url) {
                        self.fetch_sub(page, &u, ResourceType::Xmlhttprequest, load);
                    }
                }
                Action::Log { level, text } => self.log_entry(level, text.clone()),
                Action::DelayMs(ms) => {
                    self.clock += ms;
                    if self.clock > load.deadline {
                        load.timed_out = true;
                    }
                }
                Action::Crash => {
                    load.crashed = true;
                    self.log_entry("SEVERE", "page crash: renderer process gone".to_string());
                }
                Action::Navigate { url } => load.navigate_to = Some(url.clone()),
            }
        }
    }

    fn finish(&self, url: &str, status: Option<u16>, start: u64, load: &Load) -> NavigationOutcome {
        let (result, elapsed) = if load.crashed {
            (NavResult::Crashed, self.clock - start)
        } else if load.timed_out || self.clock > load.deadline {
            (NavResult::Timeout, load.timeout_ms)
        } else {
            (NavResult::Loaded, self.clock - start)
        };
        NavigationOutcome {
            final_url: url.to_string(),
            http_status: status,
            load_time_ms: elapsed.min(load.timeout_ms),
            result,
        }
    }

    fn load_page(&mut self, url: &str, timeout_ms: u64, hops: usize) -> NavigationOutcome {
        self.page = None;
        let start = self.clock;
        let mut load = Load {
            deadline: start + timeout_ms,
            timeout_ms,
            timed_out: false,
            crashed: false,
            navigate_to: None,
        };
        let parsed = match Url::parse(url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") => u,
            _ => {
                self.log_entry("SEVERE", format!("{url} - net::ERR_INVALID_URL"));
                return NavigationOutcome {
                    final_url: url.to_string(),
                    http_status: None,
                    load_time_ms: 0,
                    result: NavResult::ConnectionError,
                };
            }
        };
        self.clock += DOCUMENT_COST_MS;
        let (final_url, status, body) = match self.raw_fetch(&parsed, timeout_ms) {
            RawFetch::Response { final_url, status, body, .. } => (final_url, status, body),
            RawFetch::TimedOut => {
                load.timed_out = true;
                return self.finish(url, None, start, &load);
            }
            RawFetch::Failed(reason) => {
                self.log_entry("SEVERE", format!("{url} - net::ERR_CONNECTION_FAILED ({reason})"));
                return NavigationOutcome {
                    final_url: url.to_string(),
                    http_status: None,
                    load_time_ms: self.clock - start,
                    result: NavResult::ConnectionError,
                };
            }
        };
        if status >= 400 {
            self.log_entry(
                "SEVERE",
                format!(
                    "{final_url} - Failed to load resource: the server responded with a status of {status} ({})",
                    status_text(status)
                ),
            );
        }
        let visit_key = format!("{}{}", final_url.host_str().unwrap_or_default(), final_url.path());
        let visit = self.world.next_visit(&visit_key);
        let script = self.world.manifest.pages.get(final_url.path()).cloned().unwrap_or_default();
        let dom = Dom::parse(&String::from_utf8_lossy(&body));
        let mut page = Page {
            url: final_url.clone(),
            height: script.height_viewports.max(1),
            script,
            visit,
            frames: vec![Frame {
                path: Vec::new(),
                url: final_url.to_string(),
                dom: Some(dom),
            }],
            loaded: BTreeSet::new(),
            lazy: Vec::new(),
            scroll_pos: 0,
        };
        if (200..300).contains(&status) {
            let ids = page.top().elements();
            self.load_resources(&mut page, 0, &ids, &mut load, 0);
            let rules = page.script.on_load.clone();
            for rule in &rules {
                if load.halted() {
                    break;
                }
                if eval(&rule.when, &page.loaded, page.visit) {
                    self.run_actions(&mut page, &rule.actions, &mut load);
                }
            }
        }
        if load.crashed {
            page.frames.truncate(1);
            page.frames[0].dom = Some(Dom::parse(""));
        }
        let outcome = self.finish(final_url.as_str(), Some(status), start, &load);
        self.page = Some(page);
        match load.navigate_to {
            Some(next) if !load.halted() && hops < MAX_SCRIPTED_NAVIGATIONS => {
                let next = final_url.join(&next).map(|u| u.to_string()).unwrap_or(next);
                self.load_page(&next, timeout_ms, hops + 1)
            }
            _ => outcome,
        }
    }

    fn page(&self) -> Result<&Page> {
        self.page.as_ref().ok_or(BridgeError::NoPage)
    }

    fn resolve(&self, target: &InteractionTarget) -> Result<NodeId> {
        let page = self.page()?;
        page.top()
            .resolve_xpath(&target.xpath)
            .ok_or_else(|| BridgeError::StaleTarget(target.xpath.clone()))
    }

    /// The current top document, for tests and evidence.
    pub fn document(&self) -> Option<&Dom> {
        self.page.as_ref().map(Page::top)
    }
}

impl BrowserSession for FixtureSession {
    fn navigate(&mut self, url: &str, timeout_ms: u64) -> NavigationOutcome {
        self.log.clear();
        self.load_page(url, timeout_ms.max(1), 0)
    }

    fn current_url(&self) -> Option<String> {
        self.page.as_ref().map(|p| p.url.to_string())
    }

    fn enumerate_frames(&mut self) -> Result<Vec<FrameSource>> {
        let page = self.page()?;
        let mut frames: Vec<&Frame> = page.frames.iter().collect();
        frames.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(frames
            .into_iter()
            .map(|f| FrameSource {
                frame_path: f.path.clone(),
                url: f.url.clone(),
                source_text: f.dom.as_ref().map(|d| d.to_html(Dom::ROOT)).unwrap_or_default(),
                accessible: f.dom.is_some(),
            })
            .collect())
    }

    fn collect_anchors(&mut self) -> Result<Vec<String>> {
        let page = self.page()?;
        let dom = page.top();
        let hrefs: Vec<&str> = dom
            .elements()
            .into_iter()
            .filter(|&id| dom.element(id).is_some_and(|e| e.name == "a"))
            .filter_map(|id| dom.attr(id, "href"))
            .collect();
        Ok(same_site_anchors(page.url.as_str(), hrefs))
    }

    fn locate_elements(&mut self, category: ElementCategory) -> Result<Vec<InteractionTarget>> {
        let dom = self.page()?.top();
        Ok(locate(dom, category)
            .into_iter()
            .map(|id| InteractionTarget {
                category,
                xpath: dom.xpath_of(id),
                display_text: dom.text_content(id),
                stable: false,
            })
            .collect())
    }

    fn snapshot_subtree(&mut self, target: &InteractionTarget, depth: usize) -> Result<DomSnapshot> {
        let id = self.resolve(target)?;
        Ok(DomSnapshot::capture(self.page()?.top(), id, &target.xpath, depth))
    }

    fn interact(&mut self, target: &InteractionTarget) -> Result<InteractionOutcome> {
        let Ok(id) = self.resolve(target) else {
            return Ok(InteractionOutcome::Stale);
        };
        let mut page = self.page.take().ok_or(BridgeError::NoPage)?;
        if let Some(overlay) = page.script.overlay.as_deref().and_then(Selector::parse) {
            let dom = page.top();
            if overlay.select(dom).iter().any(|&o| !dom.is_hidden(o) && !dom.is_inside(id, o)) {
                self.page = Some(page);
                return Ok(InteractionOutcome::Intercepted);
            }
        }
        let timeout_ms = self.cfg.page_load_timeout_ms;
        let mut load = Load {
            deadline: self.clock + timeout_ms,
            timeout_ms,
            timed_out: false,
            crashed: false,
            navigate_to: None,
        };
        let typing = is_text_entry(page.top(), id);
        let rules: Vec<ActivateRule> = page
            .script
            .on_activate
            .iter()
            .filter(|r| {
                Selector::parse(&r.target).is_some_and(|sel| {
                    let dom = page.top();
                    sel.select(dom).into_iter().any(|t| dom.is_inside(id, t))
                })
            })
            .cloned()
            .collect();
        let mut prevented = false;
        for rule in &rules {
            if eval(&rule.when, &page.loaded, page.visit) {
                prevented |= rule.prevent_default;
                self.run_actions(&mut page, &rule.actions, &mut load);
            }
        }
        let default_nav = if typing || prevented { None } else { default_navigation(page.top(), id) };
        self.clock += self.cfg.settle_ms;
        let before = page.url.clone();
        let crashed = load.crashed;
        self.page = Some(page);
        if crashed {
            return Ok(InteractionOutcome::Clicked);
        }
        let next = load.navigate_to.or(default_nav);
        let Some(next) = next else { return Ok(InteractionOutcome::Clicked) };
        let Ok(next_url) = before.join(&next) else { return Ok(InteractionOutcome::Clicked) };
        self.load_page(next_url.as_str(), timeout_ms, 0);
        match &self.page {
            Some(p) if same_document(&p.url, &before) => Ok(InteractionOutcome::Clicked),
            _ => Ok(InteractionOutcome::NavigatedAway),
        }
    }

    fn console_log(&mut self) -> Result<Vec<LogEntry>> {
        Ok(self.log.clone())
    }

    fn screenshot(&mut self, region: Option<&InteractionTarget>) -> Result<Vec<u8>> {
        match region {
            Some(t) => {
                let id = self.resolve(t)?;
                Ok(render_png(&self.page()?.top().normalized(id), REGION))
            }
            None => {
                let page = self.page()?;
                let seed = format!("{}\n{}", page.scroll_pos, page.top().normalized(Dom::ROOT));
                Ok(render_png(&seed, VIEWPORT))
            }
        }
    }

    fn scroll_to_bottom(&mut self) -> Result<usize> {
        let mut page = self.page.take().ok_or(BridgeError::NoPage)?;
        let cap = self.cfg.scroll_step_cap.max(1);
        let mut load = Load {
            deadline: u64::MAX,
            timeout_ms: self.cfg.page_load_timeout_ms,
            timed_out: false,
            crashed: false,
            navigate_to: None,
        };
        let mut steps = 0;
        while steps < cap {
            steps += 1;
            self.clock += self.cfg.scroll_dwell_ms;
            page.scroll_pos = (page.scroll_pos + 1).min(page.height);
            if page.scroll_pos + 1 < page.height {
                continue;
            }
            let lazy = std::mem::take(&mut page.lazy);
            for id in lazy {
                let Some(src) = page.top().attr(id, "src").map(str::to_string) else { continue };
                if let Ok(u) = page.url.join(&src) {
                    self.fetch_sub(&mut page, &u, ResourceType::Image, &mut load);
                }
                load.timed_out = false;
            }
            if !page.script.infinite_scroll {
                break;
            }
            page.height += 1;
        }
        self.page = Some(page);
        Ok(steps)
    }

    fn close(self: Box<Self>) -> Result<()> {
        Ok(())
    }
}

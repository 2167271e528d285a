use std::path::{Path, PathBuf};
use std::str::FromStr;

use breakscan_detectors::{Category, UnresponsiveThresholds, DEFAULT_KEYWORDS};
use breakscan_filters::{load_list, CompiledFilterSet, ListFormat};
use breakscan_replay::MissPolicy;
use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    #[default]
    Replay,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(Self::Live),
            "replay" => Ok(Self::Replay),
            _ => Err(format!("unknown mode {s:?} (live|replay)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    #[default]
    Fixture,
    Webdriver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListKind {
    #[default]
    Adblock,
    Hosts,
}

impl From<ListKind> for ListFormat {
    fn from(k: ListKind) -> Self {
        match k {
            ListKind::Adblock => ListFormat::Adblock,
            ListKind::Hosts => ListFormat::Hosts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockerSpec {
    pub id: String,
    #[serde(default)]
    pub lists: Vec<PathBuf>,
    #[serde(default)]
    pub format: ListKind,
    #[serde(default = "yes")]
    pub block_network: bool,
    #[serde(default)]
    pub inject_bait_failure: bool,
    /// Packed extension installed in live browser sessions.
    #[serde(default)]
    pub extension_crx: Option<PathBuf>,
}

impl BlockerSpec {
    /// `id=path[,path...]`, or just `path[,path...]` with the id taken from
    /// the first file stem.
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        let (id, paths) = match s.split_once('=') {
            Some((id, rest)) => (Some(id.trim().to_string()), rest),
            None => (None, s),
        };
        let lists: Vec<PathBuf> = paths.split(',').filter(|p| !p.trim().is_empty()).map(|p| PathBuf::from(p.trim())).collect();
        let id = match id {
            Some(id) if !id.is_empty() => id,
            _ => lists
                .first()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| format!("blocker {s:?} names no list"))?,
        };
        Ok(Self {
            id,
            lists,
            format: ListKind::Adblock,
            block_network: true,
            inject_bait_failure: false,
            extension_crx: None,
        })
    }

    pub fn load(&self) -> Result<breakscan_bridge::BlockerConfig, OrchestratorError> {
        let mut rules = Vec::new();
        for path in &self.lists {
            rules.extend(load_list(path, self.format.into()).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?);
        }
        let mut b = breakscan_bridge::BlockerConfig::new(self.id.clone(), CompiledFilterSet::compile(rules));
        b.block_network = self.block_network;
        b.inject_bait_failure = self.inject_bait_failure;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub element_sample: usize,
    pub snapshot_depth: usize,
    pub inner_pages: usize,
    pub resource_control_runs: u32,
    pub resource_treatment_runs: u32,
    pub keywords: Vec<String>,
    /// Bare element rule: no change under treatment is breakage even when
    /// the control interaction changed nothing.
    pub strict_elements: bool,
    pub unresponsive: UnresponsiveThresholds,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            element_sample: 15,
            snapshot_depth: breakscan_bridge::DEFAULT_SNAPSHOT_DEPTH,
            inner_pages: 3,
            resource_control_runs: 2,
            resource_treatment_runs: 2,
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            strict_elements: false,
            unresponsive: UnresponsiveThresholds::default(),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub seed: u64,
    pub mode: Mode,
    pub workers: usize,
    pub out: PathBuf,
    pub categories: Vec<Category>,
    /// Curated pool (output of `pool curate`); takes precedence over
    /// `toplist`.
    pub pool: Option<PathBuf>,
    pub toplist: Option<PathBuf>,
    pub head: u64,
    pub tail_range: Option<[u64; 2]>,
    pub cdn_list: Option<PathBuf>,
    pub archive_dir: Option<PathBuf>,
    pub driver: DriverKind,
    /// Fixture corpus root, served locally as the upstream web.
    pub corpus: Option<PathBuf>,
    pub webdriver: Option<String>,
    pub browser_binary: Option<String>,
    pub scheme: String,
    pub page_load_timeout_ms: u64,
    /// Dwell after each load before frames and elements are read.
    pub settle_ms: u64,
    pub miss_policy: MissPolicy,
    pub blockers: Vec<BlockerSpec>,
    pub protocol: ProtocolConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: Mode::Replay,
            workers: 4,
            out: PathBuf::from("campaign"),
            categories: Category::ALL.to_vec(),
            pool: None,
            toplist: None,
            head: 10_000,
            tail_range: None,
            cdn_list: None,
            archive_dir: None,
            driver: DriverKind::Fixture,
            corpus: None,
            webdriver: None,
            browser_binary: None,
            scheme: "http".into(),
            page_load_timeout_ms: 30_000,
            settle_ms: 5_000,
            miss_policy: MissPolicy::Stall,
            blockers: Vec::new(),
            protocol: ProtocolConfig::default(),
        }
    }
}

impl CampaignConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, OrchestratorError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        for p in [&mut self.pool, &mut self.toplist, &mut self.cdn_list, &mut self.archive_dir, &mut self.corpus]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for b in &mut self.blockers {
            b.lists.iter_mut().for_each(fix);
            if let Some(p) = &mut b.extension_crx {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Config(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.page_load_timeout_ms == 0 {
            return bad("page_load_timeout_ms must be positive");
        }
        if self.mode == Mode::Replay && self.archive_dir.is_none() {
            return bad("replay mode needs archive_dir");
        }
        if self.driver == DriverKind::Webdriver && self.webdriver.is_none() {
            return bad("driver = webdriver needs a webdriver endpoint");
        }
        if self.driver == DriverKind::Fixture && self.corpus.is_none() {
            return bad("driver = fixture needs a corpus directory");
        }
        if self.pool.is_none() && self.toplist.is_none() {
            return bad("need a pool or a toplist");
        }
        if let Some([a, b]) = self.tail_range {
            if a > b {
                return bad("tail_range start exceeds its end");
            }
        }
        let mut ids: Vec<&str> = self.blockers.iter().map(|b| b.id.as_str()).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("blocker ids must be unique");
        }
        if ids.contains(&"control") {
            return bad("blocker id \"control\" is reserved");
        }
        if self.driver == DriverKind::Webdriver {
            if let Some(b) = self.blockers.iter().find(|b| b.extension_crx.is_none()) {
                return Err(OrchestratorError::Config(format!("blocker {:?} needs extension_crx under driver = webdriver", b.id)));
            }
        }
        let p = &self.protocol;
        if p.resource_control_runs < 2 {
            return bad("resource_control_runs must be at least 2");
        }
        if p.unresponsive.runs == 0 || p.unresponsive.treatment_failures > p.unresponsive.runs || p.unresponsive.control_loads > p.unresponsive.runs {
            return bad("unresponsive thresholds exceed the run count");
        }
        Ok(())
    }
}

pub fn parse_category(s: &str) -> Result<Category, String> {
    Category::ALL
        .into_iter()
        .find(|c| c.as_str() == s.trim())
        .ok_or_else(|| format!("unknown category {s:?}"))
}

/// `a-b` or `a..b`, both inclusive.
pub fn parse_range(s: &str) -> Result<[u64; 2], String> {
    let (a, b) = s.split_once("..").or_else(|| s.split_once('-')).ok_or_else(|| format!("range {s:?} is not a-b"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if a > b {
        return Err(format!("range {s:?} is empty"));
    }
    Ok([a, b])
}

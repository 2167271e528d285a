//! Page behavior scripts consumed by the fixture driver (`driver.json`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DriverManifest {
    /// Path prefixes whose requests never complete.
    #[serde(default)]
    pub stall_prefixes: Vec<String>,
    /// Keyed by URL path, e.g. `/dropdown.html`.
    #[serde(default)]
    pub pages: BTreeMap<String, PageScript>,
}

impl DriverManifest {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::BridgeError::Manifest(e.to_string()))
    }

    pub fn is_stall_path(&self, path: &str) -> bool {
        self.stall_prefixes.iter().any(|p| path.starts_with(p.as_str()))
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageScript {
    /// Resource paths the page uses to probe for a blocker.
    #[serde(default)]
    pub bait: Vec<String>,
    #[serde(default)]
    pub on_load: Vec<LoadRule>,
    #[serde(default)]
    pub on_activate: Vec<ActivateRule>,
    /// While an element matching this selector is attached, clicks outside
    /// it are intercepted.
    #[serde(default)]
    pub overlay: Option<String>,
    #[serde(default = "one")]
    pub height_viewports: usize,
    #[serde(default)]
    pub infinite_scroll: bool,
}

impl Default for PageScript {
    fn default() -> Self {
        Self {
            bait: Vec::new(),
            on_load: Vec::new(),
            on_activate: Vec::new(),
            overlay: None,
            height_viewports: 1,
            infinite_scroll: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadRule {
    #[serde(default)]
    pub when: Condition,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivateRule {
    /// Selector of the element whose activation triggers the rule.
    pub target: String,
    #[serde(default)]
    pub when: Condition,
    pub actions: Vec<Action>,
    /// Suppresses the element's default action (link navigation, submit).
    #[serde(default)]
    pub prevent_default: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    #[default]
    Always,
    /// The resource at this path was fetched with a 2xx status.
    Loaded(String),
    Missing(String),
    /// True when the page's visit index modulo `modulus` is in `residues`.
    VisitMod { modulus: u64, residues: Vec<u64> },
    All(Vec<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    AppendHtml { parent: String, html: String },
    SetAttr { target: String, name: String, value: String },
    RemoveAttr { target: String, name: String },
    Remove { target: String },
    Fetch { url: String },
    Log { level: String, text: String },
    DelayMs(u64),
    Crash,
    Navigate { url: String },
}

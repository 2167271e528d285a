//! Detectors for the five breakage categories. Each one is a pure function
//! of artifacts recorded during control and treatment visits.

mod crash;
mod element;
mod prompt;
mod resource;
mod unresponsive;

use breakscan_bridge::{DomChange, NavResult};
use serde::{Deserialize, Serialize};

pub use crash::detect_crash;
pub use element::{detect_element_breakage, element_finding, ElementTrial, ElementVerdict};
pub use prompt::{detect_prompt, DEFAULT_KEYWORDS};
pub use resource::resource_findings;
pub use unresponsive::{detect_unresponsive, PhaseKind, PhaseOutcome, UnresponsiveThresholds};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DetectorError {
    #[error("phase {phase} has {runs} runs, need {need}")]
    IncompleteProtocol { phase: &'static str, runs: usize, need: usize },
    #[error("finding without evidence")]
    NoEvidence,
    #[error("{category} has no subcategory {subcategory:?}")]
    Schema { category: &'static str, subcategory: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ExtensionDetection,
    HtmlElement,
    Resource,
    Crash,
    Unresponsive,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::ExtensionDetection,
        Category::HtmlElement,
        Category::Resource,
        Category::Crash,
        Category::Unresponsive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExtensionDetection => "extension_detection",
            Self::HtmlElement => "html_element",
            Self::Resource => "resource",
            Self::Crash => "crash",
            Self::Unresponsive => "unresponsive",
        }
    }

    pub fn subcategories(self) -> &'static [&'static str] {
        match self {
            Self::ExtensionDetection => &["disable_prompt"],
            Self::HtmlElement => &["button", "link", "login", "dropdown", "input"],
            Self::Resource => &["image", "video"],
            Self::Crash => &["page_crash"],
            Self::Unresponsive => &["unresponsive"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Automatic,
    NeedsReview,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Screenshot { sha256: String },
    FrameExcerpt { frame_path: Vec<usize>, keyword: String, text: String },
    SnapshotDiff { xpath: String, phase: String, changes: Vec<DomChange> },
    LogExcerpt { level: String, text: String },
    ResourceKey { key: String, sha256: String },
    Navigation { phase: String, run: usize, result: NavResult, http_status: Option<u16>, load_time_ms: u64 },
}

/// Who and where a finding is about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FindingContext {
    pub site: String,
    pub page_url: String,
    pub blocker_id: String,
}

impl FindingContext {
    pub fn new(site: impl Into<String>, page_url: impl Into<String>, blocker_id: impl Into<String>) -> Self {
        Self {
            site: site.into(),
            page_url: page_url.into(),
            blocker_id: blocker_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakageFinding {
    pub site: String,
    pub category: Category,
    pub subcategory: String,
    pub page_url: String,
    pub evidence: Vec<Evidence>,
    pub blocker_id: String,
    pub confidence: Confidence,
}

impl BreakageFinding {
    pub fn new(
        ctx: &FindingContext,
        category: Category,
        subcategory: &str,
        evidence: Vec<Evidence>,
        confidence: Confidence,
    ) -> Result<Self, DetectorError> {
        if !category.subcategories().contains(&subcategory) {
            return Err(DetectorError::Schema {
                category: category.as_str(),
                subcategory: subcategory.to_string(),
            });
        }
        if evidence.is_empty() {
            return Err(DetectorError::NoEvidence);
        }
        Ok(Self {
            site: ctx.site.clone(),
            category,
            subcategory: subcategory.to_string(),
            page_url: ctx.page_url.clone(),
            evidence,
            blocker_id: ctx.blocker_id.clone(),
            confidence,
        })
    }
}

/// One JSON object per line, sorted so that equal finding sets serialize to
/// equal bytes.
pub fn to_jsonl(findings: &[BreakageFinding]) -> String {
    let mut lines: Vec<(String, &str, Category, &str, &str, String)> = findings
        .iter()
        .map(|f| {
            let line = serde_json::to_string(f).expect("finding serializes");
            (f.site.clone(), f.blocker_id.as_str(), f.category, f.subcategory.as_str(), f.page_url.as_str(), line)
        })
        .collect();
    lines.sort();
    let mut out = String::new();
    for (.., line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> serde_json::Result<Vec<BreakageFinding>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> FindingContext {
        FindingContext::new("a.test", "http://a.test/", "planted")
    }

    fn log() -> Vec<Evidence> {
        vec![Evidence::LogExcerpt {
            level: "SEVERE".into(),
            text: "x".into(),
        }]
    }

    #[test]
    fn schema_and_evidence_enforced() {
        assert!(BreakageFinding::new(&ctx(), Category::Crash, "page_crash", log(), Confidence::NeedsReview).is_ok());
        assert!(matches!(
            BreakageFinding::new(&ctx(), Category::Crash, "image", log(), Confidence::NeedsReview),
            Err(DetectorError::Schema { .. })
        ));
        assert_eq!(
            BreakageFinding::new(&ctx(), Category::Crash, "page_crash", vec![], Confidence::NeedsReview),
            Err(DetectorError::NoEvidence)
        );
    }

    #[test]
    fn jsonl_is_order_independent() {
        let a = BreakageFinding::new(&ctx(), Category::Crash, "page_crash", log(), Confidence::NeedsReview).unwrap();
        let mut b = a.clone();
        b.site = "b.test".into();
        let text = to_jsonl(&[b.clone(), a.clone()]);
        assert_eq!(text, to_jsonl(&[a.clone(), b.clone()]));
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"site":"a.test","category":"crash""#));
        assert_eq!(from_jsonl(&text).unwrap(), vec![a, b]);
    }
}

use breakscan_bridge::{diff_snapshots, DomSnapshot, InteractionTarget};
use serde::{Deserialize, Serialize};

use crate::{BreakageFinding, Category, Confidence, Evidence, FindingContext};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementTrial {
    pub target: InteractionTarget,
    pub control_pre: Option<DomSnapshot>,
    pub control_post: Option<DomSnapshot>,
    pub treatment_pre: Option<DomSnapshot>,
    pub treatment_post: Option<DomSnapshot>,
    pub treatment_located: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementVerdict {
    BrokenMissing,
    BrokenInert,
    NotBroken,
    /// The element did nothing even without the blocker.
    Uninformative,
}

/// `strict` applies the bare rule (no change under treatment means broken)
/// without requiring the control interaction to have changed anything.
pub fn detect_element_breakage(trial: &ElementTrial, strict: bool) -> ElementVerdict {
    let (Some(cpre), Some(cpost)) = (&trial.control_pre, &trial.control_post) else {
        return ElementVerdict::Uninformative;
    };
    if !trial.treatment_located {
        return ElementVerdict::BrokenMissing;
    }
    if !strict && cpre.serialized == cpost.serialized {
        return ElementVerdict::Uninformative;
    }
    match (&trial.treatment_pre, &trial.treatment_post) {
        (Some(tpre), Some(tpost)) if tpre.serialized == tpost.serialized => ElementVerdict::BrokenInert,
        (Some(_), Some(_)) => ElementVerdict::NotBroken,
        _ => ElementVerdict::Uninformative,
    }
}

/// Finding for a broken verdict, with the control diff (and for inert
/// elements the unchanged treatment snapshot) as evidence.
pub fn element_finding(
    ctx: &FindingContext,
    trial: &ElementTrial,
    verdict: ElementVerdict,
    screenshot: Option<String>,
) -> Option<BreakageFinding> {
    if !matches!(verdict, ElementVerdict::BrokenMissing | ElementVerdict::BrokenInert) {
        return None;
    }
    let mut evidence = Vec::new();
    if let (Some(pre), Some(post)) = (&trial.control_pre, &trial.control_post) {
        evidence.push(Evidence::SnapshotDiff {
            xpath: trial.target.xpath.clone(),
            phase: "control".into(),
            changes: diff_snapshots(pre, post),
        });
    }
    if let (Some(pre), Some(post)) = (&trial.treatment_pre, &trial.treatment_post) {
        evidence.push(Evidence::SnapshotDiff {
            xpath: trial.target.xpath.clone(),
            phase: "treatment".into(),
            changes: diff_snapshots(pre, post),
        });
    }
    if let Some(sha256) = screenshot {
        evidence.push(Evidence::Screenshot { sha256 });
    }
    BreakageFinding::new(ctx, Category::HtmlElement, trial.target.category.as_str(), evidence, Confidence::Automatic).ok()
}

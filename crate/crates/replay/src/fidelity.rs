use std::collections::BTreeSet;

use breakscan_capture::{ResourceKind, ResourceLog};
use breakscan_common::{host_of, is_same_site};
use serde::{Deserialize, Serialize};

use crate::proxy::ReplayStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityCategory {
    NoError,
    SlightlyBroken,
    Broken,
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityThresholds {
    /// Miss ratio over control resources above which a replay is broken.
    pub broken_miss_ratio: f64,
}

impl Default for FidelityThresholds {
    fn default() -> Self {
        Self { broken_miss_ratio: 0.40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityVerdict {
    pub category: FidelityCategory,
    pub evidence: Vec<String>,
}

/// Grades one replay visit against the control visit it should reproduce.
/// Stylesheets and first-party scripts count as critical.
pub fn classify_fidelity(stats: &ReplayStats, control_log: &ResourceLog, t: &FidelityThresholds) -> FidelityVerdict {
    if !stats.main_document_served {
        return FidelityVerdict {
            category: FidelityCategory::Unreachable,
            evidence: vec!["main document not served".into()],
        };
    }
    let missed: BTreeSet<&str> = stats.missed_keys.iter().map(String::as_str).collect();
    let mut control: Vec<_> = control_log.records.iter().collect();
    control.sort_by(|a, b| a.canonical_key.cmp(&b.canonical_key));
    control.dedup_by(|a, b| a.canonical_key == b.canonical_key);
    let lost: Vec<_> = control.iter().filter(|r| missed.contains(r.canonical_key.as_str())).collect();
    let ratio = if control.is_empty() { 0.0 } else { lost.len() as f64 / control.len() as f64 };

    let site = host_of(&control_log.site).unwrap_or_else(|_| control_log.site.clone());
    let mut evidence = Vec::new();
    for r in &lost {
        let critical = match r.resource_type {
            ResourceKind::Stylesheet => true,
            ResourceKind::Script => host_of(&r.url).map(|h| is_same_site(&h, &site)).unwrap_or(false),
            _ => false,
        };
        if critical {
            evidence.push(format!("critical {} missing: {}", r.resource_type.as_str(), r.url));
        }
    }
    let critical = !evidence.is_empty();
    if ratio > t.broken_miss_ratio {
        evidence.push(format!("miss ratio {:.2} > {:.2}", ratio, t.broken_miss_ratio));
    } else if ratio > 0.0 {
        evidence.push(format!("miss ratio {:.2}", ratio));
    }
    let category = if critical || ratio > t.broken_miss_ratio {
        FidelityCategory::Broken
    } else if ratio > 0.0 {
        FidelityCategory::SlightlyBroken
    } else {
        FidelityCategory::NoError
    };
    FidelityVerdict { category, evidence }
}

use breakscan_capture::{CandidateVerdict, MissingResourceCandidate, ResourceKind};

use crate::{BreakageFinding, Category, Confidence, Evidence, FindingContext};

/// One finding per visual kind (image, video) with at least one confirmed
/// static resource. Scripts and excluded candidates never produce findings.
pub fn resource_findings(ctx: &FindingContext, candidates: &[MissingResourceCandidate]) -> Vec<BreakageFinding> {
    let mut out = Vec::new();
    for (kind, sub) in [(ResourceKind::Image, "image"), (ResourceKind::Video, "video")] {
        let mut confirmed: Vec<&MissingResourceCandidate> = candidates
            .iter()
            .filter(|c| c.verdict == CandidateVerdict::ConfirmedStatic && c.record.resource_type == kind)
            .collect();
        confirmed.sort_by(|a, b| a.record.canonical_key.cmp(&b.record.canonical_key));
        let mut evidence = Vec::new();
        for c in confirmed {
            evidence.push(Evidence::ResourceKey {
                key: c.record.canonical_key.clone(),
                sha256: c.record.body_hash.clone(),
            });
            if let Some(sha256) = &c.evidence {
                evidence.push(Evidence::Screenshot { sha256: sha256.clone() });
            }
        }
        if let Ok(f) = BreakageFinding::new(ctx, Category::Resource, sub, evidence, Confidence::Automatic) {
            out.push(f);
        }
    }
    out
}

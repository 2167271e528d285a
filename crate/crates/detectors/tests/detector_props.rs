use breakscan_bridge::{DomSnapshot, ElementCategory, InteractionTarget};
use breakscan_capture::{CandidateVerdict, MissingResourceCandidate, ResourceRecord};
use breakscan_common::VolatileParams;
use breakscan_detectors::{
    detect_element_breakage, resource_findings, to_jsonl, ElementTrial, ElementVerdict, FindingContext,
};
use proptest::prelude::*;

fn snap(s: &str) -> DomSnapshot {
    DomSnapshot {
        target_xpath: "/html/body/button".into(),
        depth: 4,
        serialized: s.into(),
    }
}

fn trial(cpre: &str, cpost: &str, tpre: &str, tpost: &str, located: bool) -> ElementTrial {
    ElementTrial {
        target: InteractionTarget {
            category: ElementCategory::Button,
            xpath: "/html/body/button".into(),
            display_text: "More".into(),
            stable: true,
        },
        control_pre: Some(snap(cpre)),
        control_post: Some(snap(cpost)),
        treatment_pre: Some(snap(tpre)),
        treatment_post: Some(snap(tpost)),
        treatment_located: located,
    }
}

proptest! {
    #[test]
    fn inert_verdict_requires_control_change(
        cpre in "[ab]{0,3}", cpost in "[ab]{0,3}", tpre in "[ab]{0,3}", tpost in "[ab]{0,3}", located: bool
    ) {
        let t = trial(&cpre, &cpost, &tpre, &tpost, located);
        let v = detect_element_breakage(&t, false);
        if v == ElementVerdict::BrokenInert {
            prop_assert_ne!(&cpre, &cpost);
            prop_assert_eq!(&tpre, &tpost);
        }
        prop_assert_eq!(v == ElementVerdict::BrokenMissing, !located);
        prop_assert_eq!(v, detect_element_breakage(&t, false));
    }

    #[test]
    fn resource_findings_only_from_confirmed_visuals(verdicts in prop::collection::vec((0u8..5, 0u8..3), 0..12)) {
        let kinds = ["png", "mp4", "js"];
        let cands: Vec<MissingResourceCandidate> = verdicts
            .iter()
            .enumerate()
            .map(|(i, (v, k))| MissingResourceCandidate {
                record: ResourceRecord::new("GET", &format!("http://a.test/{i}.{}", kinds[*k as usize]), 200, "", b"x", &VolatileParams::default()).unwrap(),
                verdict: [
                    CandidateVerdict::Retained,
                    CandidateVerdict::ConfirmedStatic,
                    CandidateVerdict::DynamicExcluded,
                    CandidateVerdict::FilterExcluded,
                    CandidateVerdict::StatusExcluded,
                ][*v as usize],
                evidence: Some(format!("shot{i}")),
                deferred: *k == 2,
                reason: None,
            })
            .collect();
        let ctx = FindingContext::new("a.test", "http://a.test/", "planted");
        let findings = resource_findings(&ctx, &cands);
        let has = |ext: &str| cands.iter().any(|c| c.verdict == CandidateVerdict::ConfirmedStatic && c.record.url.ends_with(ext));
        prop_assert_eq!(findings.len(), has(".png") as usize + has(".mp4") as usize);
        let mut rev = cands.clone();
        rev.reverse();
        prop_assert_eq!(to_jsonl(&findings), to_jsonl(&resource_findings(&ctx, &rev)));
    }
}

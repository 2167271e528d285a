use std::collections::BTreeMap;

use breakscan_common::sha256_hex;
use breakscan_filters::{CompiledFilterSet, RequestContext};
use serde::{Deserialize, Serialize};

use crate::{CaptureError, Phase, ResourceKind, ResourceLog, ResourceRecord, Result};

/// Keys present in every control run, with the record from the first run and
/// whether every run saw status 200.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableSet {
    entries: BTreeMap<String, (ResourceRecord, bool)>,
}

impl StableSet {
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn record(&self, key: &str) -> Option<&ResourceRecord> {
        self.entries.get(key).map(|(r, _)| r)
    }
}

pub fn stable_set(control_logs: &[ResourceLog]) -> Result<StableSet> {
    if control_logs.len() < 2 {
        return Err(CaptureError::InsufficientRuns(control_logs.len()));
    }
    let first = &control_logs[0];
    if let Some(bad) = control_logs.iter().find(|l| l.phase != Phase::Control || l.site != first.site) {
        return Err(CaptureError::MixedLogs(format!("{} {:?} run {}", bad.site, bad.phase, bad.run_index)));
    }
    let mut entries: BTreeMap<String, (ResourceRecord, bool)> = BTreeMap::new();
    for r in &first.records {
        let ok = r.status == 200;
        entries
            .entry(r.canonical_key.clone())
            .and_modify(|(_, all_ok)| *all_ok &= ok)
            .or_insert((r.clone(), ok));
    }
    for log in &control_logs[1..] {
        let mut seen: BTreeMap<&str, bool> = BTreeMap::new();
        for r in &log.records {
            *seen.entry(r.canonical_key.as_str()).or_insert(true) &= r.status == 200;
        }
        entries.retain(|k, (_, all_ok)| match seen.get(k.as_str()) {
            Some(ok) => {
                *all_ok &= ok;
                true
            }
            None => false,
        });
    }
    Ok(StableSet { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateVerdict {
    /// Passed the exclusions; awaiting confirmation.
    Retained,
    ConfirmedStatic,
    DynamicExcluded,
    FilterExcluded,
    StatusExcluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingResourceCandidate {
    pub record: ResourceRecord,
    pub verdict: CandidateVerdict,
    /// Screenshot hash for confirmed visual resources.
    pub evidence: Option<String>,
    /// Confirmed scripts are kept for later analysis rather than reported.
    #[serde(default)]
    pub deferred: bool,
    #[serde(default)]
    pub reason: Option<String>,
}

impl MissingResourceCandidate {
    fn new(record: ResourceRecord, verdict: CandidateVerdict) -> Self {
        Self {
            record,
            verdict,
            evidence: None,
            deferred: false,
            reason: None,
        }
    }
}

/// Stable keys absent from every treatment run, each classified as
/// status-excluded, filter-excluded or retained. Retained candidates that
/// are not images, videos or scripts are dropped. Output is sorted by key.
pub fn missing_candidates(
    stable: &StableSet,
    treatment_logs: &[ResourceLog],
    filters: &CompiledFilterSet,
    origin: &str,
) -> Vec<MissingResourceCandidate> {
    let mut out = Vec::new();
    for (key, (record, all_ok)) in &stable.entries {
        if treatment_logs.iter().any(|log| log.records.iter().any(|r| &r.canonical_key == key)) {
            continue;
        }
        if !all_ok {
            out.push(MissingResourceCandidate::new(record.clone(), CandidateVerdict::StatusExcluded));
            continue;
        }
        let listed = RequestContext::new(&record.url, origin, record.resource_type.request_type())
            .map(|ctx| filters.match_request(&ctx).is_blocked())
            .unwrap_or(false);
        if listed {
            out.push(MissingResourceCandidate::new(record.clone(), CandidateVerdict::FilterExcluded));
            continue;
        }
        if matches!(record.resource_type, ResourceKind::Image | ResourceKind::Video | ResourceKind::Script) {
            out.push(MissingResourceCandidate::new(record.clone(), CandidateVerdict::Retained));
        }
    }
    out
}

/// Refetches resources during confirmation.
pub trait ResourceProbe {
    /// Status and body of a fresh fetch of `url`.
    fn fetch(&mut self, url: &str) -> std::result::Result<(u16, Vec<u8>), String>;
    /// Renders the resource on its own and returns the stored screenshot's
    /// hash.
    fn screenshot(&mut self, record: &ResourceRecord) -> Option<String>;
}

/// Two fresh fetches; both must return 200 with the control body hash.
pub fn confirm_candidate(c: &MissingResourceCandidate, probe: &mut dyn ResourceProbe) -> MissingResourceCandidate {
    let mut out = c.clone();
    if c.verdict != CandidateVerdict::Retained {
        return out;
    }
    for attempt in 1..=2 {
        match probe.fetch(&c.record.url) {
            Ok((200, body)) if sha256_hex(&body) == c.record.body_hash => {}
            Ok((200, _)) => {
                out.verdict = CandidateVerdict::DynamicExcluded;
                out.reason = Some(format!("confirm fetch {attempt}: body differs from control"));
                return out;
            }
            Ok((status, _)) => {
                out.verdict = CandidateVerdict::DynamicExcluded;
                out.reason = Some(format!("confirm fetch {attempt}: status {status}"));
                return out;
            }
            Err(e) => {
                out.verdict = CandidateVerdict::DynamicExcluded;
                out.reason = Some(format!("confirm fetch {attempt}: {e}"));
                return out;
            }
        }
    }
    out.verdict = CandidateVerdict::ConfirmedStatic;
    match c.record.resource_type {
        ResourceKind::Script => out.deferred = true,
        _ => out.evidence = probe.screenshot(&c.record),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use breakscan_common::VolatileParams;

    fn rec(path: &str, status: u16, body: &str) -> ResourceRecord {
        ResourceRecord::new("GET", &format!("http://site.com{path}"), status, "", body.as_bytes(), &VolatileParams::default())
            .unwrap()
    }

    fn log(phase: Phase, run: u32, recs: Vec<ResourceRecord>) -> ResourceLog {
        ResourceLog {
            site: "site.com".into(),
            phase,
            run_index: run,
            records: recs,
        }
    }

    fn keys(s: &StableSet) -> Vec<String> {
        s.keys().map(|k| k.rsplit('/').next().unwrap().to_string()).collect()
    }

    #[test]
    fn stable_set_is_intersection() {
        let a = log(Phase::Control, 0, vec![rec("/a", 200, ""), rec("/b", 200, ""), rec("/c", 200, "")]);
        let b = log(Phase::Control, 1, vec![rec("/a", 200, ""), rec("/b", 200, ""), rec("/d", 200, "")]);
        assert_eq!(keys(&stable_set(&[a.clone(), b.clone()]).unwrap()), ["a", "b"]);
        assert_eq!(stable_set(&[a.clone(), a.clone()]).unwrap().len(), 3);
        let z = log(Phase::Control, 2, vec![rec("/z", 200, "")]);
        assert!(stable_set(&[a.clone(), z]).unwrap().is_empty());
        assert!(matches!(stable_set(std::slice::from_ref(&a)), Err(CaptureError::InsufficientRuns(1))));
        let t = log(Phase::Treatment, 0, vec![]);
        assert!(matches!(stable_set(&[a, t]), Err(CaptureError::MixedLogs(_))));
    }

    #[test]
    fn candidate_classes() {
        let ctrl = vec![
            rec("/logo.png", 200, "logo"),
            rec("/tracker.js", 200, "t"),
            rec("/old.css", 404, ""),
            rec("/style.css", 200, "s"),
            rec("/kept.png", 200, "k"),
        ];
        let stable = stable_set(&[log(Phase::Control, 0, ctrl.clone()), log(Phase::Control, 1, ctrl)]).unwrap();
        let treatment = vec![log(Phase::Treatment, 0, vec![rec("/kept.png", 200, "k")])];
        let filters = CompiledFilterSet::from_lines(["||site.com/tracker.js"]);
        let got: Vec<(String, CandidateVerdict)> = missing_candidates(&stable, &treatment, &filters, "site.com")
            .into_iter()
            .map(|c| (c.record.url.rsplit('/').next().unwrap().to_string(), c.verdict))
            .collect();
        assert_eq!(
            got,
            vec![
                ("logo.png".into(), CandidateVerdict::Retained),
                ("old.css".into(), CandidateVerdict::StatusExcluded),
                ("tracker.js".into(), CandidateVerdict::FilterExcluded),
            ]
        );
    }

    struct Probe(Vec<std::result::Result<(u16, Vec<u8>), String>>);

    impl ResourceProbe for Probe {
        fn fetch(&mut self, _url: &str) -> std::result::Result<(u16, Vec<u8>), String> {
            self.0.remove(0)
        }
        fn screenshot(&mut self, r: &ResourceRecord) -> Option<String> {
            Some(format!("shot-{}", r.body_hash))
        }
    }

    fn retained(r: ResourceRecord) -> MissingResourceCandidate {
        MissingResourceCandidate::new(r, CandidateVerdict::Retained)
    }

    #[test]
    fn confirmation() {
        let logo = retained(rec("/logo.png", 200, "logo"));
        let ok = confirm_candidate(&logo, &mut Probe(vec![Ok((200, b"logo".to_vec())), Ok((200, b"logo".to_vec()))]));
        assert_eq!(ok.verdict, CandidateVerdict::ConfirmedStatic);
        assert!(ok.evidence.is_some() && !ok.deferred);

        let changed = confirm_candidate(&logo, &mut Probe(vec![Ok((200, b"logo".to_vec())), Ok((200, b"new".to_vec()))]));
        assert_eq!(changed.verdict, CandidateVerdict::DynamicExcluded);
        let gone = confirm_candidate(&logo, &mut Probe(vec![Ok((404, vec![]))]));
        assert_eq!(gone.verdict, CandidateVerdict::DynamicExcluded);
        let down = confirm_candidate(&logo, &mut Probe(vec![Err("connection reset".into())]));
        assert_eq!(down.verdict, CandidateVerdict::DynamicExcluded);
        assert!(down.reason.unwrap().contains("connection reset"));

        let script = retained(rec("/w.js", 200, "w"));
        let s = confirm_candidate(&script, &mut Probe(vec![Ok((200, b"w".to_vec())), Ok((200, b"w".to_vec()))]));
        assert_eq!(s.verdict, CandidateVerdict::ConfirmedStatic);
        assert!(s.deferred && s.evidence.is_none());

        let excluded = MissingResourceCandidate::new(rec("/x.png", 404, ""), CandidateVerdict::StatusExcluded);
        assert_eq!(confirm_candidate(&excluded, &mut Probe(vec![])), excluded);
    }
}

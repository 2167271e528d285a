use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use breakscan_bridge::fixture::{load_manifest, CorpusSource, FixtureFactory, FixtureWorld};
use breakscan_bridge::{DriverMode, SessionConfig};
use breakscan_capture::{Phase, ResourceLog};
use breakscan_common::canonical_key;
use serde::{Deserialize, Serialize};

use crate::archive::ReplayArchive;
use crate::fidelity::{classify_fidelity, FidelityCategory, FidelityThresholds, FidelityVerdict};
use crate::proxy::{MissPolicy, ProxyConfig, ProxyHandle, ProxyMode};
use crate::record::{record_site, scripted_visit};
use crate::serve::CorpusServer;
use crate::{ReplayError, Result};

/// A corpus site whose archive is damaged by deleting `drop` paths before
/// replay, with the category a person assigned to the damaged replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledReplay {
    pub site: String,
    pub drop: Vec<String>,
    pub label: FidelityCategory,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledOutcome {
    pub case: LabeledReplay,
    pub verdict: FidelityVerdict,
}

impl LabeledOutcome {
    pub fn agrees(&self) -> bool {
        self.case.label == self.verdict.category
    }
}

pub fn load_labeled(path: &Path) -> Result<Vec<LabeledReplay>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Records each case from the corpus, removes its dropped paths, replays
/// the same scripted visit with 404 misses and grades the result against
/// the recording visit.
pub fn run_labeled(
    corpus: &Path,
    cases: &[LabeledReplay],
    thresholds: &FidelityThresholds,
    work_dir: &Path,
) -> Result<Vec<LabeledOutcome>> {
    let manifest = load_manifest(corpus).map_err(|e| ReplayError::Upstream(e.to_string()))?;
    let factory = FixtureFactory::new(Arc::new(FixtureWorld::new(manifest, CorpusSource::Network)));
    let session = SessionConfig::new(DriverMode::Fixture).with_timeout(3_000);
    let server = CorpusServer::start(corpus, SocketAddr::from(([127, 0, 0, 1], 0)), &["/stall/"])?;
    let mut out = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let dir = work_dir.join(format!("case-{i}"));
        let proxy = ProxyConfig::new(ProxyMode::Record).with_upstream_override(Some(server.addr()));
        let (mut archive, recorded) = record_site(&factory, &session, proxy.clone(), &dir, &case.site, 3)?;
        let base = url::Url::parse(&case.site).map_err(|e| ReplayError::Upstream(e.to_string()))?;
        for path in &case.drop {
            let url = base.join(path).map_err(|e| ReplayError::Upstream(e.to_string()))?;
            if let Ok(key) = canonical_key("GET", url.as_str(), &proxy.volatile) {
                archive.remove(&key);
            }
        }
        archive.save()?;
        let mut control = ResourceLog::new(case.site.clone(), Phase::Control, 0);
        control.records = recorded.records;

        let handle = ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(MissPolicy::NotFound)), ReplayArchive::open(&dir)?)?;
        let cfg = session.clone().with_proxy(handle.endpoint());
        if let Ok(mut s) = factory.open(&cfg) {
            scripted_visit(&mut s, &case.site, cfg.page_load_timeout_ms, 3);
        }
        let stats = handle.take_visit().stats;
        handle.shutdown()?;
        out.push(LabeledOutcome {
            case: case.clone(),
            verdict: classify_fidelity(&stats, &control, thresholds),
        });
    }
    server.shutdown();
    Ok(out)
}

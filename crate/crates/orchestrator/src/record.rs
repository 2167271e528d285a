use std::net::SocketAddr;
use std::sync::Arc;

use breakscan_bridge::fixture::{load_manifest, CorpusSource, FixtureFactory, FixtureWorld};
use breakscan_bridge::webdriver::WebDriverFactory;
use breakscan_bridge::{DriverMode, SessionConfig, SessionFactory};
use breakscan_replay::{record_site, CorpusServer, ProxyConfig, ProxyMode};
use serde::Serialize;

use crate::campaign::site_dir_name;
use crate::config::{CampaignConfig, DriverKind};
use crate::OrchestratorError;

#[derive(Debug, Clone, Serialize)]
pub struct RecordSummary {
    pub domain: String,
    pub entries: usize,
    pub requests: usize,
    pub unreachable: Option<String>,
}

/// Records one scripted visit per domain into `archive_dir/<domain>`. With
/// the fixture driver the corpus is served locally and stands in for the
/// web.
pub fn record_pool(cfg: &CampaignConfig, domains: &[String]) -> Result<Vec<RecordSummary>, OrchestratorError> {
    let archive_dir = cfg
        .archive_dir
        .as_ref()
        .ok_or_else(|| OrchestratorError::Config("recording needs archive_dir".into()))?;
    let mut server = None;
    let (factory, mode): (Box<dyn SessionFactory>, DriverMode) = match cfg.driver {
        DriverKind::Fixture => {
            let corpus = cfg.corpus.as_ref().ok_or_else(|| OrchestratorError::Config("fixture driver needs corpus".into()))?;
            let manifest = load_manifest(corpus).map_err(|e| OrchestratorError::Config(e.to_string()))?;
            let stalls: Vec<&str> = manifest.stall_prefixes.iter().map(String::as_str).collect();
            server = Some(CorpusServer::start(corpus, SocketAddr::from(([127, 0, 0, 1], 0)), &stalls)?);
            let world = Arc::new(FixtureWorld::new(manifest, CorpusSource::Network));
            (Box::new(FixtureFactory::new(world)), DriverMode::Fixture)
        }
        DriverKind::Webdriver => {
            let endpoint = cfg.webdriver.clone().ok_or_else(|| OrchestratorError::Config("webdriver endpoint missing".into()))?;
            let mut f = WebDriverFactory::new(endpoint);
            if let Some(bin) = &cfg.browser_binary {
                f = f.with_browser_binary(bin.clone());
            }
            (Box::new(f), DriverMode::Live)
        }
    };
    let upstream = server.as_ref().map(CorpusServer::addr);
    let session = SessionConfig::new(mode).with_timeout(cfg.page_load_timeout_ms);
    let mut out = Vec::new();
    for domain in domains {
        let url = format!("{}://{domain}/", cfg.scheme);
        let proxy = ProxyConfig::new(ProxyMode::Record).with_upstream_override(upstream);
        let dir = archive_dir.join(site_dir_name(domain));
        let (archive, capture) = record_site(factory.as_ref(), &session, proxy, &dir, &url, cfg.protocol.inner_pages)?;
        out.push(RecordSummary {
            domain: domain.clone(),
            entries: archive.len(),
            requests: capture.records.len(),
            unreachable: archive.meta.unreachable.clone(),
        });
    }
    if let Some(s) = server {
        s.shutdown();
    }
    Ok(out)
}

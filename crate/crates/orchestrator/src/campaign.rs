use std::any::Any;
use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use breakscan_bridge::fixture::{load_manifest, CorpusSource, FixtureFactory, FixtureWorld};
use breakscan_bridge::webdriver::WebDriverFactory;
use breakscan_bridge::{BlockerConfig, DriverMode, EvidenceStore, SessionConfig, SessionFactory};
use breakscan_common::canonicalize_url;
use breakscan_detectors::{to_jsonl, BreakageFinding};
use breakscan_replay::{CorpusServer, ProxyConfig, ProxyHandle, ProxyMode, ReplayArchive};
use serde::Serialize;

use crate::config::{CampaignConfig, DriverKind, Mode};
use crate::pool::{curate_pool, CdnRules, HttpProbe, PoolStatus, ReachabilityProbe, SitePool};
use crate::protocols::{SiteResult, SiteRun};
use crate::report::{build_report, render_report, CampaignReport, ReportFormat, TestedCounts};
use crate::sample::shuffled;
use crate::OrchestratorError;

/// Runs `f` over `items` on `workers` threads. A panic in one item becomes
/// that item's error. Results come back in input order.
pub fn run_pool<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<Result<R, String>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, String> + Sync,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(items.len().max(1)) {
            let tx = tx.clone();
            let (next, f) = (&next, &f);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = catch_unwind(AssertUnwindSafe(|| f(item))).unwrap_or_else(|p| Err(panic_message(p)));
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut out: Vec<Option<Result<R, String>>> = (0..items.len()).map(|_| None).collect();
    for (i, r) in rx {
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.unwrap_or_else(|| Err("worker exited".into()))).collect()
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    let msg = p
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("panic: {msg}")
}

/// Directory name for a site's artifacts.
pub fn site_dir_name(domain: &str) -> String {
    let name: String = domain
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    if name.chars().all(|c| c == '.') {
        return name.replace('.', "_");
    }
    name
}

/// Replay archives stand in for the reachability probe: a site is
/// reachable when its archive exists, is not marked unreachable, and its
/// recorded landing resolves to a 200.
pub struct ArchiveProbe {
    pub dir: PathBuf,
    pub scheme: String,
}

impl ReachabilityProbe for ArchiveProbe {
    fn probe(&self, domain: &str) -> Result<u16, String> {
        let archive = ReplayArchive::open(&self.dir.join(site_dir_name(domain))).map_err(|e| format!("no archive: {e}"))?;
        if let Some(why) = &archive.meta.unreachable {
            return Err(format!("archive marked unreachable: {why}"));
        }
        let mut url = format!("{}://{domain}/", self.scheme);
        for _ in 0..10 {
            let want = canonicalize_url(&url).map_err(|e| e.to_string())?;
            let entry = archive
                .entries()
                .find(|e| canonicalize_url(&e.url).is_ok_and(|u| u == want))
                .ok_or_else(|| format!("landing {url} not in archive"))?;
            let location = entry.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case("location")).map(|(_, v)| v.clone());
            match (entry.status, location) {
                (300..=399, Some(loc)) => {
                    url = url::Url::parse(&url).and_then(|u| u.join(&loc)).map_err(|e| e.to_string())?.to_string();
                }
                (status, _) => return Ok(status),
            }
        }
        Err("redirect loop in archive".into())
    }
}

/// Shared per-campaign state.
struct Env {
    cfg: CampaignConfig,
    blockers: Vec<BlockerConfig>,
    extensions: Vec<(String, Vec<u8>)>,
    world: Option<Arc<FixtureWorld>>,
    upstream: Option<SocketAddr>,
    store: EvidenceStore,
}

impl Env {
    fn session_mode(&self) -> DriverMode {
        match self.cfg.driver {
            DriverKind::Fixture => DriverMode::Fixture,
            DriverKind::Webdriver => DriverMode::Live,
        }
    }

    fn factory(&self, proxy: &ProxyHandle) -> Box<dyn SessionFactory> {
        match (&self.world, &self.cfg.webdriver) {
            (Some(world), _) => Box::new(FixtureFactory::new(world.clone())),
            (None, endpoint) => {
                let mut f = WebDriverFactory::new(endpoint.clone().unwrap_or_default())
                    .with_capture(proxy.lookup())
                    .with_spki_pin(proxy.spki_pin());
                if let Some(bin) = &self.cfg.browser_binary {
                    f = f.with_browser_binary(bin.clone());
                }
                for (id, crx) in &self.extensions {
                    f = f.with_extension(id.clone(), crx);
                }
                Box::new(f)
            }
        }
    }

    fn start_proxy(&self, domain: &str, site_dir: &Path, site_url: &str) -> Result<ProxyHandle, String> {
        match self.cfg.mode {
            Mode::Replay => {
                let dir = self.cfg.archive_dir.as_ref().expect("validated").join(site_dir_name(domain));
                let archive = ReplayArchive::open(&dir).map_err(|e| format!("archive {}: {e}", dir.display()))?;
                if let Some(why) = &archive.meta.unreachable {
                    return Err(format!("archive marked unreachable: {why}"));
                }
                ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(self.cfg.miss_policy)), archive).map_err(|e| e.to_string())
            }
            Mode::Live => {
                let archive = ReplayArchive::create(&site_dir.join("archive"), site_url).map_err(|e| e.to_string())?;
                let cfg = ProxyConfig::new(ProxyMode::Record).with_upstream_override(self.upstream);
                ProxyHandle::start(cfg, archive).map_err(|e| e.to_string())
            }
        }
    }

    fn run_site(&self, domain: &str) -> Result<SiteResult, String> {
        let url = format!("{}://{domain}/", self.cfg.scheme);
        let dir = self.cfg.out.join(site_dir_name(domain));
        let proxy = self.start_proxy(domain, &dir, &url)?;
        let factory = self.factory(&proxy);
        let mut base = SessionConfig::new(self.session_mode())
            .with_timeout(self.cfg.page_load_timeout_ms)
            .with_proxy(proxy.endpoint());
        base.settle_ms = self.cfg.settle_ms;
        let run = SiteRun {
            site: domain.to_string(),
            url,
            factory: factory.as_ref(),
            base,
            proxy: &proxy,
            blockers: &self.blockers,
            protocol: &self.cfg.protocol,
            seed: self.cfg.seed,
            dir,
            store: &self.store,
            result: SiteResult::default(),
        };
        let result = run.execute(&self.cfg.categories);
        if let Err(e) = proxy.shutdown() {
            tracing::warn!(domain, "proxy shutdown: {e}");
        }
        Ok(result)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SiteSummary {
    pub domain: String,
    pub dir: String,
    pub findings: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub pool: SitePool,
    pub findings: Vec<BreakageFinding>,
    pub tested: TestedCounts,
    pub sites: Vec<SiteSummary>,
    pub failures: BTreeMap<String, String>,
    pub report: CampaignReport,
}

impl CampaignOutcome {
    pub fn findings_jsonl(&self) -> String {
        to_jsonl(&self.findings)
    }
}

fn load_blockers(cfg: &CampaignConfig) -> Result<(Vec<BlockerConfig>, Vec<(String, Vec<u8>)>), OrchestratorError> {
    let mut blockers = Vec::new();
    let mut extensions = Vec::new();
    for spec in &cfg.blockers {
        blockers.push(spec.load()?);
        if let Some(crx) = &spec.extension_crx {
            let bytes = std::fs::read(crx).map_err(|e| OrchestratorError::Config(format!("{}: {e}", crx.display())))?;
            extensions.push((spec.id.clone(), bytes));
        }
    }
    Ok((blockers, extensions))
}

/// The campaign's site pool: the configured pool file, or the toplist
/// curated against archives (replay) or live probes.
pub fn campaign_pool(cfg: &CampaignConfig, upstream: Option<SocketAddr>) -> Result<SitePool, OrchestratorError> {
    if let Some(p) = &cfg.pool {
        return SitePool::load(p);
    }
    let path = cfg.toplist.as_ref().ok_or_else(|| OrchestratorError::Config("need a pool or a toplist".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
    let cdn = match &cfg.cdn_list {
        Some(p) => CdnRules::load(p)?,
        None => CdnRules::from_list(""),
    };
    match cfg.mode {
        Mode::Replay => {
            let probe = ArchiveProbe {
                dir: cfg.archive_dir.clone().expect("validated"),
                scheme: cfg.scheme.clone(),
            };
            curate_pool(&text, cfg.head, cfg.tail_range, &cdn, Some(&probe))
        }
        Mode::Live => {
            let domains: Vec<String> = crate::pool::parse_toplist(&text)?.into_iter().map(|(_, d)| d).collect();
            let hosts: Vec<&str> = domains.iter().map(String::as_str).collect();
            let probe = HttpProbe::new(&cfg.scheme, upstream, &hosts)?;
            curate_pool(&text, cfg.head, cfg.tail_range, &cdn, Some(&probe))
        }
    }
}

/// Curates the pool, runs every category protocol for every included site
/// and blocker, and writes findings, reports and artifacts under `cfg.out`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignOutcome, OrchestratorError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let (blockers, extensions) = load_blockers(cfg)?;
    let mut server = None;
    let mut world = None;
    if cfg.driver == DriverKind::Fixture {
        let corpus = cfg.corpus.as_ref().expect("validated");
        let manifest = load_manifest(corpus).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        if cfg.mode == Mode::Live {
            let stalls: Vec<&str> = manifest.stall_prefixes.iter().map(String::as_str).collect();
            server = Some(CorpusServer::start(corpus, SocketAddr::from(([127, 0, 0, 1], 0)), &stalls)?);
        }
        world = Some(Arc::new(FixtureWorld::new(manifest, CorpusSource::Network)));
    }
    let upstream = server.as_ref().map(CorpusServer::addr);
    let pool = campaign_pool(cfg, upstream)?;
    let env = Env {
        cfg: cfg.clone(),
        blockers,
        extensions,
        world,
        upstream,
        store: EvidenceStore::open(cfg.out.join("evidence"))?,
    };

    let mut domains: Vec<String> = pool.included().map(|e| e.domain.clone()).collect();
    if cfg.categories.is_empty() || env.blockers.is_empty() {
        domains.clear();
    }
    let order = shuffled(&domains, cfg.seed);
    let results = run_pool(&order, cfg.workers, |d| env.run_site(d));
    if let Some(s) = server {
        s.shutdown();
    }

    let mut tested = TestedCounts::new(env.blockers.iter().map(|b| b.id.clone()));
    let mut findings = Vec::new();
    let mut sites = Vec::new();
    let mut failures = BTreeMap::new();
    for (domain, r) in order.iter().zip(results) {
        match r {
            Ok(site) => {
                for (b, c) in &site.tested {
                    tested.add(b, *c, 1);
                }
                sites.push(SiteSummary {
                    domain: domain.clone(),
                    dir: site_dir_name(domain),
                    findings: site.findings.len(),
                    notes: site.notes,
                });
                findings.extend(site.findings);
            }
            Err(e) => {
                failures.insert(domain.clone(), e);
            }
        }
    }
    sites.sort_by(|a, b| a.domain.cmp(&b.domain));
    let report = build_report(&findings, &tested);
    let outcome = CampaignOutcome {
        pool,
        findings,
        tested,
        sites,
        failures,
        report,
    };
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), OrchestratorError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn write_outputs(cfg: &CampaignConfig, o: &CampaignOutcome) -> Result<(), OrchestratorError> {
    let out = &cfg.out;
    std::fs::write(out.join("findings.jsonl"), o.findings_jsonl())?;
    write_json(&out.join("tested.json"), &o.tested)?;
    write_json(&out.join("pool.json"), &o.pool)?;
    write_json(&out.join("failures.json"), &o.failures)?;
    std::fs::write(out.join("report.txt"), render_report(&o.report, ReportFormat::Table))?;
    std::fs::write(out.join("report.csv"), render_report(&o.report, ReportFormat::Csv))?;
    std::fs::write(out.join("report.json"), render_report(&o.report, ReportFormat::Json))?;
    let manifest = serde_json::json!({
        "seed": cfg.seed,
        "mode": cfg.mode,
        "categories": cfg.categories,
        "blockers": cfg.blockers.iter().map(|b| &b.id).collect::<Vec<_>>(),
        "protocol": cfg.protocol,
        "pool": {
            "included": o.pool.count(PoolStatus::Included),
            "excluded_cdn": o.pool.count(PoolStatus::ExcludedCdn),
            "excluded_unreachable": o.pool.count(PoolStatus::ExcludedUnreachable),
        },
        "sites": o.sites,
        "failures": o.failures,
        "files": ["findings.jsonl", "tested.json", "pool.json", "failures.json", "report.txt", "report.csv", "report.json", "evidence/"],
    });
    write_json(&out.join("manifest.json"), &manifest)
}

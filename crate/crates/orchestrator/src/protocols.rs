//! Per-site visit protocols. Control data is gathered once per site and
//! reused by every blocker's treatment.

use std::path::PathBuf;

use breakscan_bridge::render::{render_png, REGION};
use breakscan_bridge::{
    BlockerConfig, BridgeError, BrowserSession, DomSnapshot, ElementCategory, EvidenceStore, InteractionOutcome,
    InteractionTarget, NavResult, NavigationOutcome, SessionConfig, SessionFactory,
};
use breakscan_capture::{
    confirm_candidate, missing_candidates, stable_set, write_log, Phase, ResourceLog, ResourceProbe, ResourceRecord,
};
use breakscan_detectors::{
    detect_crash, detect_element_breakage, detect_prompt, detect_unresponsive, element_finding, resource_findings,
    BreakageFinding, Category, ElementTrial, ElementVerdict, FindingContext, PhaseKind, PhaseOutcome,
};
use breakscan_replay::ProxyHandle;
use serde::Serialize;

use crate::config::ProtocolConfig;
use crate::sample::{sample_targets, select_inner_pages, site_seed};

const CONTROL: &str = "control";

#[derive(Debug, Default, Serialize)]
pub struct SiteResult {
    pub site: String,
    pub findings: Vec<BreakageFinding>,
    /// (blocker, category) pairs whose protocol completed.
    pub tested: Vec<(String, Category)>,
    pub notes: Vec<String>,
}

pub struct SiteRun<'a> {
    pub site: String,
    pub url: String,
    pub factory: &'a dyn SessionFactory,
    /// Session settings with the proxy set and no blocker.
    pub base: SessionConfig,
    pub proxy: &'a ProxyHandle,
    pub blockers: &'a [BlockerConfig],
    pub protocol: &'a ProtocolConfig,
    pub seed: u64,
    pub dir: PathBuf,
    pub store: &'a EvidenceStore,
    pub result: SiteResult,
}

fn failed_nav(url: &str) -> NavigationOutcome {
    NavigationOutcome {
        final_url: url.to_string(),
        http_status: None,
        load_time_ms: 0,
        result: NavResult::ConnectionError,
    }
}

fn who(blocker: Option<&BlockerConfig>) -> &str {
    blocker.map_or(CONTROL, |b| b.id.as_str())
}

impl SiteRun<'_> {
    pub fn execute(mut self, categories: &[Category]) -> SiteResult {
        self.result.site = self.site.clone();
        for cat in Category::ALL.into_iter().filter(|c| categories.contains(c)) {
            match cat {
                Category::ExtensionDetection => self.prompt(),
                Category::HtmlElement => self.elements(),
                Category::Resource => self.resources(),
                Category::Crash => self.crash(),
                Category::Unresponsive => self.unresponsive(),
            }
        }
        self.result
    }

    fn note(&mut self, cat: Category, msg: impl std::fmt::Display) {
        self.result.notes.push(format!("{}: {msg}", cat.as_str()));
    }

    fn save(&self, blocker: Option<&BlockerConfig>, cat: Category, name: &str, value: &impl Serialize) {
        let dir = self.dir.join(who(blocker)).join(cat.as_str());
        let res = std::fs::create_dir_all(&dir)
            .and_then(|_| std::fs::write(dir.join(name), serde_json::to_vec_pretty(value).expect("artifact serializes")));
        if let Err(e) = res {
            tracing::warn!(site = %self.site, "writing {name}: {e}");
        }
    }

    fn ctx(&self, blocker: &BlockerConfig, page: &str) -> FindingContext {
        FindingContext::new(&self.site, page, &blocker.id)
    }

    fn timeout(&self) -> u64 {
        self.base.page_load_timeout_ms
    }

    fn open(&self, blocker: Option<&BlockerConfig>) -> Result<Box<dyn BrowserSession>, String> {
        self.factory
            .open_session(&self.base.clone().with_blocker(blocker.cloned()))
            .map_err(|e| format!("{} session: {e}", who(blocker)))
    }

    fn visit(&self, blocker: Option<&BlockerConfig>, url: &str) -> Result<(Box<dyn BrowserSession>, NavigationOutcome), String> {
        let mut s = self.open(blocker)?;
        let nav = s.navigate(url, self.timeout());
        Ok((s, nav))
    }

    fn shot(&self, png: Result<Vec<u8>, BridgeError>) -> Option<String> {
        png.ok().and_then(|b| self.store.put_png(&b).ok())
    }

    /// Landing page plus inner pages, frames compared between control and
    /// each blocker.
    fn prompt(&mut self) {
        let cat = Category::ExtensionDetection;
        let (mut s, nav) = match self.visit(None, &self.url) {
            Ok(v) => v,
            Err(e) => return self.note(cat, e),
        };
        if !nav.loaded() {
            let _ = s.close();
            return self.note(cat, format!("control landing {:?}", nav.result));
        }
        let anchors = s.collect_anchors().unwrap_or_default();
        let pages: Vec<String> = std::iter::once(self.url.clone())
            .chain(select_inner_pages(&anchors, self.protocol.inner_pages))
            .collect();
        let mut control = Vec::new();
        for (i, page) in pages.iter().enumerate() {
            if i > 0 {
                s.navigate(page, self.timeout());
            }
            control.push(s.enumerate_frames().unwrap_or_default());
        }
        let _ = s.close();
        self.save(None, cat, "frames.json", &(&pages, &control));

        for b in self.blockers {
            let mut s = match self.open(Some(b)) {
                Ok(s) => s,
                Err(e) => {
                    self.note(cat, e);
                    continue;
                }
            };
            let mut frames_seen = Vec::new();
            for (i, page) in pages.iter().enumerate() {
                s.navigate(page, self.timeout());
                let frames = s.enumerate_frames().unwrap_or_default();
                let ctx = self.ctx(b, page);
                let store = self.store;
                let mut screenshot = || s.screenshot(None).ok().and_then(|png| store.put_png(&png).ok());
                if let Some(f) = detect_prompt(&ctx, &control[i], &frames, &self.protocol.keywords, &mut screenshot) {
                    self.result.findings.push(f);
                }
                frames_seen.push(frames);
            }
            let _ = s.close();
            self.save(Some(b), cat, "frames.json", &(&pages, &frames_seen));
            self.result.tested.push((b.id.clone(), cat));
        }
    }

    /// One fresh visit: snapshot, interact, snapshot. Returns whether the
    /// target resolved, both snapshots, and the session for follow-up.
    fn interact_once(
        &self,
        blocker: Option<&BlockerConfig>,
        target: &InteractionTarget,
    ) -> (bool, Option<DomSnapshot>, Option<DomSnapshot>, Option<Box<dyn BrowserSession>>) {
        let depth = self.protocol.snapshot_depth;
        let Ok((mut s, nav)) = self.visit(blocker, &self.url) else {
            return (true, None, None, None);
        };
        if !nav.loaded() {
            return (true, None, None, Some(s));
        }
        let pre = match s.snapshot_subtree(target, depth) {
            Ok(p) => p,
            Err(BridgeError::StaleTarget(_)) => return (false, None, None, Some(s)),
            Err(_) => return (true, None, None, Some(s)),
        };
        let post = match s.interact(target) {
            Ok(InteractionOutcome::NavigatedAway) => {
                let url = s.current_url().unwrap_or_default();
                Some(DomSnapshot::navigated(&target.xpath, depth, &url))
            }
            Ok(InteractionOutcome::Clicked | InteractionOutcome::Intercepted) => s.snapshot_subtree(target, depth).ok(),
            Ok(InteractionOutcome::Stale) | Err(_) => None,
        };
        (true, Some(pre), post, Some(s))
    }

    /// Control crawl samples targets per element category; each blocker
    /// then interacts with the same xpaths.
    fn elements(&mut self) {
        let cat = Category::HtmlElement;
        let (mut s, nav) = match self.visit(None, &self.url) {
            Ok(v) => v,
            Err(e) => return self.note(cat, e),
        };
        if !nav.loaded() {
            let _ = s.close();
            return self.note(cat, format!("control landing {:?}", nav.result));
        }
        let mut targets = Vec::new();
        for ec in ElementCategory::ALL {
            let found = s.locate_elements(ec).unwrap_or_default();
            targets.extend(sample_targets(&found, self.protocol.element_sample, site_seed(self.seed, &self.site, ec.as_str())));
        }
        let _ = s.close();

        let mut control = Vec::new();
        for t in &targets {
            let (_, pre, post, s) = self.interact_once(None, t);
            if let Some(s) = s {
                let _ = s.close();
            }
            control.push((pre, post));
        }
        self.save(None, cat, "targets.json", &targets);

        for b in self.blockers {
            let mut trials = Vec::new();
            for (t, (cpre, cpost)) in targets.iter().zip(&control) {
                let (located, tpre, tpost, s) = self.interact_once(Some(b), t);
                let trial = ElementTrial {
                    target: t.clone(),
                    control_pre: cpre.clone(),
                    control_post: cpost.clone(),
                    treatment_pre: tpre,
                    treatment_post: tpost,
                    treatment_located: located,
                };
                let verdict = detect_element_breakage(&trial, self.protocol.strict_elements);
                let mut shot = None;
                if let Some(mut s) = s {
                    if verdict == ElementVerdict::BrokenInert {
                        shot = self.shot(s.screenshot(Some(t)));
                    } else if verdict == ElementVerdict::BrokenMissing {
                        shot = self.shot(s.screenshot(None));
                    }
                    let _ = s.close();
                }
                if let Some(f) = element_finding(&self.ctx(b, &self.url), &trial, verdict, shot) {
                    self.result.findings.push(f);
                }
                trials.push((trial, verdict));
            }
            self.save(Some(b), cat, "trials.json", &trials);
            self.result.tested.push((b.id.clone(), cat));
        }
    }

    /// Scrolled landing visit; returns what the proxy saw during it.
    fn capture_visit(&self, blocker: Option<&BlockerConfig>, phase: Phase, run: u32) -> Result<(ResourceLog, NavigationOutcome), String> {
        self.proxy.take_visit();
        let (mut s, nav) = self.visit(blocker, &self.url)?;
        if nav.loaded() {
            let _ = s.scroll_to_bottom();
        }
        let _ = s.close();
        let mut log = ResourceLog::new(&self.site, phase, run);
        log.records = self.proxy.take_visit().records;
        Ok((log, nav))
    }

    fn capture_runs(&mut self, blocker: Option<&BlockerConfig>, phase: Phase, runs: u32) -> Option<Vec<ResourceLog>> {
        let cat = Category::Resource;
        let mut logs = Vec::new();
        for run in 0..runs {
            match self.capture_visit(blocker, phase, run) {
                Ok((log, nav)) if nav.loaded() => {
                    if let Err(e) = write_log(&self.dir.join(who(blocker)).join(cat.as_str()), &log) {
                        tracing::warn!(site = %self.site, "writing resource log: {e}");
                    }
                    logs.push(log);
                }
                Ok((_, nav)) => {
                    self.note(cat, format!("{} run {run} {:?}", who(blocker), nav.result));
                    return None;
                }
                Err(e) => {
                    self.note(cat, e);
                    return None;
                }
            }
        }
        Some(logs)
    }

    fn resources(&mut self) {
        let cat = Category::Resource;
        let Some(control) = self.capture_runs(None, Phase::Control, self.protocol.resource_control_runs) else { return };
        let stable = match stable_set(&control) {
            Ok(s) => s,
            Err(e) => return self.note(cat, e),
        };
        for b in self.blockers {
            let Some(treatment) = self.capture_runs(Some(b), Phase::Treatment, self.protocol.resource_treatment_runs) else {
                continue;
            };
            let mut probe = match ProxyProbe::new(self.proxy, self.timeout(), self.store) {
                Ok(p) => p,
                Err(e) => {
                    self.note(cat, e);
                    continue;
                }
            };
            self.proxy.take_visit();
            let candidates: Vec<_> = missing_candidates(&stable, &treatment, &b.filters, &self.site)
                .iter()
                .map(|c| confirm_candidate(c, &mut probe))
                .collect();
            self.proxy.take_visit();
            self.save(Some(b), cat, "candidates.json", &candidates);
            let ctx = self.ctx(b, &self.url);
            self.result.findings.extend(resource_findings(&ctx, &candidates));
            self.result.tested.push((b.id.clone(), cat));
        }
    }

    fn crash(&mut self) {
        let cat = Category::Crash;
        let control = match self.visit(None, &self.url) {
            Ok((s, nav)) => {
                let _ = s.close();
                nav
            }
            Err(e) => return self.note(cat, e),
        };
        self.save(None, cat, "navigation.json", &control);
        let Some(control_status) = control.http_status else {
            return self.note(cat, format!("control landing {:?} without status", control.result));
        };
        for b in self.blockers {
            let (mut s, nav) = match self.visit(Some(b), &self.url) {
                Ok(v) => v,
                Err(e) => {
                    self.note(cat, e);
                    continue;
                }
            };
            let logs = s.console_log().unwrap_or_default();
            let _ = s.close();
            self.save(Some(b), cat, "console.json", &(&nav, &logs));
            if let Some(f) = detect_crash(&self.ctx(b, &self.url), &logs, &nav, Some(control_status)) {
                self.result.findings.push(f);
            }
            self.result.tested.push((b.id.clone(), cat));
        }
    }

    fn landing_outcome(&self, blocker: Option<&BlockerConfig>) -> NavigationOutcome {
        match self.visit(blocker, &self.url) {
            Ok((s, nav)) => {
                let _ = s.close();
                nav
            }
            Err(_) => failed_nav(&self.url),
        }
    }

    fn unresponsive(&mut self) {
        let cat = Category::Unresponsive;
        let t = self.protocol.unresponsive;
        for b in self.blockers {
            let phases: Vec<PhaseOutcome> = PhaseKind::ORDER
                .into_iter()
                .map(|phase| {
                    let blocker = (phase == PhaseKind::Treatment).then_some(b);
                    PhaseOutcome {
                        phase,
                        runs: (0..t.runs).map(|_| self.landing_outcome(blocker)).collect(),
                    }
                })
                .collect();
            self.save(Some(b), cat, "runs.json", &phases);
            match detect_unresponsive(&self.ctx(b, &self.url), &phases, &t) {
                Ok(f) => {
                    self.result.findings.extend(f);
                    self.result.tested.push((b.id.clone(), cat));
                }
                Err(e) => self.note(cat, e),
            }
        }
    }
}

/// Confirmation fetches through the site's proxy.
struct ProxyProbe<'a> {
    client: reqwest::blocking::Client,
    store: &'a EvidenceStore,
}

impl<'a> ProxyProbe<'a> {
    fn new(proxy: &ProxyHandle, timeout_ms: u64, store: &'a EvidenceStore) -> Result<Self, String> {
        let ca = reqwest::Certificate::from_pem(proxy.ca_pem().as_bytes()).map_err(|e| e.to_string())?;
        let client = reqwest::blocking::Client::builder()
            .no_proxy()
            .proxy(reqwest::Proxy::all(format!("http://{}", proxy.endpoint())).map_err(|e| e.to_string())?)
            .add_root_certificate(ca)
            .redirect(reqwest::redirect::Policy::none())
            .timeout(std::time::Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client, store })
    }
}

impl ResourceProbe for ProxyProbe<'_> {
    fn fetch(&mut self, url: &str) -> Result<(u16, Vec<u8>), String> {
        let resp = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.bytes().map_err(|e| e.to_string())?;
        Ok((status, body.to_vec()))
    }

    fn screenshot(&mut self, record: &ResourceRecord) -> Option<String> {
        let png = render_png(&format!("{}\n{}", record.url, record.body_hash), REGION);
        self.store.put_png(&png).ok()
    }
}

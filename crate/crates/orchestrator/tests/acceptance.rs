//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use breakscan::{format_cell, record_pool, run_campaign, CampaignConfig, CampaignOutcome, PoolEntry, PoolStatus, SitePool};
use breakscan_bridge::fixture::{load_manifest, CorpusSource, FixtureFactory, FixtureWorld};
use breakscan_bridge::{
    diff_snapshots, BlockerConfig, BrowserSession, DomChange, DriverMode, ElementCategory, SessionConfig,
    DEFAULT_SNAPSHOT_DEPTH,
};
use breakscan_capture::{read_log, stable_set, CandidateVerdict, MissingResourceCandidate, Phase, ResourceLog};
use breakscan_detectors::{detect_element_breakage, Category, ElementTrial, ElementVerdict};
use breakscan_filters::{load_list, CompiledFilterSet, Decision, ListFormat, RequestContext, ResourceType};
use breakscan_replay::{
    load_labeled, run_labeled, scripted_visit, FidelityThresholds, MissPolicy, ProxyConfig, ProxyHandle, ProxyMode,
    ReplayArchive,
};
use breakscan_testkit::filter_oracle::{self, OracleDecision};
use breakscan_testkit::rule_corpus;
use serde::Deserialize;

type Check = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixtures() -> PathBuf {
    root().join("fixtures")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Deserialize)]
struct Planted {
    category: Category,
    subcategory: String,
}

#[derive(Deserialize)]
struct ManifestPage {
    site: String,
    planted_findings: Vec<Planted>,
    #[serde(default)]
    planted_resources: Vec<String>,
}

#[derive(Deserialize)]
struct FixtureManifest {
    pages: Vec<ManifestPage>,
}

fn fixture_manifest() -> FixtureManifest {
    serde_json::from_slice(&std::fs::read(fixtures().join("corpus/manifest.json")).unwrap()).unwrap()
}

struct Work {
    dir: tempfile::TempDir,
    base: CampaignConfig,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut base = CampaignConfig::load(&fixtures().join("campaign.toml")).unwrap();
        base.archive_dir = Some(dir.path().join("archives"));
        base.out = dir.path().join("unused");
        Self { dir, base }
    }

    fn cfg(&self, out: &str) -> CampaignConfig {
        CampaignConfig {
            out: self.dir.path().join(out),
            ..self.base.clone()
        }
    }

    fn pool_file(&self, name: &str, domains: &[&str]) -> PathBuf {
        let pool = SitePool {
            entries: domains
                .iter()
                .enumerate()
                .map(|(i, d)| PoolEntry {
                    rank: i as u64 + 1,
                    domain: d.to_string(),
                    status: PoolStatus::Included,
                    landing_status: Some(200),
                    reason: None,
                })
                .collect(),
        };
        let p = self.dir.path().join(name);
        std::fs::write(&p, serde_json::to_vec(&pool).unwrap()).unwrap();
        p
    }
}

fn finding_set(o: &CampaignOutcome) -> BTreeSet<(String, Category, String)> {
    o.findings.iter().map(|f| (f.site.clone(), f.category, f.subcategory.clone())).collect()
}

fn planted_campaign(w: &Work, runs: &mut Vec<CampaignOutcome>) -> Check {
    let start = Instant::now();
    let domains: Vec<String> = fixture_manifest().pages.iter().map(|p| p.site.clone()).collect();
    let recorded = record_pool(&w.base, &domains).map_err(|e| e.to_string())?;
    ensure(recorded.iter().all(|r| r.unreachable.is_none()), || format!("unreachable recordings: {recorded:?}"))?;
    let planted = run_campaign(&w.cfg("planted-a")).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let expected: BTreeSet<(String, Category, String)> = fixture_manifest()
        .pages
        .iter()
        .flat_map(|p| p.planted_findings.iter().map(|f| (p.site.clone(), f.category, f.subcategory.clone())))
        .collect();
    let got = finding_set(&planted);
    let hit = got.intersection(&expected).count() as f64;
    let precision = if got.is_empty() { 0.0 } else { hit / got.len() as f64 };
    let recall = hit / expected.len() as f64;
    ensure(planted.failures.is_empty(), || format!("site failures {:?}", planted.failures))?;
    ensure(precision == 1.0 && recall == 1.0, || {
        format!("precision {precision:.2} recall {recall:.2}; unexpected {:?}; missed {:?}", got.difference(&expected).collect::<Vec<_>>(), expected.difference(&got).collect::<Vec<_>>())
    })?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;

    let mut null = w.cfg("null");
    let empty = w.dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    null.blockers = vec![breakscan::BlockerSpec::parse_flag(&format!("null={}", empty.display())).unwrap()];
    let null_run = run_campaign(&null).map_err(|e| e.to_string())?;
    ensure(null_run.findings.is_empty(), || format!("null campaign findings: {:?}", finding_set(&null_run)))?;
    ensure(null_run.sites.len() == expected_sites(), || format!("null campaign visited {} sites", null_run.sites.len()))?;

    let detail = format!(
        "{} findings over {} sites, precision {precision:.2} recall {recall:.2} in {:.1}s; null campaign 0 findings",
        got.len(),
        planted.sites.len(),
        elapsed.as_secs_f64()
    );
    runs.push(planted);
    Ok(detail)
}

fn expected_sites() -> usize {
    fixture_manifest().pages.len()
}

fn filter_oracle_equivalence() -> Check {
    let start = Instant::now();
    let rules = rule_corpus::generate_rules(2019, 240);
    let requests = rule_corpus::generate_requests(2019, 1200);
    let oracle: Vec<_> = rules.iter().filter_map(|r| filter_oracle::translate(r)).collect();
    ensure(oracle.len() == rules.len(), || format!("oracle models {} of {} rules", oracle.len(), rules.len()))?;
    let set = CompiledFilterSet::from_lines(rules.iter().map(String::as_str));
    let mut agree = 0usize;
    for req in &requests {
        let ty = ResourceType::ALL.into_iter().find(|t| t.as_str() == req.resource_type).unwrap();
        let got = set.match_request(&RequestContext::new(&req.url, &req.origin, ty).map_err(|e| e.to_string())?);
        let (want, _) = filter_oracle::verdict(&oracle, &req.url, &req.origin, req.resource_type);
        let want = match want {
            OracleDecision::Blocked => Decision::Blocked,
            OracleDecision::AllowedByException => Decision::AllowedByException,
            OracleDecision::NoMatch => Decision::NoMatch,
        };
        if got.decision == want {
            agree += 1;
        }
    }
    ensure(agree == requests.len(), || format!("{agree}/{} requests agree", requests.len()))?;
    let easylist = std::panic::catch_unwind(|| {
        let rules = load_list(&root().join("lists/easylist.txt"), ListFormat::Adblock).expect("easylist readable");
        CompiledFilterSet::compile(rules).stats()
    })
    .map_err(|_| "EasyList parse panicked".to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} rules x {} requests agree 100%; EasyList {} lines parsed ({} network, {} cosmetic); {:.1}s",
        rules.len(),
        requests.len(),
        easylist.total,
        easylist.block + easylist.exception,
        easylist.cosmetic,
        elapsed.as_secs_f64()
    ))
}

fn listing_reproduction() -> Check {
    let world = Arc::new(FixtureWorld::from_dir(&fixtures().join("corpus")).map_err(|e| e.to_string())?);
    let factory = FixtureFactory::new(world);
    let control = SessionConfig::new(DriverMode::Fixture).with_timeout(5_000);
    let blocker = BlockerConfig::new("planted", CompiledFilterSet::from_lines(["||fixture.test/ads/"]));
    let treatment = control.clone().with_blocker(Some(blocker));
    let url = "http://dropdown.fixture.test/";
    let depth = DEFAULT_SNAPSHOT_DEPTH;

    let mut s = factory.open(&control).map_err(|e| e.to_string())?;
    ensure(s.navigate(url, 5_000).loaded(), || "control load failed".into())?;
    let target = s
        .locate_elements(ElementCategory::Dropdown)
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|t| t.xpath.ends_with("/summary"))
        .ok_or("summary not located")?;
    let pre = s.snapshot_subtree(&target, depth).map_err(|e| e.to_string())?;
    s.interact(&target).map_err(|e| e.to_string())?;
    let post = s.snapshot_subtree(&target, depth).map_err(|e| e.to_string())?;
    let changes = diff_snapshots(&pre, &post);
    let one_toggle = matches!(
        changes.as_slice(),
        [DomChange::AttributeChanged { name, old, new, .. }]
            if name == "aria-expanded" && old.as_deref() == Some("false") && new.as_deref() == Some("true")
    );
    ensure(one_toggle, || format!("control diff {changes:?}"))?;

    let mut t = factory.open(&treatment).map_err(|e| e.to_string())?;
    t.navigate(url, 5_000);
    let tpre = t.snapshot_subtree(&target, depth).ok();
    let _ = t.interact(&target);
    let tpost = t.snapshot_subtree(&target, depth).ok();
    let trial = ElementTrial {
        target,
        control_pre: Some(pre),
        control_post: Some(post),
        treatment_pre: tpre,
        treatment_post: tpost,
        treatment_located: true,
    };
    let verdict = detect_element_breakage(&trial, false);
    ensure(verdict == ElementVerdict::BrokenInert, || format!("verdict {verdict:?}"))?;
    Ok("one change aria-expanded \"false\" -> \"true\"; blocked handler gives broken_inert".into())
}

fn replay_determinism(w: &Work, runs: &[CampaignOutcome]) -> Check {
    let site = "http://clean.fixture.test/";
    let dir = w.base.archive_dir.as_ref().unwrap().join("clean.fixture.test");
    let manifest = load_manifest(&fixtures().join("corpus")).map_err(|e| e.to_string())?;
    let factory = FixtureFactory::new(Arc::new(FixtureWorld::new(manifest, CorpusSource::Network)));
    let mut multisets = Vec::new();
    for _ in 0..2 {
        let archive = ReplayArchive::open(&dir).map_err(|e| e.to_string())?;
        let handle = ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(MissPolicy::NotFound)), archive).map_err(|e| e.to_string())?;
        let cfg = SessionConfig::new(DriverMode::Fixture).with_timeout(3_000).with_proxy(handle.endpoint());
        let mut s = factory.open(&cfg).map_err(|e| e.to_string())?;
        scripted_visit(&mut s, site, 3_000, 3);
        let mut log = ResourceLog::new(site, Phase::Control, 0);
        log.records = handle.take_visit().records;
        handle.shutdown().map_err(|e| e.to_string())?;
        multisets.push(log.multiset());
    }
    ensure(!multisets[0].is_empty() && multisets[0] == multisets[1], || "replay multisets differ".into())?;

    let first = runs.first().ok_or("planted campaign did not run")?;
    let again = run_campaign(&w.cfg("planted-b")).map_err(|e| e.to_string())?;
    let a = std::fs::read(w.dir.path().join("planted-a/findings.jsonl")).map_err(|e| e.to_string())?;
    let b = std::fs::read(w.dir.path().join("planted-b/findings.jsonl")).map_err(|e| e.to_string())?;
    ensure(a == b && first.findings_jsonl() == again.findings_jsonl(), || "campaign findings differ between runs".into())?;
    Ok(format!("{} replayed responses identical twice; findings files byte-identical ({} bytes)", multisets[0].len(), a.len()))
}

fn resource_pipeline(w: &Work) -> Check {
    let out = w.dir.path().join("planted-a");
    let planted: BTreeSet<String> = fixture_manifest()
        .pages
        .iter()
        .flat_map(|p| p.planted_resources.iter().map(move |r| format!("GET http://{}{r}", p.site)))
        .collect();
    let mut confirmed = BTreeSet::new();
    let (mut ads, mut not_found) = (0, 0);
    for page in fixture_manifest().pages {
        let dir = out.join(&page.site);
        let Ok(bytes) = std::fs::read(dir.join("planted/resource/candidates.json")) else { continue };
        let candidates: Vec<MissingResourceCandidate> = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        let control: Vec<ResourceLog> = (0..2)
            .map(|i| read_log(&dir.join(format!("control/resource/control-{i}.sidecar.json"))))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let treatment: Vec<ResourceLog> = (0..2)
            .map(|i| read_log(&dir.join(format!("planted/resource/treatment-{i}.sidecar.json"))))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let stable = stable_set(&control).map_err(|e| e.to_string())?;
        let verdict = |key: &str| candidates.iter().find(|c| c.record.canonical_key == key).map(|c| c.verdict);
        for key in stable.keys() {
            let rec = stable.record(key).unwrap();
            if treatment.iter().any(|t| t.keys().contains(key)) {
                continue;
            }
            if rec.url.contains("/ads/") {
                ads += 1;
                ensure(verdict(key) == Some(CandidateVerdict::FilterExcluded), || format!("{key}: {:?}", verdict(key)))?;
            } else if control.iter().any(|l| l.records.iter().any(|r| r.canonical_key == key && r.status != 200)) {
                not_found += 1;
                ensure(verdict(key) == Some(CandidateVerdict::StatusExcluded), || format!("{key}: {:?}", verdict(key)))?;
            }
        }
        confirmed.extend(
            candidates
                .iter()
                .filter(|c| c.verdict == CandidateVerdict::ConfirmedStatic)
                .map(|c| c.record.canonical_key.clone()),
        );
    }
    ensure(confirmed == planted, || format!("confirmed {confirmed:?}, planted {planted:?}"))?;
    ensure(ads > 0 && not_found > 0, || format!("{ads} ad and {not_found} non-200 candidates seen"))?;
    Ok(format!(
        "confirmed_static = {:?}; {ads} /ads/ candidates filter_excluded; {not_found} non-200 status_excluded",
        confirmed.iter().map(|k| k.rsplit('/').next().unwrap_or(k)).collect::<Vec<_>>()
    ))
}

fn unresponsive_truth_table(w: &Work) -> Check {
    let sites = ["stall.fixture.test", "clean.fixture.test", "flaky.fixture.test"];
    let mut cfg = w.cfg("unresponsive");
    cfg.categories = vec![Category::Unresponsive];
    cfg.toplist = None;
    cfg.pool = Some(w.pool_file("unresponsive-pool.json", &sites));
    let o = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let flagged: Vec<bool> = sites
        .iter()
        .map(|s| o.findings.iter().any(|f| f.site == *s && f.category == Category::Unresponsive))
        .collect();
    ensure(o.tested.get("planted", Category::Unresponsive) == 3, || format!("tested {:?}", o.tested))?;
    ensure(flagged == [true, false, false], || format!("stall/clean/flaky flagged {flagged:?}"))?;
    for site in sites {
        let path = cfg.out.join(site).join("planted/unresponsive/runs.json");
        let phases: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let shape: Vec<usize> = phases.iter().map(|p| p["runs"].as_array().map_or(0, Vec::len)).collect();
        ensure(shape == [5, 5, 5], || format!("{site}: runs per phase {shape:?}"))?;
    }
    Ok("3 phases x 5 runs; stall: finding, clean: none, flaky-control: none".into())
}

fn report_arithmetic() -> Check {
    let cases = [((25, 1500), "25 (1.67%)"), ((3, 1000), "3 (0.30%)"), ((76, 600), "76 (12.67%)")];
    let mut got = Vec::new();
    for ((n, d), want) in cases {
        let cell = format_cell(n, d);
        ensure(cell == want, || format!("{n}/{d} gave {cell:?}, want {want:?}"))?;
        got.push(cell);
    }
    Ok(got.join(", "))
}

fn fidelity_labels(w: &Work) -> Check {
    let cases = load_labeled(&fixtures().join("fidelity/labeled.json")).map_err(|e| e.to_string())?;
    let work = w.dir.path().join("fidelity");
    let outcomes = run_labeled(&fixtures().join("corpus"), &cases, &FidelityThresholds::default(), &work).map_err(|e| e.to_string())?;
    let agree = outcomes.iter().filter(|o| o.agrees()).count();
    let labels: BTreeSet<_> = cases.iter().map(|c| format!("{:?}", c.label)).collect();
    ensure(cases.len() == 6 && agree == 6 && labels.len() == 4, || {
        outcomes
            .iter()
            .filter(|o| !o.agrees())
            .map(|o| format!("{}: {:?} vs {:?}", o.case.site, o.case.label, o.verdict.category))
            .collect::<Vec<_>>()
            .join("; ")
    })?;
    Ok(format!("{agree}/{} agree across {} labels", cases.len(), labels.len()))
}

fn report(name: &str, r: Check, failed: &mut usize) {
    match r {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(why) => {
            *failed += 1;
            println!("FAIL  {name}: {why}");
        }
    }
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let w = Work::new();
    let mut runs = Vec::new();
    let mut failed = 0;
    report("planted-truth campaign", guarded(|| planted_campaign(&w, &mut runs)), &mut failed);
    report("filter matcher oracle equivalence", guarded(filter_oracle_equivalence), &mut failed);
    report("dropdown listing reproduction", guarded(listing_reproduction), &mut failed);
    report("replay determinism", guarded(|| replay_determinism(&w, &runs)), &mut failed);
    report("resource pipeline soundness", guarded(|| resource_pipeline(&w)), &mut failed);
    report("unresponsiveness truth table", guarded(|| unresponsive_truth_table(&w)), &mut failed);
    report("report arithmetic", guarded(report_arithmetic), &mut failed);
    report("fidelity classifier", guarded(|| fidelity_labels(&w)), &mut failed);
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}


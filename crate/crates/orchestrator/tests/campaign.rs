use std::path::{Path, PathBuf};
use std::process::Command;

use breakscan::{record_pool, run_campaign, CampaignConfig, PoolEntry, PoolStatus, SitePool};
use breakscan_detectors::Category;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config(dir: &Path) -> CampaignConfig {
    let mut cfg = CampaignConfig::load(&fixtures().join("campaign.toml")).unwrap();
    cfg.archive_dir = Some(dir.join("archives"));
    cfg.out = dir.join("out");
    cfg
}

fn with_pool(cfg: &mut CampaignConfig, dir: &Path, domains: &[&str]) {
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
    let p = dir.join("pool.json");
    std::fs::write(&p, serde_json::to_vec(&pool).unwrap()).unwrap();
    cfg.toplist = None;
    cfg.pool = Some(p);
}

#[test]
fn element_subset_finds_planted_button_and_dropdown() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    let sites = ["button.fixture.test", "dropdown.fixture.test", "clean.fixture.test"];
    record_pool(&cfg, &sites.map(String::from)).unwrap();
    with_pool(&mut cfg, dir.path(), &sites);
    cfg.categories = vec![Category::HtmlElement];
    let o = run_campaign(&cfg).unwrap();
    let got: Vec<(&str, &str)> = o.findings.iter().map(|f| (f.site.as_str(), f.subcategory.as_str())).collect();
    assert_eq!(got, [("button.fixture.test", "button"), ("dropdown.fixture.test", "dropdown")]);
    assert_eq!(o.tested.get("planted", Category::HtmlElement), 3);
    assert_eq!(o.report.rows[0].cells[1].text, "1 (33.33%)");
    for name in ["findings.jsonl", "tested.json", "report.txt", "report.csv", "manifest.json"] {
        assert!(cfg.out.join(name).exists(), "{name}");
    }
    assert!(cfg.out.join("button.fixture.test/planted/html_element/trials.json").exists());
}

#[test]
fn failing_site_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    record_pool(&cfg, &["crash.fixture.test".to_string()]).unwrap();
    with_pool(&mut cfg, dir.path(), &["crash.fixture.test", "absent.fixture.test"]);
    cfg.categories = vec![Category::Crash];
    let o = run_campaign(&cfg).unwrap();
    assert_eq!(o.failures.len(), 1);
    assert!(o.failures.contains_key("absent.fixture.test"));
    assert_eq!(o.findings.len(), 1);
    assert_eq!(o.findings[0].site, "crash.fixture.test");
    assert_eq!(o.tested.get("planted", Category::Crash), 1);
    let failures: serde_json::Value = serde_json::from_slice(&std::fs::read(cfg.out.join("failures.json")).unwrap()).unwrap();
    assert!(failures.get("absent.fixture.test").is_some());
}

#[test]
fn no_categories_means_no_visits() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.categories.clear();
    let o = run_campaign(&cfg).unwrap();
    assert!(o.findings.is_empty() && o.sites.is_empty() && o.failures.is_empty());
    assert!(o.report.rows.iter().flat_map(|r| &r.cells).all(|c| c.text == "0 (0.00%)"));
    assert_eq!(std::fs::read_to_string(cfg.out.join("findings.jsonl")).unwrap(), "");
}

#[test]
fn cli_curates_pool_and_renders_report() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_breakscan");
    let toplist = dir.path().join("top.csv");
    std::fs::write(&toplist, "rank,domain\n1,a.test\n2,cdn.cloudflare.net\n3,b.test\n4,c.test\n").unwrap();
    let out = Command::new(bin)
        .args(["pool", "curate", "--probe", "none", "--head", "3", "--cdn-list"])
        .arg(fixtures().join("../lists/cdn_domains.txt"))
        .arg("--toplist")
        .arg(&toplist)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pool: SitePool = serde_json::from_slice(&out.stdout).unwrap();
    let included: Vec<&str> = pool.included().map(|e| e.domain.as_str()).collect();
    assert_eq!(included, ["a.test", "b.test"]);

    let findings = dir.path().join("findings.jsonl");
    std::fs::write(&findings, "").unwrap();
    let tested = dir.path().join("tested.json");
    std::fs::write(&tested, r#"{"blockers":["x"],"tested":{"x":{"crash":4}}}"#).unwrap();
    let out = Command::new(bin)
        .args(["report", "render", "--format", "csv", "--findings"])
        .arg(&findings)
        .arg("--tested")
        .arg(&tested)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "x,0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%),0 (0.00%)");

    let bad = Command::new(bin).args(["campaign", "run", "--categories", "nonsense"]).output().unwrap();
    assert!(!bad.status.success());
}

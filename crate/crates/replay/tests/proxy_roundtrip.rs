use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use breakscan_bridge::fixture::{load_manifest, CorpusSource, FixtureFactory, FixtureWorld};
use breakscan_bridge::{DriverMode, SessionConfig};
use breakscan_capture::{Phase, ResourceLog};
use breakscan_replay::{
    record_site, scripted_visit, CorpusServer, MissPolicy, ProxyConfig, ProxyHandle, ProxyMode, ReplayArchive,
};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

fn any_port() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

fn network_factory() -> FixtureFactory {
    let manifest = load_manifest(&corpus()).unwrap();
    FixtureFactory::new(Arc::new(FixtureWorld::new(manifest, CorpusSource::Network)))
}

fn session() -> SessionConfig {
    SessionConfig::new(DriverMode::Fixture).with_timeout(3_000)
}

fn record(site: &str, dir: &std::path::Path) -> (ReplayArchive, ResourceLog) {
    let server = CorpusServer::start(&corpus(), any_port(), &["/stall/"]).unwrap();
    let proxy = ProxyConfig::new(ProxyMode::Record).with_upstream_override(Some(server.addr()));
    let (archive, capture) = record_site(&network_factory(), &session(), proxy, dir, site, 3).unwrap();
    server.shutdown();
    let mut log = ResourceLog::new(site, Phase::Control, 0);
    log.records = capture.records;
    (archive, log)
}

fn replay_once(dir: &std::path::Path, site: &str, policy: MissPolicy) -> (ResourceLog, breakscan_replay::ReplayStats) {
    let handle = ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(policy)), ReplayArchive::open(dir).unwrap()).unwrap();
    let cfg = session().with_proxy(handle.endpoint());
    let mut s = network_factory().open(&cfg).unwrap();
    assert!(scripted_visit(&mut s, site, cfg.page_load_timeout_ms, 3).loaded());
    let capture = handle.take_visit();
    handle.shutdown().unwrap();
    let mut log = ResourceLog::new(site, Phase::Control, 0);
    log.records = capture.records;
    (log, capture.stats)
}

#[test]
fn record_then_replay_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let site = "http://clean.fixture.test/";
    let (archive, recorded) = record(site, dir.path());
    assert!(archive.meta.unreachable.is_none());
    assert!(archive.get("GET http://clean.fixture.test/clean.html").is_some());
    assert!(archive.get("GET http://clean.fixture.test/about.html").is_some());
    assert!(archive.body_count().unwrap() <= archive.len());

    let (a, stats_a) = replay_once(dir.path(), site, MissPolicy::NotFound);
    let (b, stats_b) = replay_once(dir.path(), site, MissPolicy::NotFound);
    assert_eq!(a.multiset(), b.multiset());
    assert_eq!(a.multiset(), recorded.multiset());
    assert_eq!(stats_a.misses, 0, "{:?}", stats_a.missed_keys);
    assert!(stats_a.main_document_served);
    assert_eq!(stats_a.served as usize, a.records.len());
    assert_eq!(stats_a, stats_b);
}

#[test]
fn duplicate_bodies_stored_once() {
    let dir = tempfile::tempdir().unwrap();
    let (archive, _) = record("http://lazy.fixture.test/", dir.path());
    let hashes: std::collections::BTreeSet<_> = archive.entries().map(|e| e.body_hash.clone()).collect();
    assert_eq!(archive.body_count().unwrap(), hashes.len());
    // The 404 for the retired stylesheet is recorded like any other response.
    let old = archive.entries().find(|e| e.url.ends_with("/css/old.css")).unwrap();
    assert_eq!(old.status, 404);
}

fn client(proxy: SocketAddr, timeout_ms: u64) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .no_proxy()
        .proxy(reqwest::Proxy::all(format!("http://{proxy}")).unwrap())
        .redirect(reqwest::redirect::Policy::none())
        .timeout(Duration::from_millis(timeout_ms))
        .build()
        .unwrap()
}

fn tiny_archive(dir: &std::path::Path) {
    let mut a = ReplayArchive::create(dir, "http://a.test/").unwrap();
    let headers = vec![
        ("content-type".to_string(), "text/html".to_string()),
        ("date".to_string(), "Tue, 01 Jan 2019 00:00:00 GMT".to_string()),
        ("set-cookie".to_string(), "sid=abc; Path=/".to_string()),
    ];
    a.insert("GET http://a.test/", "http://a.test/", 200, headers, b"<p>hi</p>").unwrap();
    a.save().unwrap();
}

#[test]
fn miss_policies() {
    let dir = tempfile::tempdir().unwrap();
    tiny_archive(dir.path());
    for policy in [MissPolicy::NotFound, MissPolicy::Close, MissPolicy::Stall] {
        let h = ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(policy)), ReplayArchive::open(dir.path()).unwrap()).unwrap();
        let c = client(h.addr(), 800);
        let hit = c.get("http://a.test/?cb=123").send().unwrap();
        assert_eq!(hit.status(), 200);
        assert_eq!(hit.headers()["date"], "Tue, 01 Jan 2019 00:00:00 GMT");
        assert_eq!(hit.headers()["set-cookie"], "sid=abc; Path=/");
        assert_eq!(hit.text().unwrap(), "<p>hi</p>");
        let miss = c.get("http://a.test/missing.js").send();
        match policy {
            MissPolicy::NotFound => assert_eq!(miss.unwrap().status(), 404),
            MissPolicy::Close => assert!(miss.is_err()),
            MissPolicy::Stall => assert!(miss.unwrap_err().is_timeout()),
        }
        let stats = h.take_visit().stats;
        assert_eq!((stats.served, stats.misses), (1, 1));
        assert_eq!(stats.missed_keys, vec!["GET http://a.test/missing.js".to_string()]);
        assert!(stats.main_document_served);
        h.shutdown().unwrap();
    }
}

#[test]
fn empty_archive_cannot_be_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let a = ReplayArchive::create(dir.path(), "x").unwrap();
    assert!(ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(MissPolicy::NotFound)), a).is_err());
}

#[test]
fn https_is_intercepted_and_replayed() {
    let server = CorpusServer::start(&corpus(), any_port(), &[]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rec = ProxyHandle::start(
        ProxyConfig::new(ProxyMode::Record).with_upstream_override(Some(server.addr())),
        ReplayArchive::create(dir.path(), "https://clean.fixture.test/").unwrap(),
    )
    .unwrap();
    let trusting = |addr: SocketAddr, pem: &str| {
        reqwest::blocking::Client::builder()
            .no_proxy()
            .proxy(reqwest::Proxy::all(format!("http://{addr}")).unwrap())
            .tls_certs_only([reqwest::Certificate::from_pem(pem.as_bytes()).unwrap()])
            .build()
            .unwrap()
    };
    let c = trusting(rec.addr(), &rec.ca_pem());
    let live = c.get("https://clean.fixture.test/clean.html").send().unwrap();
    assert_eq!(live.status(), 200);
    let live_body = live.bytes().unwrap();
    let archive = rec.shutdown().unwrap();
    assert!(archive.get("GET https://clean.fixture.test/clean.html").is_some());
    server.shutdown();

    let rep = ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(MissPolicy::NotFound)), archive).unwrap();
    let c = trusting(rep.addr(), &rep.ca_pem());
    let replayed = c.get("https://clean.fixture.test/clean.html").send().unwrap();
    assert_eq!(replayed.bytes().unwrap(), live_body);
    let untrusting = client(rep.addr(), 2_000);
    assert!(untrusting.get("https://clean.fixture.test/clean.html").send().is_err());
}

#[test]
fn resetting_server_gives_unreachable_archive() {
    let listener = TcpListener::bind(any_port()).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for s in listener.incoming() {
            drop(s);
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let proxy = ProxyConfig::new(ProxyMode::Record).with_upstream_override(Some(addr));
    let (archive, capture) =
        record_site(&network_factory(), &session(), proxy, dir.path(), "http://clean.fixture.test/", 3).unwrap();
    assert!(archive.meta.unreachable.is_some());
    assert!(capture.main_failure.is_some());
    assert!(archive.is_empty());
    assert!(ReplayArchive::open(dir.path()).unwrap().meta.unreachable.is_some());
}

use std::io::BufRead;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use breakscan_bridge::fixture::{load_manifest, CorpusSource, FixtureFactory, FixtureWorld};
use breakscan_bridge::webdriver::WebDriverFactory;
use breakscan_bridge::{DriverMode, SessionConfig, SessionFactory};
use breakscan_replay::{record_site, CorpusServer, MissPolicy, ProxyConfig, ProxyHandle, ProxyMode, ReplayArchive};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "breakscan-replay", about = "Record and replay web visits through an intercepting proxy")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record into an archive. With --site, drives one scripted visit and
    /// exits; otherwise proxies until stdin is closed or a line is entered.
    Record {
        #[arg(long)]
        archive_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        port: u16,
        /// Send all upstream traffic to this address instead of resolving hosts.
        #[arg(long)]
        upstream: Option<SocketAddr>,
        #[arg(long)]
        site: Option<String>,
        /// Drive the visit with the fixture driver against this corpus.
        #[arg(long, conflicts_with = "webdriver")]
        corpus: Option<PathBuf>,
        /// Drive the visit with a WebDriver endpoint.
        #[arg(long)]
        webdriver: Option<String>,
        #[arg(long, default_value_t = 3)]
        inner_pages: usize,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
    },
    /// Serve an archive until stdin is closed or a line is entered, then
    /// print replay statistics.
    Replay {
        #[arg(long)]
        archive_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long, default_value = "404")]
        miss_policy: MissPolicy,
    },
    /// Serve a fixture corpus directory over plain HTTP.
    ServeCorpus {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        port: u16,
    },
}

fn wait_for_stdin(what: &str, addr: SocketAddr) {
    eprintln!("{what} on {addr}; press Enter or close stdin to stop");
    let mut line = String::new();
    let _ = std::io::stdin().lock().read_line(&mut line);
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Cli::parse().cmd {
        Cmd::Record {
            archive_dir,
            port,
            upstream,
            site,
            corpus,
            webdriver,
            inner_pages,
            timeout_ms,
        } => {
            let Some(site) = site else {
                let archive = ReplayArchive::create(&archive_dir, "")?;
                let cfg = ProxyConfig::new(ProxyMode::Record).with_port(port).with_upstream_override(upstream);
                let handle = ProxyHandle::start(cfg, archive)?;
                println!("{}", handle.ca_pem());
                wait_for_stdin("recording proxy", handle.addr());
                let archive = handle.shutdown()?;
                println!("recorded {} entries into {}", archive.len(), archive_dir.display());
                return Ok(());
            };
            let mut server = None;
            let (factory, mode, upstream): (Box<dyn SessionFactory>, DriverMode, Option<SocketAddr>) =
                match (corpus, webdriver) {
                    (Some(root), _) => {
                        let manifest = load_manifest(&root).context("reading driver.json")?;
                        let s = CorpusServer::start(&root, SocketAddr::from(([127, 0, 0, 1], 0)), &["/stall/"])?;
                        let addr = s.addr();
                        server = Some(s);
                        let world = Arc::new(FixtureWorld::new(manifest, CorpusSource::Network));
                        (Box::new(FixtureFactory::new(world)), DriverMode::Fixture, Some(addr))
                    }
                    (None, Some(endpoint)) => (Box::new(WebDriverFactory::new(endpoint)), DriverMode::Live, upstream),
                    (None, None) => bail!("--site needs --corpus or --webdriver"),
                };
            let session = SessionConfig::new(mode).with_timeout(timeout_ms);
            let proxy = ProxyConfig::new(ProxyMode::Record).with_port(port).with_upstream_override(upstream);
            let (archive, capture) = record_site(factory.as_ref(), &session, proxy, &archive_dir, &site, inner_pages)?;
            if let Some(s) = server {
                s.shutdown();
            }
            println!(
                "recorded {} entries ({} requests) into {}",
                archive.len(),
                capture.records.len(),
                archive_dir.display()
            );
            if let Some(reason) = archive.meta.unreachable {
                println!("unreachable: {reason}");
            }
        }
        Cmd::Replay {
            archive_dir,
            port,
            miss_policy,
        } => {
            let archive = ReplayArchive::open(&archive_dir).with_context(|| format!("opening {}", archive_dir.display()))?;
            let handle = ProxyHandle::start(ProxyConfig::new(ProxyMode::Replay(miss_policy)).with_port(port), archive)?;
            wait_for_stdin("replay proxy", handle.addr());
            let stats = handle.take_visit().stats;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            handle.shutdown()?;
        }
        Cmd::ServeCorpus { root, port } => {
            let s = CorpusServer::start(&root, SocketAddr::from(([127, 0, 0, 1], port)), &["/stall/"])?;
            wait_for_stdin("corpus server", s.addr());
            s.shutdown();
        }
    }
    Ok(())
}

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use breakscan::config::{parse_category, parse_range};
use breakscan::pool::parse_toplist;
use breakscan::{
    build_report, curate_pool, record_pool, render_report, run_campaign, ArchiveProbe, BlockerSpec, CampaignConfig,
    CdnRules, DriverKind, HttpProbe, Mode, ReachabilityProbe, ReportFormat, SitePool, TestedCounts,
};
use breakscan_detectors::{from_jsonl, Category};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "breakscan", about = "Measure web breakage caused by content blockers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Site pool operations.
    Pool {
        #[command(subcommand)]
        cmd: PoolCmd,
    },
    /// Record replay archives for every site of the pool.
    Record(CampaignArgs),
    /// Campaign operations.
    Campaign {
        #[command(subcommand)]
        cmd: CampaignCmd,
    },
    /// Report operations.
    Report {
        #[command(subcommand)]
        cmd: ReportCmd,
    },
}

#[derive(Subcommand)]
enum PoolCmd {
    /// Build a site pool from a ranked toplist.
    Curate {
        #[arg(long)]
        toplist: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        head: u64,
        /// Inclusive rank range, e.g. 90000-100000.
        #[arg(long, value_parser = parse_range)]
        tail_range: Option<[u64; 2]>,
        #[arg(long)]
        cdn_list: Option<PathBuf>,
        /// live: GET each landing page; archive: consult recorded archives;
        /// none: skip reachability.
        #[arg(long, default_value = "live")]
        probe: String,
        #[arg(long)]
        archive_dir: Option<PathBuf>,
        /// Send every probe to this address (a local corpus server).
        #[arg(long)]
        resolve_all: Option<SocketAddr>,
        #[arg(long, default_value = "http")]
        scheme: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CampaignCmd {
    /// Run every configured category protocol over the pool.
    Run(CampaignArgs),
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Render a findings file as a per-blocker table.
    Render {
        #[arg(long)]
        findings: PathBuf,
        /// tested.json written by `campaign run`.
        #[arg(long)]
        tested: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
}

/// Every flag overrides the matching key of the TOML config.
#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    toplist: Option<PathBuf>,
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    head: Option<u64>,
    #[arg(long, value_parser = parse_range)]
    tail_range: Option<[u64; 2]>,
    #[arg(long)]
    cdn_list: Option<PathBuf>,
    /// Comma-separated category names.
    #[arg(long, value_delimiter = ',', value_parser = parse_category)]
    categories: Option<Vec<Category>>,
    /// `id=list[,list...]`; repeat for several blockers.
    #[arg(long, value_parser = BlockerSpec::parse_flag)]
    blocker_lists: Vec<BlockerSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    archive_dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "webdriver")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    webdriver: Option<String>,
    #[arg(long)]
    timeout_ms: Option<u64>,
}

impl CampaignArgs {
    fn resolve(self) -> anyhow::Result<CampaignConfig> {
        let mut cfg = match &self.config {
            Some(p) => CampaignConfig::load(p)?,
            None => CampaignConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = Some(v); } )* };
        }
        set!(head, categories, seed, mode, workers, out);
        set_opt!(toplist, pool, tail_range, cdn_list, archive_dir);
        if let Some(c) = self.corpus {
            cfg.corpus = Some(c);
            cfg.driver = DriverKind::Fixture;
        }
        if let Some(w) = self.webdriver {
            cfg.webdriver = Some(w);
            cfg.driver = DriverKind::Webdriver;
        }
        if let Some(t) = self.timeout_ms {
            cfg.page_load_timeout_ms = t;
        }
        if !self.blocker_lists.is_empty() {
            cfg.blockers = self.blocker_lists;
        }
        Ok(cfg)
    }
}

fn pool_domains(cfg: &CampaignConfig) -> anyhow::Result<Vec<String>> {
    if let Some(p) = &cfg.pool {
        return Ok(SitePool::load(p)?.included().map(|e| e.domain.clone()).collect());
    }
    let Some(toplist) = &cfg.toplist else { bail!("need --pool or --toplist") };
    let text = std::fs::read_to_string(toplist).with_context(|| toplist.display().to_string())?;
    let cdn = match &cfg.cdn_list {
        Some(p) => CdnRules::load(p)?,
        None => CdnRules::from_list(""),
    };
    let pool = curate_pool(&text, cfg.head, cfg.tail_range, &cdn, None)?;
    Ok(pool.included().map(|e| e.domain.clone()).collect())
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| p.display().to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    match Cli::parse().cmd {
        Cmd::Pool {
            cmd:
                PoolCmd::Curate {
                    toplist,
                    head,
                    tail_range,
                    cdn_list,
                    probe,
                    archive_dir,
                    resolve_all,
                    scheme,
                    out,
                },
        } => {
            let text = std::fs::read_to_string(&toplist).with_context(|| toplist.display().to_string())?;
            let cdn = match &cdn_list {
                Some(p) => CdnRules::load(p)?,
                None => CdnRules::from_list(""),
            };
            let probe: Option<Box<dyn ReachabilityProbe>> = match probe.as_str() {
                "none" => None,
                "archive" => {
                    let Some(dir) = archive_dir else { bail!("--probe archive needs --archive-dir") };
                    Some(Box::new(ArchiveProbe { dir, scheme }))
                }
                "live" => {
                    let domains: Vec<String> = parse_toplist(&text)?.into_iter().map(|(_, d)| d).collect();
                    let hosts: Vec<&str> = domains.iter().map(String::as_str).collect();
                    Some(Box::new(HttpProbe::new(&scheme, resolve_all, &hosts)?))
                }
                other => bail!("unknown probe {other:?} (live|archive|none)"),
            };
            let pool = curate_pool(&text, head, tail_range, &cdn, probe.as_deref())?;
            eprintln!(
                "{} candidates, {} included",
                pool.entries.len(),
                pool.included().count()
            );
            write_or_print(out.as_deref(), &(serde_json::to_string_pretty(&pool)? + "\n"))?;
        }
        Cmd::Record(args) => {
            let cfg = args.resolve()?;
            let domains = pool_domains(&cfg)?;
            for s in record_pool(&cfg, &domains)? {
                match &s.unreachable {
                    Some(why) => println!("{}: {} entries, unreachable ({why})", s.domain, s.entries),
                    None => println!("{}: {} entries from {} requests", s.domain, s.entries, s.requests),
                }
            }
        }
        Cmd::Campaign {
            cmd: CampaignCmd::Run(args),
        } => {
            let cfg = args.resolve()?;
            let outcome = run_campaign(&cfg)?;
            print!("{}", render_report(&outcome.report, ReportFormat::Table));
            eprintln!(
                "{} sites, {} findings, {} failures; outputs in {}",
                outcome.sites.len(),
                outcome.findings.len(),
                outcome.failures.len(),
                cfg.out.display()
            );
        }
        Cmd::Report {
            cmd: ReportCmd::Render { findings, tested, format },
        } => {
            let findings = from_jsonl(&std::fs::read_to_string(&findings).with_context(|| findings.display().to_string())?)?;
            let tested: TestedCounts =
                serde_json::from_slice(&std::fs::read(&tested).with_context(|| tested.display().to_string())?)?;
            print!("{}", render_report(&build_report(&findings, &tested), format));
        }
    }
    Ok(())
}

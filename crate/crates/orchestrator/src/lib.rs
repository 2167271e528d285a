//! Campaign driver: curates the site pool, runs the per-category visit
//! protocols for every site and blocker, and aggregates findings into
//! per-blocker reports.

pub mod campaign;
pub mod config;
pub mod pool;
mod protocols;
pub mod record;
pub mod report;
pub mod sample;

pub use campaign::{run_campaign, run_pool, site_dir_name, ArchiveProbe, CampaignOutcome};
pub use config::{BlockerSpec, CampaignConfig, DriverKind, Mode, ProtocolConfig};
pub use pool::{curate_pool, CdnRules, HttpProbe, PoolEntry, PoolStatus, ReachabilityProbe, SitePool};
pub use protocols::SiteResult;
pub use record::{record_pool, RecordSummary};
pub use report::{basis_points, build_report, format_cell, render_report, CampaignReport, ReportFormat, TestedCounts};
pub use sample::{sample_targets, select_inner_pages, shuffled, site_seed};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("config: {0}")]
    Config(String),
    #[error("toplist line {line}: {msg}")]
    Toplist { line: usize, msg: String },
    #[error(transparent)]
    Replay(#[from] breakscan_replay::ReplayError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

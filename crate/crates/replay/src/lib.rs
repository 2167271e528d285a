//! Forward HTTP(S) proxy that records every response of a visit into a
//! content-addressed archive and replays it bit-exactly, plus a grader for
//! how faithfully a replay reproduced the recorded visit.

mod archive;
mod calibrate;
mod fidelity;
mod proxy;
mod record;
mod serve;
mod tls;

pub use archive::{ArchiveEntry, ArchiveMeta, ReplayArchive};
pub use calibrate::{load_labeled, run_labeled, LabeledOutcome, LabeledReplay};
pub use fidelity::{classify_fidelity, FidelityCategory, FidelityThresholds, FidelityVerdict};
pub use proxy::{MissPolicy, ProxyConfig, ProxyHandle, ProxyMode, ReplayStats, VisitCapture};
pub use record::{record_site, scripted_visit};
pub use serve::CorpusServer;
pub use tls::InterceptionCa;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("archive {0} is empty")]
    EmptyArchive(String),
    #[error("tls: {0}")]
    Tls(String),
    #[error("upstream client: {0}")]
    Upstream(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive index: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ReplayError> = std::result::Result<T, E>;

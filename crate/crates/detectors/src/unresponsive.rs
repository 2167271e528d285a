use breakscan_bridge::NavigationOutcome;
use serde::{Deserialize, Serialize};

use crate::{BreakageFinding, Category, Confidence, DetectorError, Evidence, FindingContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    PreControl,
    Treatment,
    PostControl,
}

impl PhaseKind {
    pub const ORDER: [PhaseKind; 3] = [PhaseKind::PreControl, PhaseKind::Treatment, PhaseKind::PostControl];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PreControl => "pre_control",
            Self::Treatment => "treatment",
            Self::PostControl => "post_control",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseOutcome {
    pub phase: PhaseKind,
    pub runs: Vec<NavigationOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresponsiveThresholds {
    pub runs: usize,
    /// Treatment runs that must fail to load.
    pub treatment_failures: usize,
    /// Runs that must load in each control phase.
    pub control_loads: usize,
}

impl Default for UnresponsiveThresholds {
    fn default() -> Self {
        Self {
            runs: 5,
            treatment_failures: 3,
            control_loads: 4,
        }
    }
}

/// Loads without the blocker, with it, and without it again. A finding
/// needs most treatment runs to fail while both control phases load.
pub fn detect_unresponsive(
    ctx: &FindingContext,
    outcomes: &[PhaseOutcome],
    t: &UnresponsiveThresholds,
) -> Result<Option<BreakageFinding>, DetectorError> {
    let mut phases = Vec::new();
    for kind in PhaseKind::ORDER {
        let runs = outcomes.iter().find(|p| p.phase == kind).map_or(&[][..], |p| &p.runs[..]);
        if runs.len() < t.runs {
            return Err(DetectorError::IncompleteProtocol {
                phase: kind.as_str(),
                runs: runs.len(),
                need: t.runs,
            });
        }
        phases.push((kind, &runs[..t.runs]));
    }
    let loads = |runs: &[NavigationOutcome]| runs.iter().filter(|r| r.loaded()).count();
    let [(_, pre), (_, treat), (_, post)] = [phases[0], phases[1], phases[2]];
    let hit = t.runs - loads(treat) >= t.treatment_failures && loads(pre) >= t.control_loads && loads(post) >= t.control_loads;
    if !hit {
        return Ok(None);
    }
    let evidence = phases
        .iter()
        .flat_map(|(kind, runs)| {
            runs.iter().enumerate().map(move |(i, r)| Evidence::Navigation {
                phase: kind.as_str().into(),
                run: i,
                result: r.result,
                http_status: r.http_status,
                load_time_ms: r.load_time_ms,
            })
        })
        .collect();
    Ok(BreakageFinding::new(ctx, Category::Unresponsive, "unresponsive", evidence, Confidence::Automatic).ok())
}

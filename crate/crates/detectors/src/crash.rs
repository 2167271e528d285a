use breakscan_bridge::{LogEntry, NavResult, NavigationOutcome};

use crate::{BreakageFinding, Category, Confidence, Evidence, FindingContext};

const CRASH_PHRASES: [&str; 2] = ["page crash", "browser crash"];

/// Treatment-visit crash signals: a crash phrase in the browser log, a
/// crashed renderer, or a 404 landing that loaded fine in control.
pub fn detect_crash(
    ctx: &FindingContext,
    logs: &[LogEntry],
    landing: &NavigationOutcome,
    control_status: Option<u16>,
) -> Option<BreakageFinding> {
    let mut evidence: Vec<Evidence> = logs
        .iter()
        .filter(|e| {
            let t = e.text.to_lowercase();
            CRASH_PHRASES.iter().any(|p| t.contains(p))
        })
        .map(|e| Evidence::LogExcerpt {
            level: e.level.clone(),
            text: e.text.clone(),
        })
        .collect();
    let landing_404 = landing.http_status == Some(404) && control_status.is_some_and(|s| s != 404);
    if landing.result == NavResult::Crashed || landing_404 {
        evidence.push(Evidence::Navigation {
            phase: "treatment".into(),
            run: 0,
            result: landing.result,
            http_status: landing.http_status,
            load_time_ms: landing.load_time_ms,
        });
    }
    if evidence.is_empty() {
        return None;
    }
    BreakageFinding::new(ctx, Category::Crash, "page_crash", evidence, Confidence::NeedsReview).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nav(result: NavResult, status: Option<u16>) -> NavigationOutcome {
        NavigationOutcome {
            final_url: "http://a.test/".into(),
            http_status: status,
            load_time_ms: 10,
            result,
        }
    }

    fn entry(text: &str) -> LogEntry {
        LogEntry {
            level: "SEVERE".into(),
            text: text.into(),
            timestamp: 0,
        }
    }

    fn ctx() -> FindingContext {
        FindingContext::new("a.test", "http://a.test/", "planted")
    }

    #[test]
    fn signals() {
        let ok = nav(NavResult::Loaded, Some(200));
        assert!(detect_crash(&ctx(), &[entry("Uncaught: Page Crash while rendering")], &ok, Some(200)).is_some());
        assert!(detect_crash(&ctx(), &[entry("x")], &nav(NavResult::Crashed, None), Some(200)).is_some());
        assert!(detect_crash(&ctx(), &[], &nav(NavResult::Loaded, Some(404)), Some(200)).is_some());
        assert!(detect_crash(&ctx(), &[], &nav(NavResult::Loaded, Some(404)), Some(404)).is_none());
        assert!(detect_crash(&ctx(), &[entry("Failed to load resource")], &ok, Some(200)).is_none());
        let f = detect_crash(&ctx(), &[entry("browser crash")], &ok, Some(200)).unwrap();
        assert_eq!(f.confidence, Confidence::NeedsReview);
    }
}

use breakscan_bridge::FrameSource;

use crate::{BreakageFinding, Category, Confidence, Evidence, FindingContext};

pub const DEFAULT_KEYWORDS: [&str; 3] = ["adblocker", "detect", "disable"];

const EXCERPT_RADIUS: usize = 60;

fn first_keyword<'k>(text: &str, keywords: &'k [String]) -> Option<(&'k str, usize)> {
    let lower = text.to_lowercase();
    keywords
        .iter()
        .filter_map(|k| lower.find(&k.to_lowercase()).map(|i| (k.as_str(), i)))
        .min_by_key(|(_, i)| *i)
}

fn excerpt(text: &str, at: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    let center = text.to_lowercase()[..at.min(text.len())].chars().count().min(chars.len());
    let start = center.saturating_sub(EXCERPT_RADIUS);
    let end = (center + EXCERPT_RADIUS).min(chars.len());
    chars[start..end].iter().collect::<String>().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keyword scan over every frame of one page. A finding needs a keyword in
/// some treatment frame; it is automatic when the frame at the same path
/// carries no keyword in control (or does not exist there).
pub fn detect_prompt(
    ctx: &FindingContext,
    control_frames: &[FrameSource],
    treatment_frames: &[FrameSource],
    keywords: &[String],
    screenshot: &mut dyn FnMut() -> Option<String>,
) -> Option<BreakageFinding> {
    let hits: Vec<(&FrameSource, &str, usize)> = treatment_frames
        .iter()
        .filter_map(|f| first_keyword(&f.source_text, keywords).map(|(k, i)| (f, k, i)))
        .collect();
    if hits.is_empty() {
        return None;
    }
    let fresh = |f: &FrameSource| {
        control_frames
            .iter()
            .find(|c| c.frame_path == f.frame_path)
            .is_none_or(|c| first_keyword(&c.source_text, keywords).is_none())
    };
    let automatic = hits.iter().any(|(f, ..)| fresh(f));
    let mut evidence = Vec::new();
    if let Some(sha256) = screenshot() {
        evidence.push(Evidence::Screenshot { sha256 });
    }
    for (f, keyword, at) in hits.iter().filter(|(f, ..)| !automatic || fresh(f)) {
        evidence.push(Evidence::FrameExcerpt {
            frame_path: f.frame_path.clone(),
            keyword: keyword.to_string(),
            text: excerpt(&f.source_text, *at),
        });
    }
    let confidence = if automatic { Confidence::Automatic } else { Confidence::NeedsReview };
    BreakageFinding::new(ctx, Category::ExtensionDetection, "disable_prompt", evidence, confidence).ok()
}

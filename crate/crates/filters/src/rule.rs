use serde::{Deserialize, Serialize};

use crate::options::RuleOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Block,
    Exception,
    Comment,
    CosmeticUnsupported,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternToken {
    Literal(String),
    /// `*`
    Wildcard,
    /// `^`
    Separator,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Pattern {
    /// `||`: the match starts at a hostname-label boundary.
    pub domain_anchor: bool,
    /// leading `|`
    pub start_anchor: bool,
    /// trailing `|`
    pub end_anchor: bool,
    pub tokens: Vec<PatternToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRule {
    pub raw_text: String,
    pub kind: RuleKind,
    /// Present for block and exception rules in the supported subset.
    pub pattern: Option<Pattern>,
    pub options: RuleOptions,
    /// Why a rule was classified invalid or left without a pattern.
    pub reason: Option<String>,
}

impl FilterRule {
    fn classified(raw: &str, kind: RuleKind, reason: Option<String>) -> Self {
        Self {
            raw_text: raw.to_string(),
            kind,
            pattern: None,
            options: RuleOptions::default(),
            reason,
        }
    }

    /// Block and exception rules that can take part in matching.
    pub fn is_network(&self) -> bool {
        matches!(self.kind, RuleKind::Block | RuleKind::Exception) && self.pattern.is_some()
    }
}

const COSMETIC_MARKERS: [&str; 3] = ["##", "#@#", "#?#"];

/// A cosmetic marker only counts when everything before it is a plain
/// domain list (`example.com,~sub.example.com##.ad`); inside a URL pattern
/// the `#` characters are part of the pattern.
fn is_cosmetic(text: &str) -> bool {
    let Some(pos) = COSMETIC_MARKERS.iter().filter_map(|m| text.find(m)).min() else {
        return false;
    };
    text[..pos]
        .chars()
        .all(|c| c.is_alphanumeric() || matches!(c, '.' | ',' | '~' | '-' | '_' | '*'))
}

/// Classifies one physical line of a filter list. Total: never fails.
pub fn parse_line(line: &str) -> FilterRule {
    let raw = line.trim_end_matches(['\r', '\n']);
    let text = raw.trim();
    if text.is_empty() {
        return FilterRule::classified(raw, RuleKind::Invalid, Some("empty line".into()));
    }
    if text.starts_with('!') || text.starts_with("[Adblock") {
        return FilterRule::classified(raw, RuleKind::Comment, None);
    }
    if is_cosmetic(text) {
        return FilterRule::classified(raw, RuleKind::CosmeticUnsupported, None);
    }
    let (exception, body) = match text.strip_prefix("@@") {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let kind = if exception { RuleKind::Exception } else { RuleKind::Block };
    match parse_network(body) {
        Ok((pattern, options)) => FilterRule {
            raw_text: raw.to_string(),
            kind,
            pattern: Some(pattern),
            options,
            reason: None,
        },
        // Unsupported `@@` rules stay exceptions but carry no pattern.
        Err(reason) if exception => FilterRule::classified(raw, RuleKind::Exception, Some(reason)),
        Err(reason) => FilterRule::classified(raw, RuleKind::Invalid, Some(reason)),
    }
}

fn parse_network(body: &str) -> Result<(Pattern, RuleOptions), String> {
    let (pattern_text, options_text) = match body.rfind('$') {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    if looks_like_regex(pattern_text) {
        return Err("regular-expression rules are unsupported".into());
    }
    let options = match options_text {
        Some(text) => RuleOptions::parse(text)?,
        None => RuleOptions::default(),
    };
    let pattern = tokenize(pattern_text, options.match_case)?;
    Ok((pattern, options))
}

fn looks_like_regex(p: &str) -> bool {
    p.len() >= 2 && p.starts_with('/') && p.ends_with('/')
}

pub(crate) fn tokenize(text: &str, match_case: bool) -> Result<Pattern, String> {
    let mut pattern = Pattern::default();
    let mut rest = text;
    if let Some(r) = rest.strip_prefix("||") {
        pattern.domain_anchor = true;
        rest = r;
    } else if let Some(r) = rest.strip_prefix('|') {
        pattern.start_anchor = true;
        rest = r;
    }
    if let Some(r) = rest.strip_suffix('|') {
        pattern.end_anchor = true;
        rest = r;
    }
    if rest.contains('|') {
        return Err("`|` is only meaningful at the pattern edges".into());
    }
    if rest.chars().any(char::is_whitespace) {
        return Err("whitespace inside pattern".into());
    }

    let mut literal = String::new();
    for c in rest.chars() {
        match c {
            '*' | '^' => {
                if !literal.is_empty() {
                    pattern.tokens.push(PatternToken::Literal(std::mem::take(&mut literal)));
                }
                if c == '*' {
                    if pattern.tokens.last() != Some(&PatternToken::Wildcard) {
                        pattern.tokens.push(PatternToken::Wildcard);
                    }
                } else {
                    pattern.tokens.push(PatternToken::Separator);
                }
            }
            _ if match_case => literal.push(c),
            _ => literal.extend(c.to_lowercase()),
        }
    }
    if !literal.is_empty() {
        pattern.tokens.push(PatternToken::Literal(literal));
    }
    Ok(pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::options::{Party, ResourceType};
    use PatternToken::*;

    #[test]
    fn comments_and_headers() {
        assert_eq!(parse_line("! Title: EasyList").kind, RuleKind::Comment);
        assert_eq!(parse_line("[Adblock Plus 2.0]").kind, RuleKind::Comment);
    }

    #[test]
    fn cosmetic_markers() {
        assert_eq!(parse_line("##.ad-banner").kind, RuleKind::CosmeticUnsupported);
        assert_eq!(parse_line("example.com,~a.example.com##.ad").kind, RuleKind::CosmeticUnsupported);
        assert_eq!(parse_line("example.com#@#.ad").kind, RuleKind::CosmeticUnsupported);
        assert_eq!(parse_line("example.com#?#div:-abp-has(.ad)").kind, RuleKind::CosmeticUnsupported);
        // `#` inside a URL pattern is not an element-hiding marker
        assert_eq!(parse_line("||example.com/page##anchor").kind, RuleKind::Block);
    }

    #[test]
    fn domain_anchored_with_options() {
        let r = parse_line("||ads.example.com^$image,third-party");
        assert_eq!(r.kind, RuleKind::Block);
        let p = r.pattern.unwrap();
        assert!(p.domain_anchor && !p.start_anchor && !p.end_anchor);
        assert_eq!(p.tokens, vec![Literal("ads.example.com".into()), Separator]);
        assert_eq!(r.options.resource_types.iter().copied().collect::<Vec<_>>(), vec![ResourceType::Image]);
        assert_eq!(r.options.party, Party::ThirdParty);
    }

    #[test]
    fn exceptions_always_classified_as_exception() {
        assert_eq!(parse_line("@@||a.com^$script").kind, RuleKind::Exception);
        let r = parse_line("@@/banner\\d+/");
        assert_eq!(r.kind, RuleKind::Exception);
        assert!(r.pattern.is_none() && r.reason.is_some());
    }

    #[test]
    fn unsupported_block_rules_are_invalid() {
        for line in ["/banner\\d+/", "||a.com^$redirect=noop.js", "||a.com^$csp=script-src", "", "   ", "a|b"] {
            let r = parse_line(line);
            assert_eq!(r.kind, RuleKind::Invalid, "{line:?}");
            assert_eq!(r.raw_text, line.trim_end_matches(['\r', '\n']));
        }
    }

    #[test]
    fn wildcards_collapse_and_case_folds() {
        let r = parse_line("|HTTP://*Ads**/x|");
        let p = r.pattern.unwrap();
        assert!(p.start_anchor && p.end_anchor);
        assert_eq!(p.tokens, vec![Literal("http://".into()), Wildcard, Literal("ads".into()), Wildcard, Literal("/x".into())]);
        let r = parse_line("/Banner/x$match-case");
        assert_eq!(r.pattern.unwrap().tokens, vec![Literal("/Banner/x".into())]);
        assert_eq!(parse_line("/ads\\d/$script").kind, RuleKind::Invalid);
    }

    #[test]
    fn crlf_is_stripped() {
        let r = parse_line("||a.com^\r\n");
        assert_eq!(r.raw_text, "||a.com^");
        assert_eq!(r.kind, RuleKind::Block);
    }
}

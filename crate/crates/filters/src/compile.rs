use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::rule::{FilterRule, Pattern, PatternToken, RuleKind};
use crate::RequestContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Blocked,
    AllowedByException,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchVerdict {
    pub decision: Decision,
    pub matched_rule: Option<FilterRule>,
}

impl MatchVerdict {
    fn no_match() -> Self {
        Self {
            decision: Decision::NoMatch,
            matched_rule: None,
        }
    }

    pub fn is_blocked(&self) -> bool {
        self.decision == Decision::Blocked
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileStats {
    pub total: usize,
    pub block: usize,
    pub exception: usize,
    pub comment: usize,
    pub cosmetic: usize,
    pub invalid: usize,
    /// `@@` rules outside the supported syntax; they never match.
    pub unsupported_exception: usize,
}

/// Rules bucketed by one alphanumeric token that must appear as a whole
/// token in every URL the rule can match. Rules without such a token live
/// in `fallback` and are tried for every request.
#[derive(Debug, Clone, Default)]
struct TokenIndex {
    buckets: HashMap<String, Vec<u32>>,
    fallback: Vec<u32>,
}

impl TokenIndex {
    fn insert(&mut self, id: u32, pattern: &Pattern) {
        match index_token(pattern) {
            Some(tok) => self.buckets.entry(tok).or_default().push(id),
            None => self.fallback.push(id),
        }
    }

    fn candidates(&self, url_tokens: &[&str]) -> Vec<u32> {
        let mut ids: Vec<u32> = self.fallback.clone();
        for tok in url_tokens {
            if let Some(b) = self.buckets.get(*tok) {
                ids.extend_from_slice(b);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Longest alphanumeric run of the pattern that is bounded on both sides,
/// i.e. guaranteed to be a complete token of any matching URL.
fn index_token(pattern: &Pattern) -> Option<String> {
    let n = pattern.tokens.len();
    let mut best: Option<&str> = None;
    for (i, tok) in pattern.tokens.iter().enumerate() {
        let PatternToken::Literal(lit) = tok else { continue };
        let left_edge = if i == 0 {
            pattern.domain_anchor || pattern.start_anchor
        } else {
            pattern.tokens[i - 1] == PatternToken::Separator
        };
        let right_edge = if i + 1 == n {
            pattern.end_anchor
        } else {
            pattern.tokens[i + 1] == PatternToken::Separator
        };
        let bytes = lit.as_bytes();
        let mut start = 0;
        while start < bytes.len() {
            if !bytes[start].is_ascii_alphanumeric() {
                start += 1;
                continue;
            }
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let bounded_left = start > 0 || left_edge;
            let bounded_right = end < bytes.len() || right_edge;
            if bounded_left && bounded_right && best.is_none_or(|b| end - start > b.len()) {
                best = Some(&lit[start..end]);
            }
            start = end;
        }
    }
    best.map(|s| s.to_ascii_lowercase())
}

fn url_tokens(url_lower: &str) -> Vec<&str> {
    let mut toks: Vec<&str> = url_lower
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();
    toks.sort_unstable();
    toks.dedup();
    toks
}

/// Immutable, indexed rule set. `match_request` is a pure function and the
/// set is `Send + Sync`.
#[derive(Debug, Clone, Default)]
pub struct CompiledFilterSet {
    rules: Vec<FilterRule>,
    blocks: TokenIndex,
    exceptions: TokenIndex,
    stats: CompileStats,
}

impl CompiledFilterSet {
    pub fn compile<I>(rules: I) -> Self
    where
        I: IntoIterator<Item = FilterRule>,
    {
        let mut set = CompiledFilterSet::default();
        for rule in rules {
            set.stats.total += 1;
            match rule.kind {
                RuleKind::Comment => set.stats.comment += 1,
                RuleKind::CosmeticUnsupported => set.stats.cosmetic += 1,
                RuleKind::Invalid => set.stats.invalid += 1,
                RuleKind::Exception if rule.pattern.is_none() => set.stats.unsupported_exception += 1,
                RuleKind::Block | RuleKind::Exception => {
                    let id = set.rules.len() as u32;
                    let pattern = rule.pattern.as_ref().expect("network rule has a pattern");
                    if rule.kind == RuleKind::Block {
                        set.stats.block += 1;
                        set.blocks.insert(id, pattern);
                    } else {
                        set.stats.exception += 1;
                        set.exceptions.insert(id, pattern);
                    }
                    set.rules.push(rule);
                }
            }
        }
        set
    }

    /// Parses and compiles filter-list text lines.
    pub fn from_lines<'a, I>(lines: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::compile(lines.into_iter().map(crate::parse_line))
    }

    pub fn stats(&self) -> CompileStats {
        self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Network rules retained for matching, in list order.
    pub fn rules(&self) -> &[FilterRule] {
        &self.rules
    }

    pub fn match_request(&self, req: &RequestContext) -> MatchVerdict {
        if self.rules.is_empty() {
            return MatchVerdict::no_match();
        }
        let folded = req.url().to_ascii_lowercase();
        let tokens = url_tokens(&folded);
        let third_party = req.is_third_party();

        let first_hit = |index: &TokenIndex| {
            index
                .candidates(&tokens)
                .into_iter()
                .map(|id| &self.rules[id as usize])
                .find(|rule| self.rule_applies(rule, req, &folded, third_party))
        };

        let Some(block) = first_hit(&self.blocks) else {
            return MatchVerdict::no_match();
        };
        match first_hit(&self.exceptions) {
            Some(exc) => MatchVerdict {
                decision: Decision::AllowedByException,
                matched_rule: Some(exc.clone()),
            },
            None => MatchVerdict {
                decision: Decision::Blocked,
                matched_rule: Some(block.clone()),
            },
        }
    }

    fn rule_applies(&self, rule: &FilterRule, req: &RequestContext, folded: &str, third_party: bool) -> bool {
        let opts = &rule.options;
        if !opts.applies_to_type(req.resource_type())
            || !opts.applies_to_party(third_party)
            || !opts.applies_to_origin(req.origin_host())
        {
            return false;
        }
        let pattern = rule.pattern.as_ref().expect("compiled rules carry patterns");
        if opts.match_case {
            pattern.matches(req.url())
        } else {
            pattern.matches(folded)
        }
    }
}

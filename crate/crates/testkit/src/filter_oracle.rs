//! Naive filter matcher: every rule is translated to a regular expression
//! through a fixed table and evaluated on its own, with options checked by a
//! separate straightforward implementation.
//!
//! | rule syntax | regex                                          |
//! |-------------|------------------------------------------------|
//! | `\|\|`      | `^[a-z][a-z0-9+.-]*://(?:[^/?#:]*\.)?`         |
//! | leading `\|`| `^`                                            |
//! | trailing `\|`| `$`                                           |
//! | `*`         | `.*`                                           |
//! | `^`         | `(?:[^A-Za-z0-9_\-.%]\|$)`                     |
//! | other       | escaped literally                              |
//!
//! Matching is case-insensitive (`(?i)`) unless the rule has `match-case`.

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleDecision {
    Blocked,
    AllowedByException,
    NoMatch,
}

#[derive(Debug)]
pub struct OracleRule {
    pub raw: String,
    pub exception: bool,
    regex: Regex,
    types: Option<Vec<&'static str>>,
    party: Option<bool>,
    include: Vec<String>,
    exclude: Vec<String>,
}

const TYPES: [&str; 7] = ["script", "image", "media", "stylesheet", "xmlhttprequest", "subdocument", "other"];

/// Translates one rule from the generated corpus. Returns `None` for lines
/// the oracle does not model (comments and anything with unknown options).
pub fn translate(raw: &str) -> Option<OracleRule> {
    let text = raw.trim();
    if text.is_empty() || text.starts_with('!') {
        return None;
    }
    let (exception, body) = match text.strip_prefix("@@") {
        Some(b) => (true, b),
        None => (false, text),
    };
    let (pat, opts) = match body.rfind('$') {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };

    let mut pos_types = Vec::new();
    let mut neg_types = Vec::new();
    let mut party = None;
    let mut include = Vec::new();
    let mut exclude = Vec::new();
    let mut match_case = false;
    if let Some(opts) = opts {
        for o in opts.split(',') {
            let o = o.trim().to_lowercase();
            if let Some(list) = o.strip_prefix("domain=") {
                for d in list.split('|') {
                    match d.strip_prefix('~') {
                        Some(x) => exclude.push(x.to_string()),
                        None => include.push(d.to_string()),
                    }
                }
            } else if o == "third-party" {
                party = Some(true);
            } else if o == "~third-party" {
                party = Some(false);
            } else if o == "match-case" {
                match_case = true;
            } else if let Some(t) = o.strip_prefix('~') {
                neg_types.push(*TYPES.iter().find(|x| **x == t)?);
            } else {
                pos_types.push(*TYPES.iter().find(|x| **x == o)?);
            }
        }
    }
    let types = if !pos_types.is_empty() {
        Some(pos_types.into_iter().filter(|t| !neg_types.contains(t)).collect())
    } else if !neg_types.is_empty() {
        Some(TYPES.iter().copied().filter(|t| !neg_types.contains(t)).collect())
    } else {
        None
    };

    let mut re = String::new();
    if !match_case {
        re.push_str("(?i)");
    }
    let mut p = pat;
    if let Some(r) = p.strip_prefix("||") {
        re.push_str(r"^[a-z][a-z0-9+.\-]*://(?:[^/?#:]*\.)?");
        p = r;
    } else if let Some(r) = p.strip_prefix('|') {
        re.push('^');
        p = r;
    }
    let end = p.ends_with('|');
    if end {
        p = &p[..p.len() - 1];
    }
    for c in p.chars() {
        match c {
            '*' => re.push_str(".*"),
            '^' => re.push_str(r"(?:[^A-Za-z0-9_\-.%]|$)"),
            _ => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    if end {
        re.push('$');
    }
    Some(OracleRule {
        raw: text.to_string(),
        exception,
        regex: Regex::new(&re).expect("oracle regex"),
        types,
        party,
        include,
        exclude,
    })
}

/// Public-suffix-plus-one for the suffixes the generated corpus uses.
pub fn naive_site(host: &str) -> String {
    let labels: Vec<&str> = host.split('.').collect();
    let keep = if host.ends_with(".co.uk") { 3 } else { 2 };
    if labels.len() <= keep {
        host.to_string()
    } else {
        labels[labels.len() - keep..].join(".")
    }
}

fn covers(host: &str, d: &str) -> Option<usize> {
    (host == d || host.ends_with(&format!(".{d}"))).then_some(d.len())
}

pub fn canonical(url: &str) -> String {
    let mut u = url::Url::parse(url).expect("absolute url");
    u.set_fragment(None);
    u.to_string()
}

impl OracleRule {
    pub fn applies(&self, url: &str, origin: &str, ty: &str) -> bool {
        let url = canonical(url);
        let host = url::Url::parse(&url).unwrap().host_str().unwrap().to_string();
        if let Some(types) = &self.types {
            if !types.contains(&ty) {
                return false;
            }
        }
        if let Some(third) = self.party {
            if (naive_site(&host) != naive_site(origin)) != third {
                return false;
            }
        }
        let best_inc = self.include.iter().filter_map(|d| covers(origin, d)).max();
        let best_exc = self.exclude.iter().filter_map(|d| covers(origin, d)).max();
        let domain_ok = match (best_inc, best_exc) {
            (_, None) => self.include.is_empty() || best_inc.is_some(),
            (None, Some(_)) => false,
            (Some(i), Some(e)) => i > e,
        };
        domain_ok && self.regex.is_match(&url)
    }
}

/// First matching block rule decides; first matching exception overrides.
pub fn verdict<'a>(rules: &'a [OracleRule], url: &str, origin: &str, ty: &str) -> (OracleDecision, Option<&'a str>) {
    let block = rules.iter().find(|r| !r.exception && r.applies(url, origin, ty));
    let Some(block) = block else {
        return (OracleDecision::NoMatch, None);
    };
    match rules.iter().find(|r| r.exception && r.applies(url, origin, ty)) {
        Some(e) => (OracleDecision::AllowedByException, Some(&e.raw)),
        None => (OracleDecision::Blocked, Some(&block.raw)),
    }
}

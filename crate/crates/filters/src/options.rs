use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceType {
    Script,
    Image,
    Media,
    Stylesheet,
    Xmlhttprequest,
    Subdocument,
    Other,
}

impl ResourceType {
    pub const ALL: [ResourceType; 7] = [
        ResourceType::Script,
        ResourceType::Image,
        ResourceType::Media,
        ResourceType::Stylesheet,
        ResourceType::Xmlhttprequest,
        ResourceType::Subdocument,
        ResourceType::Other,
    ];

    pub fn from_option_name(name: &str) -> Option<Self> {
        Some(match name {
            "script" => Self::Script,
            "image" => Self::Image,
            "media" => Self::Media,
            "stylesheet" => Self::Stylesheet,
            "xmlhttprequest" | "xhr" => Self::Xmlhttprequest,
            "subdocument" | "frame" => Self::Subdocument,
            "other" => Self::Other,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Script => "script",
            Self::Image => "image",
            Self::Media => "media",
            Self::Stylesheet => "stylesheet",
            Self::Xmlhttprequest => "xmlhttprequest",
            Self::Subdocument => "subdocument",
            Self::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    #[default]
    Any,
    ThirdParty,
    FirstParty,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleOptions {
    /// Empty means every type.
    pub resource_types: BTreeSet<ResourceType>,
    pub party: Party,
    pub domains_include: BTreeSet<String>,
    pub domains_exclude: BTreeSet<String>,
    pub match_case: bool,
}

fn suffix_match(host: &str, domain: &str) -> bool {
    host == domain
        || (host.len() > domain.len()
            && host.ends_with(domain)
            && host.as_bytes()[host.len() - domain.len() - 1] == b'.')
}

impl RuleOptions {
    pub fn applies_to_type(&self, ty: ResourceType) -> bool {
        self.resource_types.is_empty() || self.resource_types.contains(&ty)
    }

    pub fn applies_to_party(&self, third_party: bool) -> bool {
        match self.party {
            Party::Any => true,
            Party::ThirdParty => third_party,
            Party::FirstParty => !third_party,
        }
    }

    /// `domain=` check against the requesting page's host. The most specific
    /// (longest) listed domain wins when both an include and an exclude apply.
    pub fn applies_to_origin(&self, origin_host: &str) -> bool {
        let longest = |set: &BTreeSet<String>| {
            set.iter()
                .filter(|d| suffix_match(origin_host, d))
                .map(|d| d.len())
                .max()
        };
        let inc = longest(&self.domains_include);
        let exc = longest(&self.domains_exclude);
        match (inc, exc) {
            (_, None) => self.domains_include.is_empty() || inc.is_some(),
            (None, Some(_)) => false,
            (Some(i), Some(e)) => i > e,
        }
    }

    pub(crate) fn parse(text: &str) -> Result<Self, String> {
        let mut opts = RuleOptions::default();
        let mut positive = BTreeSet::new();
        let mut negative = BTreeSet::new();
        let mut party: Option<Party> = None;
        let mut set_party = |p: Party| -> Result<(), String> {
            match party {
                Some(prev) if prev != p => Err("conflicting party options".to_string()),
                _ => {
                    party = Some(p);
                    Ok(())
                }
            }
        };

        for raw in text.split(',') {
            let opt = raw.trim();
            if opt.is_empty() {
                return Err("empty option".into());
            }
            let lower = opt.to_ascii_lowercase();
            if let Some(list) = lower.strip_prefix("domain=") {
                for d in list.split('|') {
                    let (neg, name) = match d.strip_prefix('~') {
                        Some(rest) => (true, rest),
                        None => (false, d),
                    };
                    let name = name.trim().trim_end_matches('.');
                    if name.is_empty() {
                        return Err("empty domain in domain= option".into());
                    }
                    if neg {
                        opts.domains_exclude.insert(name.to_string());
                    } else {
                        opts.domains_include.insert(name.to_string());
                    }
                }
                continue;
            }
            let (neg, name) = match lower.strip_prefix('~') {
                Some(rest) => (true, rest),
                None => (false, lower.as_str()),
            };
            match name {
                "third-party" | "3p" => set_party(if neg { Party::FirstParty } else { Party::ThirdParty })?,
                "first-party" | "1p" => set_party(if neg { Party::ThirdParty } else { Party::FirstParty })?,
                "match-case" if !neg => opts.match_case = true,
                _ => match ResourceType::from_option_name(name) {
                    Some(ty) if neg => {
                        negative.insert(ty);
                    }
                    Some(ty) => {
                        positive.insert(ty);
                    }
                    // `~font` and friends exclude a type outside the supported
                    // set, which leaves the supported set untouched.
                    None if neg && is_known_unmodelled_type(name) => {}
                    None => return Err(format!("unsupported option `{opt}`")),
                },
            }
        }

        if !opts.domains_include.is_disjoint(&opts.domains_exclude) {
            return Err("domain listed as both included and excluded".into());
        }
        opts.party = party.unwrap_or_default();
        opts.resource_types = if !positive.is_empty() {
            positive.difference(&negative).copied().collect()
        } else if !negative.is_empty() {
            ResourceType::ALL
                .iter()
                .copied()
                .filter(|t| !negative.contains(t))
                .collect()
        } else {
            BTreeSet::new()
        };
        if (!positive.is_empty() || !negative.is_empty()) && opts.resource_types.is_empty() {
            return Err("type options exclude every supported type".into());
        }
        Ok(opts)
    }
}

fn is_known_unmodelled_type(name: &str) -> bool {
    matches!(
        name,
        "object" | "object-subrequest" | "font" | "ping" | "websocket" | "webrtc" | "document" | "popup"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn types_and_party() {
        let o = RuleOptions::parse("image,third-party").unwrap();
        assert_eq!(o.resource_types, BTreeSet::from([ResourceType::Image]));
        assert_eq!(o.party, Party::ThirdParty);
        let o = RuleOptions::parse("~third-party").unwrap();
        assert_eq!(o.party, Party::FirstParty);
    }

    #[test]
    fn negated_types_complement() {
        let o = RuleOptions::parse("~image,~script").unwrap();
        assert_eq!(o.resource_types.len(), 5);
        assert!(!o.applies_to_type(ResourceType::Image));
        assert!(o.applies_to_type(ResourceType::Media));
        let o = RuleOptions::parse("~object").unwrap();
        assert!(o.resource_types.is_empty());
    }

    #[test]
    fn unsupported_options_rejected() {
        assert!(RuleOptions::parse("redirect=noop.js").is_err());
        assert!(RuleOptions::parse("csp=script-src 'none'").is_err());
        assert!(RuleOptions::parse("font").is_err());
        assert!(RuleOptions::parse("third-party,~third-party").is_err());
        assert!(RuleOptions::parse("domain=a.com|~a.com").is_err());
        assert!(RuleOptions::parse("image,~image").is_err());
    }

    #[test]
    fn domain_specificity() {
        let o = RuleOptions::parse("domain=example.com|~foo.example.com").unwrap();
        assert!(o.applies_to_origin("example.com"));
        assert!(o.applies_to_origin("www.example.com"));
        assert!(!o.applies_to_origin("foo.example.com"));
        assert!(!o.applies_to_origin("other.com"));
        let o = RuleOptions::parse("domain=~example.com|foo.example.com").unwrap();
        assert!(o.applies_to_origin("foo.example.com"));
        assert!(!o.applies_to_origin("example.com"));
        let o = RuleOptions::parse("domain=~example.com").unwrap();
        assert!(o.applies_to_origin("other.com"));
        assert!(!o.applies_to_origin("a.example.com"));
        assert!(o.applies_to_origin("notexample.com"));
    }
}

use crate::rule::{Pattern, PatternToken};

/// `^` matches one of these, or the end of the URL.
pub(crate) fn is_separator(b: u8) -> bool {
    !(b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b'%'))
}

/// Byte range of the host inside an absolute canonical URL.
pub(crate) fn host_span(url: &str) -> (usize, usize) {
    let start = url.find("://").map(|i| i + 3).unwrap_or(0);
    let end = url[start..]
        .find(['/', '?', '#', ':'])
        .map(|i| start + i)
        .unwrap_or(url.len());
    (start, end)
}

/// Start offsets of `needle` in `hay`, overlapping occurrences included.
fn occurrences<'a>(hay: &'a [u8], needle: &'a [u8]) -> impl Iterator<Item = usize> + 'a {
    let last = hay.len().checked_sub(needle.len());
    (0..last.map_or(0, |l| l + 1)).filter(move |&i| hay[i..].starts_with(needle))
}

impl Pattern {
    /// `url` must already be case-folded when the owning rule is not
    /// `match-case`.
    pub(crate) fn matches(&self, url: &str) -> bool {
        let bytes = url.as_bytes();
        if self.start_anchor {
            return self.match_from(0, bytes, 0);
        }
        if self.domain_anchor {
            let (start, end) = host_span(url);
            return (start..end)
                .filter(|&p| p == start || bytes[p - 1] == b'.')
                .any(|p| self.match_from(0, bytes, p));
        }
        match self.tokens.first() {
            Some(PatternToken::Literal(lit)) => {
                occurrences(bytes, lit.as_bytes()).any(|p| self.match_from(0, bytes, p))
            }
            _ => (0..=bytes.len()).any(|p| self.match_from(0, bytes, p)),
        }
    }

    fn match_from(&self, idx: usize, url: &[u8], pos: usize) -> bool {
        let Some(token) = self.tokens.get(idx) else {
            return !self.end_anchor || pos == url.len();
        };
        match token {
            PatternToken::Literal(lit) => {
                url[pos..].starts_with(lit.as_bytes()) && self.match_from(idx + 1, url, pos + lit.len())
            }
            PatternToken::Separator => {
                if pos == url.len() {
                    self.match_from(idx + 1, url, pos)
                } else {
                    is_separator(url[pos]) && self.match_from(idx + 1, url, pos + 1)
                }
            }
            PatternToken::Wildcard => match self.tokens.get(idx + 1) {
                // jump straight to candidate occurrences of the next literal
                Some(PatternToken::Literal(next)) => occurrences(&url[pos..], next.as_bytes())
                    .any(|off| self.match_from(idx + 1, url, pos + off)),
                _ => (pos..=url.len()).any(|p| self.match_from(idx + 1, url, p)),
            },
        }
    }
}

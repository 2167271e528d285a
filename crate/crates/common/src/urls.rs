use serde::{Deserialize, Serialize};
use url::Url;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum UrlError {
    #[error("not a URL: {0}")]
    Parse(String),
    #[error("unsupported scheme `{scheme}` in {url}")]
    Scheme { scheme: String, url: String },
}

fn parse_http(raw: &str) -> Result<Url, UrlError> {
    let url = Url::parse(raw.trim()).map_err(|e| UrlError::Parse(format!("{raw}: {e}")))?;
    match url.scheme() {
        "http" | "https" => {}
        other => {
            return Err(UrlError::Scheme {
                scheme: other.to_string(),
                url: raw.to_string(),
            })
        }
    }
    if url.host_str().is_none() {
        return Err(UrlError::Parse(format!("{raw}: missing host")));
    }
    Ok(url)
}

/// Lowercases scheme and host, drops userinfo and the fragment, keeps the
/// query verbatim.
pub fn canonicalize_url(raw: &str) -> Result<String, UrlError> {
    let mut url = parse_http(raw)?;
    url.set_fragment(None);
    let _ = url.set_username("");
    let _ = url.set_password(None);
    Ok(url.to_string())
}

/// Host of an absolute http(s) URL, lowercased.
pub fn host_of(raw: &str) -> Result<String, UrlError> {
    let url = parse_http(raw)?;
    Ok(url.host_str().unwrap_or_default().to_ascii_lowercase())
}

/// Query parameter names that vary between otherwise identical requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VolatileParams(Vec<String>);

impl Default for VolatileParams {
    fn default() -> Self {
        Self(
            ["t", "ts", "_", "cb", "rnd", "sid", "sessionid"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    }
}

impl VolatileParams {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(names.into_iter().map(Into::into).collect())
    }

    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|n| n.eq_ignore_ascii_case(name))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    /// Removes volatile `name[=value]` pairs from a raw query string,
    /// preserving the byte form and order of the rest.
    pub fn strip_query(&self, query: &str) -> String {
        query
            .split('&')
            .filter(|pair| {
                if pair.is_empty() {
                    return false;
                }
                let name = pair.split('=').next().unwrap_or_default();
                let decoded = url::form_urlencoded::parse(name.as_bytes())
                    .next()
                    .map(|(k, _)| k.into_owned())
                    .unwrap_or_default();
                !self.contains(&decoded)
            })
            .collect::<Vec<_>>()
            .join("&")
    }
}

/// Request identity used by the archive and by resource diffing:
/// `"<METHOD> <canonical url>"` with volatile query parameters removed.
pub fn canonical_key(method: &str, raw_url: &str, volatile: &VolatileParams) -> Result<String, UrlError> {
    let mut url = parse_http(raw_url)?;
    url.set_fragment(None);
    let _ = url.set_username("");
    let _ = url.set_password(None);
    if let Some(q) = url.query().map(str::to_string) {
        let kept = volatile.strip_query(&q);
        url.set_query(if kept.is_empty() { None } else { Some(&kept) });
    }
    Ok(format!("{} {}", method.to_ascii_uppercase(), url))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization_lowercases_host_and_drops_fragment() {
        assert_eq!(
            canonicalize_url("HTTP://Ads.Example.COM/X.js?Q=1#frag").unwrap(),
            "http://ads.example.com/X.js?Q=1"
        );
        assert_eq!(
            canonicalize_url("https://user:pw@site.com/a").unwrap(),
            "https://site.com/a"
        );
    }

    #[test]
    fn non_http_rejected() {
        assert!(matches!(
            canonicalize_url("ftp://x.com/"),
            Err(UrlError::Scheme { .. })
        ));
        assert!(canonicalize_url("/relative").is_err());
    }

    #[test]
    fn volatile_params_stripped_from_key() {
        let v = VolatileParams::default();
        assert_eq!(
            canonical_key("get", "http://a.com/p?x=1&ts=99&cb=4&y=2", &v).unwrap(),
            "GET http://a.com/p?x=1&y=2"
        );
        assert_eq!(
            canonical_key("GET", "http://a.com/p?_=123", &v).unwrap(),
            "GET http://a.com/p"
        );
        assert_eq!(
            canonical_key("GET", "http://a.com/p?sessionid=abc#x", &VolatileParams::none()).unwrap(),
            "GET http://a.com/p?sessionid=abc"
        );
    }

    #[test]
    fn host_extraction() {
        assert_eq!(host_of("http://WWW.Site.com:8080/x").unwrap(), "www.site.com");
    }
}

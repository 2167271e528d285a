use std::net::IpAddr;

/// Registrable domain (public suffix plus one label) of `host`.
///
/// IP literals, single-label hosts and hosts that are themselves a public
/// suffix map to the host itself so that every host has exactly one site.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    let bare = host.trim_start_matches('[').trim_end_matches(']');
    if bare.parse::<IpAddr>().is_ok() {
        return host;
    }
    match psl::domain_str(&host) {
        Some(d) => d.to_string(),
        None => host,
    }
}

pub fn is_same_site(a: &str, b: &str) -> bool {
    registrable_domain(a) == registrable_domain(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_suffixes() {
        assert_eq!(registrable_domain("ads.example.com"), "example.com");
        assert_eq!(registrable_domain("a.b.example.co.uk"), "example.co.uk");
        assert_eq!(registrable_domain("Example.COM"), "example.com");
        assert_eq!(registrable_domain("news.site"), "news.site");
    }

    #[test]
    fn degenerate_hosts_map_to_themselves() {
        assert_eq!(registrable_domain("127.0.0.1"), "127.0.0.1");
        assert_eq!(registrable_domain("localhost"), "localhost");
        assert_eq!(registrable_domain("co.uk"), "co.uk");
    }

    #[test]
    fn unknown_tld_uses_default_rule() {
        assert_eq!(registrable_domain("dropdown.fixture.test"), "fixture.test");
        assert!(is_same_site("a.fixture.test", "b.fixture.test"));
        assert!(!is_same_site("cdn.com", "ok.com"));
    }
}

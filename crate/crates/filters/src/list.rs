use crate::rule::{parse_line, FilterRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ListFormat {
    /// Adblock Plus / EasyList syntax.
    #[default]
    Adblock,
    /// hosts-file style `127.0.0.1 domain`; each entry becomes `||domain^`.
    Hosts,
}

pub fn parse_list(text: &str, format: ListFormat) -> Vec<FilterRule> {
    match format {
        ListFormat::Adblock => text.lines().map(parse_line).collect(),
        ListFormat::Hosts => text.lines().filter_map(parse_hosts_line).collect(),
    }
}

/// Converts one hosts-file line; comments, blanks and loopback self-entries
/// yield `None`.
pub fn parse_hosts_line(line: &str) -> Option<FilterRule> {
    let content = line.split('#').next().unwrap_or_default().trim();
    let mut fields = content.split_whitespace();
    let first = fields.next()?;
    let domain = match fields.next() {
        Some(d) if first.parse::<std::net::IpAddr>().is_ok() => d,
        None if !first.contains(['/', '|', '^']) => first,
        _ => return Some(parse_line(content)),
    };
    let domain = domain.trim_end_matches('.').to_ascii_lowercase();
    if matches!(domain.as_str(), "localhost" | "localhost.localdomain" | "local" | "broadcasthost" | "0.0.0.0") {
        return None;
    }
    Some(parse_line(&format!("||{domain}^")))
}

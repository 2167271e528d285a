use serde::{Deserialize, Serialize};

use crate::dom::{Dom, NodeId};

pub const DEFAULT_SNAPSHOT_DEPTH: usize = 4;

/// Normalized serialization of the subtree rooted `depth` ancestor levels
/// above an interaction target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomSnapshot {
    pub target_xpath: String,
    pub depth: usize,
    pub serialized: String,
}

impl DomSnapshot {
    pub fn capture(dom: &Dom, target: NodeId, target_xpath: &str, depth: usize) -> Self {
        let root = dom.ancestor(target, depth);
        Self {
            target_xpath: target_xpath.to_string(),
            depth,
            serialized: dom.normalized(root),
        }
    }

    /// Snapshot taken after an interaction moved the top document elsewhere.
    pub fn navigated(target_xpath: &str, depth: usize, url: &str) -> Self {
        Self {
            target_xpath: target_xpath.to_string(),
            depth,
            serialized: format!("[navigated] {url}\n"),
        }
    }

    /// Normalizes raw outer HTML captured from a live browser.
    pub fn from_markup(target_xpath: &str, depth: usize, markup: &str) -> Self {
        let dom = Dom::parse(markup);
        let body = dom.body().unwrap_or(Dom::ROOT);
        let root = dom.children(body).iter().copied().find(|&c| dom.element(c).is_some()).unwrap_or(body);
        Self {
            target_xpath: target_xpath.to_string(),
            depth,
            serialized: dom.normalized(root),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum DomChange {
    AttributeChanged {
        line: usize,
        element: String,
        name: String,
        old: Option<String>,
        new: Option<String>,
    },
    Removed {
        line: usize,
        text: String,
    },
    Inserted {
        line: usize,
        text: String,
    },
}

fn parse_open_tag(line: &str) -> Option<(String, Vec<(String, String)>)> {
    let t = line.trim();
    let inner = t.strip_prefix('<')?.strip_suffix('>')?;
    if inner.starts_with('/') {
        return None;
    }
    let (name, mut rest) = inner.split_once(' ').unwrap_or((inner, ""));
    let mut attrs = Vec::new();
    while let Some(eq) = rest.find("=\"") {
        let key = rest[..eq].trim().to_string();
        let after = &rest[eq + 2..];
        let end = after.find('"')?;
        attrs.push((key, after[..end].to_string()));
        rest = &after[end + 1..];
    }
    Some((name.to_string(), attrs))
}

fn lcs_table(a: &[&str], b: &[&str]) -> Vec<Vec<u32>> {
    let mut t = vec![vec![0u32; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] {
                t[i + 1][j + 1] + 1
            } else {
                t[i + 1][j].max(t[i][j + 1])
            };
        }
    }
    t
}

fn flush(del: &mut Vec<(usize, &str)>, ins: &mut Vec<(usize, &str)>, out: &mut Vec<DomChange>) {
    let paired = del.len().min(ins.len());
    for k in 0..paired {
        let (dl, dt) = del[k];
        let (il, it) = ins[k];
        match (parse_open_tag(dt), parse_open_tag(it)) {
            (Some((dn, da)), Some((inn, ia))) if dn == inn => {
                let mut names: Vec<&String> = da.iter().chain(ia.iter()).map(|(k, _)| k).collect();
                names.sort();
                names.dedup();
                for name in names {
                    let old = da.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone());
                    let new = ia.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone());
                    if old != new {
                        out.push(DomChange::AttributeChanged {
                            line: il,
                            element: dn.clone(),
                            name: name.clone(),
                            old,
                            new,
                        });
                    }
                }
            }
            _ => {
                out.push(DomChange::Removed { line: dl, text: dt.trim().to_string() });
                out.push(DomChange::Inserted { line: il, text: it.trim().to_string() });
            }
        }
    }
    for &(l, t) in &del[paired..] {
        out.push(DomChange::Removed { line: l, text: t.trim().to_string() });
    }
    for &(l, t) in &ins[paired..] {
        out.push(DomChange::Inserted { line: l, text: t.trim().to_string() });
    }
    del.clear();
    ins.clear();
}

/// Line-level LCS diff of two snapshots; replaced open-tag lines of the same
/// element are refined into per-attribute changes. Line numbers are 1-based
/// (old side for removals, new side otherwise).
pub fn diff_snapshots(before: &DomSnapshot, after: &DomSnapshot) -> Vec<DomChange> {
    let a: Vec<&str> = before.serialized.lines().collect();
    let b: Vec<&str> = after.serialized.lines().collect();
    let t = lcs_table(&a, &b);
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    let mut del = Vec::new();
    let mut ins = Vec::new();
    while i < a.len() || j < b.len() {
        if i < a.len() && j < b.len() && a[i] == b[j] {
            flush(&mut del, &mut ins, &mut out);
            i += 1;
            j += 1;
        } else if j < b.len() && (i == a.len() || t[i][j + 1] >= t[i + 1][j]) {
            ins.push((j + 1, b[j]));
            j += 1;
        } else {
            del.push((i + 1, a[i]));
            i += 1;
        }
    }
    flush(&mut del, &mut ins, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(s: &str) -> DomSnapshot {
        DomSnapshot {
            target_xpath: "/x".into(),
            depth: 4,
            serialized: s.to_string(),
        }
    }

    #[test]
    fn identical_snapshots_have_no_changes() {
        let s = snap("<div>\n  \"x\"\n</div>\n");
        assert!(diff_snapshots(&s, &s).is_empty());
    }

    #[test]
    fn attribute_refinement() {
        let a = snap("<div>\n  <summary aria-expanded=\"false\" class=\"c\">\n  </summary>\n</div>\n");
        let b = snap("<div>\n  <summary aria-expanded=\"true\" class=\"c\">\n  </summary>\n</div>\n");
        assert_eq!(
            diff_snapshots(&a, &b),
            vec![DomChange::AttributeChanged {
                line: 2,
                element: "summary".into(),
                name: "aria-expanded".into(),
                old: Some("false".into()),
                new: Some("true".into()),
            }]
        );
    }

    #[test]
    fn insertions_and_removals() {
        let a = snap("<ul>\n  <li>\n  </li>\n</ul>\n");
        let b = snap("<ul>\n  <li>\n  </li>\n  <li>\n    \"new\"\n  </li>\n</ul>\n");
        let d = diff_snapshots(&a, &b);
        assert!(d.iter().all(|c| matches!(c, DomChange::Inserted { .. })), "{d:?}");
        assert_eq!(d.len(), 3);
        let back = diff_snapshots(&b, &a);
        assert!(back.iter().all(|c| matches!(c, DomChange::Removed { .. })));
    }

    #[test]
    fn open_tag_parsing_handles_escaped_values() {
        let (name, attrs) = parse_open_tag("  <a href=\"/x?a=1&amp;b=2\" title=\"\">").unwrap();
        assert_eq!(name, "a");
        assert_eq!(attrs, vec![("href".into(), "/x?a=1&amp;b=2".into()), ("title".into(), String::new())]);
        assert!(parse_open_tag("</a>").is_none());
    }
}

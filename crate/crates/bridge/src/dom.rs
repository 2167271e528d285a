//! Mutable arena DOM used by the fixture driver and for normalizing markup
//! captured from a live browser.

use scraper::{Html, Node as HtmlNode};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Document,
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    kind: NodeKind,
}

const VOID: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];

#[derive(Debug, Clone)]
pub struct Dom {
    nodes: Vec<Node>,
}

impl Dom {
    pub const ROOT: NodeId = 0;

    pub fn parse(html: &str) -> Self {
        let doc = Html::parse_document(html);
        let mut dom = Dom {
            nodes: vec![Node {
                parent: None,
                children: Vec::new(),
                kind: NodeKind::Document,
            }],
        };
        for child in doc.tree.root().children() {
            dom.import(Self::ROOT, child);
        }
        dom
    }

    fn import(&mut self, parent: NodeId, node: ego_tree::NodeRef<'_, HtmlNode>) {
        let kind = match node.value() {
            HtmlNode::Element(el) => NodeKind::Element(Element {
                name: el.name().to_ascii_lowercase(),
                attrs: el.attrs().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            }),
            HtmlNode::Text(t) => NodeKind::Text(t.to_string()),
            _ => return,
        };
        let id = self.push(parent, kind);
        for child in node.children() {
            self.import(id, child);
        }
    }

    fn push(&mut self, parent: NodeId, kind: NodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            kind,
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Parses `html` as a fragment and appends its nodes under `parent`.
    /// Returns the ids of the inserted elements in document order.
    pub fn append_html(&mut self, parent: NodeId, html: &str) -> Vec<NodeId> {
        let frag = Html::parse_fragment(html);
        let holder = frag
            .tree
            .root()
            .children()
            .find(|n| matches!(n.value(), HtmlNode::Element(e) if e.name() == "html"));
        let first_new = self.nodes.len();
        if let Some(holder) = holder {
            for child in holder.children() {
                self.import(parent, child);
            }
        }
        (first_new..self.nodes.len()).filter(|&id| self.element(id).is_some()).collect()
    }

    pub fn append_element(&mut self, parent: NodeId, name: &str, attrs: Vec<(String, String)>) -> NodeId {
        self.push(
            parent,
            NodeKind::Element(Element {
                name: name.to_ascii_lowercase(),
                attrs,
            }),
        )
    }

    pub fn append_text(&mut self, parent: NodeId, text: &str) -> NodeId {
        self.push(parent, NodeKind::Text(text.to_string()))
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id].kind
    }

    pub fn element(&self, id: NodeId) -> Option<&Element> {
        match &self.nodes.get(id)?.kind {
            NodeKind::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.element(id)?.attr(name)
    }

    pub fn set_attr(&mut self, id: NodeId, name: &str, value: &str) {
        if let NodeKind::Element(e) = &mut self.nodes[id].kind {
            match e.attrs.iter_mut().find(|(k, _)| k == name) {
                Some((_, v)) => *v = value.to_string(),
                None => e.attrs.push((name.to_string(), value.to_string())),
            }
        }
    }

    pub fn remove_attr(&mut self, id: NodeId, name: &str) {
        if let NodeKind::Element(e) = &mut self.nodes[id].kind {
            e.attrs.retain(|(k, _)| k != name);
        }
    }

    /// Unlinks `id` (and its subtree) from the tree.
    pub fn detach(&mut self, id: NodeId) {
        if let Some(p) = self.nodes[id].parent.take() {
            self.nodes[p].children.retain(|&c| c != id);
        }
    }

    pub fn is_attached(&self, mut id: NodeId) -> bool {
        loop {
            if id == Self::ROOT {
                return true;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// Pre-order traversal of the subtree rooted at `id`.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// All attached elements in document order.
    pub fn elements(&self) -> Vec<NodeId> {
        self.descendants(Self::ROOT)
            .into_iter()
            .filter(|&id| self.element(id).is_some())
            .collect()
    }

    pub fn find_tag(&self, name: &str) -> Option<NodeId> {
        self.elements()
            .into_iter()
            .find(|&id| self.element(id).is_some_and(|e| e.name == name))
    }

    pub fn document_element(&self) -> Option<NodeId> {
        self.find_tag("html")
    }

    pub fn body(&self) -> Option<NodeId> {
        self.find_tag("body")
    }

    pub fn is_inside(&self, id: NodeId, ancestor: NodeId) -> bool {
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.nodes[n].parent;
        }
        false
    }

    /// True when `id` or one of its ancestors carries the `hidden` attribute.
    pub fn is_hidden(&self, id: NodeId) -> bool {
        let mut cur = Some(id);
        while let Some(n) = cur {
            if self.attr(n, "hidden").is_some() {
                return true;
            }
            cur = self.nodes[n].parent;
        }
        false
    }

    /// Element `depth` levels above `id`, stopping at the document element.
    pub fn ancestor(&self, id: NodeId, depth: usize) -> NodeId {
        let mut cur = id;
        for _ in 0..depth {
            match self.nodes[cur].parent {
                Some(p) if self.element(p).is_some() => cur = p,
                _ => break,
            }
        }
        cur
    }

    pub fn text_content(&self, id: NodeId) -> String {
        let mut s = String::new();
        for n in self.descendants(id) {
            if let NodeKind::Text(t) = &self.nodes[n].kind {
                s.push_str(t);
                s.push(' ');
            }
        }
        collapse_ws(&s)
    }

    /// Positional absolute XPath such as `/html/body/div[2]/a`. The index is
    /// written only when the element has same-named siblings.
    pub fn xpath_of(&self, id: NodeId) -> String {
        let mut segments = Vec::new();
        let mut cur = id;
        while let Some(el) = self.element(cur) {
            let Some(parent) = self.nodes[cur].parent else { break };
            let same: Vec<NodeId> = self.nodes[parent]
                .children
                .iter()
                .copied()
                .filter(|&c| self.element(c).is_some_and(|e| e.name == el.name))
                .collect();
            if same.len() > 1 {
                let pos = same.iter().position(|&c| c == cur).unwrap() + 1;
                segments.push(format!("{}[{pos}]", el.name));
            } else {
                segments.push(el.name.clone());
            }
            cur = parent;
        }
        segments.reverse();
        format!("/{}", segments.join("/"))
    }

    pub fn resolve_xpath(&self, xpath: &str) -> Option<NodeId> {
        let mut cur = Self::ROOT;
        for seg in xpath.strip_prefix('/')?.split('/') {
            let (name, index) = match seg.split_once('[') {
                Some((n, rest)) => (n, rest.strip_suffix(']')?.parse::<usize>().ok()?),
                None => (seg, 1),
            };
            cur = self.nodes[cur]
                .children
                .iter()
                .copied()
                .filter(|&c| self.element(c).is_some_and(|e| e.name == name))
                .nth(index.checked_sub(1)?)?;
        }
        (cur != Self::ROOT).then_some(cur)
    }

    /// Markup of the subtree at `id` (attributes in source order).
    pub fn to_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.write_html(id, &mut out);
        out
    }

    fn write_html(&self, id: NodeId, out: &mut String) {
        match &self.nodes[id].kind {
            NodeKind::Document => {
                out.push_str("<!DOCTYPE html>");
                for &c in &self.nodes[id].children {
                    self.write_html(c, out);
                }
            }
            NodeKind::Text(t) => out.push_str(&escape_text(t)),
            NodeKind::Element(e) => {
                out.push('<');
                out.push_str(&e.name);
                for (k, v) in &e.attrs {
                    out.push_str(&format!(" {k}=\"{}\"", escape_attr(v)));
                }
                out.push('>');
                if VOID.contains(&e.name.as_str()) {
                    return;
                }
                for &c in &self.nodes[id].children {
                    self.write_html(c, out);
                }
                out.push_str(&format!("</{}>", e.name));
            }
        }
    }

    /// Normalized, line-oriented serialization used for snapshots: one line
    /// per tag or text node, two-space indentation, attributes sorted by
    /// name, whitespace in text collapsed, empty text dropped.
    pub fn normalized(&self, id: NodeId) -> String {
        let mut lines = Vec::new();
        self.write_normalized(id, 0, &mut lines);
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    fn write_normalized(&self, id: NodeId, depth: usize, lines: &mut Vec<String>) {
        let pad = "  ".repeat(depth);
        match &self.nodes[id].kind {
            NodeKind::Document => {
                for &c in &self.nodes[id].children {
                    self.write_normalized(c, depth, lines);
                }
            }
            NodeKind::Text(t) => {
                let t = collapse_ws(t);
                if !t.is_empty() {
                    lines.push(format!("{pad}\"{}\"", t.replace('\\', "\\\\").replace('"', "\\\"")));
                }
            }
            NodeKind::Element(e) => {
                let mut attrs = e.attrs.clone();
                attrs.sort();
                let mut open = format!("{pad}<{}", e.name);
                for (k, v) in &attrs {
                    open.push_str(&format!(" {k}=\"{}\"", escape_attr(v)));
                }
                open.push('>');
                lines.push(open);
                if VOID.contains(&e.name.as_str()) {
                    return;
                }
                for &c in &self.nodes[id].children {
                    self.write_normalized(c, depth + 1, lines);
                }
                lines.push(format!("{pad}</{}>", e.name));
            }
        }
    }
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn escape_attr(v: &str) -> String {
    v.replace('&', "&amp;").replace('"', "&quot;").replace('\n', "&#10;")
}

fn escape_text(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tiny selector language used by fixture scripts: `tag`, `#id`,
/// `[attr=value]` and combinations such as `summary[aria-controls=Gaming]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    tag: Option<String>,
    id: Option<String>,
    attr: Option<(String, Option<String>)>,
}

impl Selector {
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let (head, attr) = match text.split_once('[') {
            Some((h, rest)) => {
                let inner = rest.strip_suffix(']')?;
                let attr = match inner.split_once('=') {
                    Some((k, v)) => (k.trim().to_string(), Some(v.trim().trim_matches(['"', '\'']).to_string())),
                    None => (inner.trim().to_string(), None),
                };
                (h, Some(attr))
            }
            None => (text, None),
        };
        let (tag, id) = match head.split_once('#') {
            Some((t, id)) => (t, Some(id.to_string())),
            None => (head, None),
        };
        let tag = (!tag.is_empty()).then(|| tag.to_ascii_lowercase());
        if tag.is_none() && id.is_none() && attr.is_none() {
            return None;
        }
        Some(Self { tag, id, attr })
    }

    pub fn matches(&self, dom: &Dom, id: NodeId) -> bool {
        let Some(el) = dom.element(id) else { return false };
        if self.tag.as_ref().is_some_and(|t| *t != el.name) {
            return false;
        }
        if self.id.as_ref().is_some_and(|want| el.attr("id") != Some(want.as_str())) {
            return false;
        }
        match &self.attr {
            Some((k, Some(v))) => el.attr(k) == Some(v.as_str()),
            Some((k, None)) => el.attr(k).is_some(),
            None => true,
        }
    }

    pub fn select(&self, dom: &Dom) -> Vec<NodeId> {
        dom.elements().into_iter().filter(|&n| self.matches(dom, n)).collect()
    }
}

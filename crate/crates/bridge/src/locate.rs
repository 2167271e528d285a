//! Category selectors for interaction targets.

use crate::dom::{Dom, NodeId};
use crate::ElementCategory;

fn input_type(dom: &Dom, id: NodeId) -> Option<String> {
    let el = dom.element(id)?;
    (el.name == "input").then(|| el.attr("type").unwrap_or("text").trim().to_ascii_lowercase())
}

fn is_button(dom: &Dom, id: NodeId) -> bool {
    let Some(el) = dom.element(id) else { return false };
    el.name == "button"
        || matches!(input_type(dom, id).as_deref(), Some("submit" | "button"))
        || el.attr("role") == Some("button")
}

fn is_submit_control(dom: &Dom, id: NodeId) -> bool {
    let Some(el) = dom.element(id) else { return false };
    match el.name.as_str() {
        "button" => matches!(el.attr("type").map(str::to_ascii_lowercase).as_deref(), None | Some("submit")),
        "input" => matches!(input_type(dom, id).as_deref(), Some("submit" | "image")),
        _ => false,
    }
}

fn enclosing_form(dom: &Dom, id: NodeId) -> Option<NodeId> {
    let mut cur = dom.parent(id);
    while let Some(n) = cur {
        if dom.element(n).is_some_and(|e| e.name == "form") {
            return Some(n);
        }
        cur = dom.parent(n);
    }
    None
}

fn matches_category(dom: &Dom, id: NodeId, category: ElementCategory) -> bool {
    let Some(el) = dom.element(id) else { return false };
    match category {
        ElementCategory::Button => is_button(dom, id),
        ElementCategory::Link => el.name == "a" && el.attr("href").is_some_and(|h| !h.trim().is_empty()),
        ElementCategory::Dropdown => {
            el.name == "select"
                || (el.name == "summary" && dom.parent(id).is_some_and(|p| dom.element(p).is_some_and(|e| e.name == "details")))
                || el.attr("aria-expanded").is_some()
        }
        ElementCategory::Input => matches!(input_type(dom, id).as_deref(), Some("text" | "search" | "email")),
        ElementCategory::Login => false,
    }
}

/// Matching elements in document order, skipping hidden ones.
pub fn locate(dom: &Dom, category: ElementCategory) -> Vec<NodeId> {
    let visible = |id: &NodeId| !dom.is_hidden(*id);
    if category == ElementCategory::Login {
        let mut out = Vec::new();
        for pw in dom.elements().into_iter().filter(|&id| input_type(dom, id).as_deref() == Some("password")) {
            out.push(pw);
            if let Some(form) = enclosing_form(dom, pw) {
                out.extend(dom.descendants(form).into_iter().filter(|&d| is_submit_control(dom, d)));
            }
        }
        out.sort_unstable();
        out.dedup();
        let order = dom.elements();
        out.sort_by_key(|id| order.iter().position(|e| e == id));
        return out.into_iter().filter(visible).collect();
    }
    dom.elements()
        .into_iter()
        .filter(|&id| matches_category(dom, id, category))
        .filter(visible)
        .collect()
}

/// True for controls that take keyboard input rather than clicks.
pub fn is_text_entry(dom: &Dom, id: NodeId) -> bool {
    dom.element(id).is_some_and(|e| e.name == "textarea")
        || matches!(
            input_type(dom, id).as_deref(),
            Some("text" | "search" | "email" | "password" | "url" | "tel" | "number")
        )
}

/// Default-action target of a click: the link href, or the form action for a
/// submit control.
pub fn default_navigation(dom: &Dom, id: NodeId) -> Option<String> {
    let mut cur = Some(id);
    while let Some(n) = cur {
        if let Some(el) = dom.element(n) {
            if el.name == "a" {
                if let Some(h) = el.attr("href").filter(|h| !h.trim().is_empty()) {
                    return Some(h.trim().to_string());
                }
            }
        }
        cur = dom.parent(n);
    }
    if is_submit_control(dom, id) {
        let form = enclosing_form(dom, id)?;
        return Some(dom.attr(form, "action").unwrap_or("").trim().to_string());
    }
    None
}

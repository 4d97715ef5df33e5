use super::{UiElement, UiState};
use std::fmt::Write;

const CHECKABLE_CLASSES: &[&str] = &["CheckBox", "Switch", "RadioButton", "ToggleButton", "CheckedTextView"];

fn tag_for(e: &UiElement) -> &'static str {
    let short = e.class_name.rsplit('.').next().unwrap_or("");
    if e.affordances.editable {
        "input"
    } else if CHECKABLE_CLASSES.contains(&short) {
        "checkbox"
    } else if e.affordances.touchable {
        "button"
    } else {
        "p"
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '\n' | '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

/// Renders a state as HTML-like markup, one tag per element, nested by
/// structural path. Leaves take one line; containers open and close on
/// their own lines.
pub fn render_html(state: &UiState) -> String {
    let mut order: Vec<&UiElement> = state.elements.iter().collect();
    order.sort_by(|a, b| {
        a.structural_path
            .cmp(&b.structural_path)
            .then(a.element_id.cmp(&b.element_id))
    });

    // parent = closest earlier element whose path is a proper prefix
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    let mut roots = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for (i, e) in order.iter().enumerate() {
        while let Some(&top) = stack.last() {
            let p = &order[top].structural_path;
            if !p.is_empty() && p.len() < e.structural_path.len() && e.structural_path.starts_with(p) {
                break;
            }
            stack.pop();
        }
        match stack.last() {
            Some(&parent) => children[parent].push(i),
            None => roots.push(i),
        }
        stack.push(i);
    }

    let mut out = String::new();
    for r in roots {
        write_node(&mut out, &order, &children, r, 0);
    }
    out
}

fn write_node(out: &mut String, order: &[&UiElement], children: &[Vec<usize>], idx: usize, depth: usize) {
    let e = order[idx];
    let tag = tag_for(e);
    let indent = "  ".repeat(depth);
    let body = escape(&e.label());
    if children[idx].is_empty() {
        let _ = writeln!(out, "{indent}<{tag} id=\"e{}\">{body}</{tag}>", e.element_id);
    } else {
        let _ = writeln!(out, "{indent}<{tag} id=\"e{}\">{body}", e.element_id);
        for &c in &children[idx] {
            write_node(out, order, children, c, depth + 1);
        }
        let _ = writeln!(out, "{indent}</{tag}>");
    }
}

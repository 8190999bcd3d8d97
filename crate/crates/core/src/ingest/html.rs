//! Label-anchored extraction helpers over parsed HTML.

use scraper::node::Node;
use scraper::{ElementRef, Html, Selector};

const BLOCK_ELEMENTS: &[&str] = &["br", "p", "li", "div", "tr", "ul", "ol", "dd", "dt"];

fn selector(css: &str) -> Selector {
    Selector::parse(css).expect("static selector")
}

/// Text of an element with block boundaries kept as newlines; whitespace
/// inside each line is collapsed.
pub(crate) fn cell_text(el: ElementRef<'_>) -> String {
    let mut raw = String::new();
    collect_text(el, &mut raw);
    raw.lines()
        .map(collapse)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn collect_text(el: ElementRef<'_>, out: &mut String) {
    for child in el.children() {
        if let Node::Text(t) = child.value() {
            out.push_str(t);
        } else if let Some(child) = ElementRef::wrap(child) {
            let block = BLOCK_ELEMENTS.contains(&child.value().name());
            if block {
                out.push('\n');
            }
            collect_text(child, out);
            if block {
                out.push('\n');
            }
        }
    }
}

pub(crate) fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Single-line text of an element.
pub(crate) fn inline_text(el: ElementRef<'_>) -> String {
    collapse(&cell_text(el))
}

/// Canonical form used to compare labels: collapsed, trailing colon
/// removed, lowercase.
pub(crate) fn label_key(s: &str) -> String {
    collapse(s).trim_end_matches(':').trim().to_lowercase()
}

/// Split a multi-valued cell on newlines, commas and semicolons.
pub(crate) fn split_list(text: &str) -> Vec<String> {
    text.split(['\n', ',', ';'])
        .map(collapse)
        .filter(|s| !s.is_empty())
        .collect()
}

/// One label/value row of a key-value table.
#[derive(Debug, Clone)]
pub(crate) struct Pair {
    pub label: String,
    pub value: String,
}

/// Every table whose first row's label cell equals `anchor`, as label/value
/// pairs (`td:contains(Label) + td`). Rows with fewer than two cells are
/// skipped.
pub(crate) fn key_value_tables(doc: &Html, anchor: &str) -> Vec<Vec<Pair>> {
    let tables = selector("table");
    let rows = selector("tr");
    let cells = selector("th, td");
    let anchor = label_key(anchor);
    let mut out = Vec::new();
    for table in doc.select(&tables) {
        let mut pairs = Vec::new();
        for row in table.select(&rows) {
            let row_cells: Vec<ElementRef> = row.select(&cells).collect();
            if let [label, value, ..] = row_cells.as_slice() {
                pairs.push(Pair {
                    label: inline_text(*label),
                    value: cell_text(*value),
                });
            }
        }
        if pairs.first().map(|p| label_key(&p.label)) == Some(anchor.clone()) {
            out.push(pairs);
        }
    }
    out
}

/// A table with one header row.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Every table whose header row has `anchor` as its first column.
pub(crate) fn columnar_tables(doc: &Html, anchor: &str) -> Vec<Grid> {
    let tables = selector("table");
    let rows = selector("tr");
    let cells = selector("th, td");
    let anchor = label_key(anchor);
    let mut out = Vec::new();
    for table in doc.select(&tables) {
        let mut iter = table.select(&rows);
        let Some(header_row) = iter.next() else {
            continue;
        };
        let headers: Vec<String> = header_row.select(&cells).map(inline_text).collect();
        if headers.first().map(|h| label_key(h)) != Some(anchor.clone()) {
            continue;
        }
        let body = iter
            .map(|r| r.select(&cells).map(cell_text).collect::<Vec<_>>())
            .filter(|cells| cells.iter().any(|c| !c.is_empty()))
            .collect();
        out.push(Grid {
            headers,
            rows: body,
        });
    }
    out
}

/// Value of a page-level `Label: value` line found in a paragraph-like
/// element.
pub(crate) fn page_field(doc: &Html, label: &str) -> Option<String> {
    let candidates = selector("p, li, span, div, dd, time, h2, h3, h4");
    for el in doc.select(&candidates) {
        let text = cell_text(el);
        let Some(line) = text.lines().next() else {
            continue;
        };
        let Some(head) = line.get(..label.len()) else {
            continue;
        };
        if !head.eq_ignore_ascii_case(label) {
            continue;
        }
        if let Some(value) = line[label.len()..].trim_start().strip_prefix(':') {
            let value = value.trim();
            if !value.is_empty() {
                return Some(value.to_string());
            }
        }
    }
    None
}

/// Text of every element matching `css`.
pub(crate) fn texts(doc: &Html, css: &str) -> Vec<String> {
    let sel = selector(css);
    doc.select(&sel).map(inline_text).collect()
}

//! Canonical line-delimited rendering of parser output.
//!
//! One JSON object per line with sorted keys: accepted items first, then
//! exclusions, then issues; a failed parse renders as a single `error` line.

use serde::Serialize;
use serde_json::Value;

use super::{Exclusion, Ingested, ParseError, Parsed, ValidationIssue};

/// Tag of one golden line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldenLine {
    Item,
    Excluded,
    Issue,
    Error,
}

impl GoldenLine {
    pub fn key(self) -> &'static str {
        match self {
            GoldenLine::Item => "item",
            GoldenLine::Excluded => "excluded",
            GoldenLine::Issue => "issue",
            GoldenLine::Error => "error",
        }
    }
}

fn line<T: Serialize>(tag: GoldenLine, value: &T) -> String {
    let mut map = serde_json::Map::new();
    map.insert(
        tag.key().to_string(),
        serde_json::to_value(value).expect("domain values serialize"),
    );
    let mut s = Value::Object(map).to_string();
    s.push('\n');
    s
}

fn render_parsed<T: Serialize>(parsed: &Parsed<T>) -> String {
    let mut out = String::new();
    for item in &parsed.items {
        out.push_str(&line(GoldenLine::Item, item));
    }
    for ex in &parsed.excluded {
        out.push_str(&line::<Exclusion>(GoldenLine::Excluded, ex));
    }
    for issue in &parsed.issues {
        out.push_str(&line::<ValidationIssue>(GoldenLine::Issue, issue));
    }
    out
}

/// Render a parse outcome in the golden-file format.
pub fn render_golden(result: &Result<Ingested, ParseError>) -> String {
    match result {
        Ok(Ingested::Records(p)) => render_parsed(p),
        Ok(Ingested::Chipsets(p)) => render_parsed(p),
        Ok(Ingested::Smartphones(p)) => render_parsed(p),
        Ok(Ingested::Updates(p)) => render_parsed(p),
        Ok(Ingested::Bulletins(p)) => render_parsed(p),
        Err(e) => line(GoldenLine::Error, &e.to_string()),
    }
}

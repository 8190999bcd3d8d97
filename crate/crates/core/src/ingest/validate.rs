//! Field-level plausibility rules shared by all parsers.

use std::sync::OnceLock;

use chrono::{Datelike, NaiveDate};
use regex::Regex;

use super::{SourceDocument, ValidationIssue};
use crate::domain::{validate_cve_as_of, CveId, CvssError, CvssScore, EARLIEST_PUBLICATION};

const DATE_FORMATS: &[&str] = &[
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%B %d, %Y",
    "%b %d, %Y",
    "%B %d %Y",
    "%d %B %Y",
    "%d %b %Y",
    "%Y, %B %d",
    "%Y, %b %d",
];

/// Parse a day-granular date in any of the layouts used by the supported
/// vantage points (`2022-03-10`, `March 4, 2024`, `4 March 2024`,
/// `2020, October 02`, ...). An ISO timestamp keeps only its date part.
pub fn parse_calendar_date(raw: &str) -> Option<NaiveDate> {
    let text = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let text = text.trim_end_matches('.');
    if text.len() > 10 && text.as_bytes().get(10) == Some(&b'T') {
        return NaiveDate::parse_from_str(&text[..10], "%Y-%m-%d").ok();
    }
    // chrono accepts short numeric fields, so "June 2019" would otherwise
    // read as June 20 of year 19.
    DATE_FORMATS
        .iter()
        .filter_map(|f| NaiveDate::parse_from_str(text, f).ok())
        .find(|d| d.year() >= 1000 && text.contains(&d.year().to_string()))
}

/// Placeholder text meaning "no value".
pub(crate) fn is_placeholder(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty()
        || [
            "-", "--", "\u{2014}", "\u{2013}", "n/a", "na", "none", "null", "tbd", "no",
        ]
        .iter()
        .any(|p| t.eq_ignore_ascii_case(p))
}

/// Remove bracketed footnote markers such as `[12]`.
pub(crate) fn strip_footnotes(raw: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\[(?:\d+|[a-z]|note \d+)\]").expect("static regex"));
    re.replace_all(raw, "").trim().to_string()
}

pub(crate) fn check_cve(
    entry: Option<usize>,
    field: &str,
    raw: &str,
    doc: &SourceDocument,
) -> Result<CveId, ValidationIssue> {
    let text = raw.trim();
    validate_cve_as_of(text, doc.retrieved_at.year())
        .map_err(|e| ValidationIssue::reject(entry, field, e.rule(), raw))
}

/// Parse a date and require it to lie between `earliest` (when given) and
/// the retrieval date.
pub(crate) fn check_date(
    entry: Option<usize>,
    field: &str,
    raw: &str,
    doc: &SourceDocument,
    earliest: Option<NaiveDate>,
) -> Result<NaiveDate, ValidationIssue> {
    let date = parse_calendar_date(raw)
        .ok_or_else(|| ValidationIssue::reject(entry, field, "date-format", raw))?;
    if date > doc.retrieved_at || earliest.is_some_and(|e| date < e) {
        return Err(ValidationIssue::reject(entry, field, "date-range", raw));
    }
    Ok(date)
}

pub(crate) fn check_publication_date(
    entry: Option<usize>,
    field: &str,
    raw: &str,
    doc: &SourceDocument,
) -> Result<NaiveDate, ValidationIssue> {
    check_date(entry, field, raw, doc, Some(EARLIEST_PUBLICATION))
}

pub(crate) fn check_score(
    entry: Option<usize>,
    field: &str,
    raw: &str,
) -> Result<CvssScore, ValidationIssue> {
    raw.trim().parse::<CvssScore>().map_err(|e| {
        let rule = match e {
            CvssError::NotANumber(_) => "severity-format",
            CvssError::OutOfRange(_) => "severity-range",
        };
        ValidationIssue::reject(entry, field, rule, raw)
    })
}

/// CVSS version from a vector string such as `CVSS:3.1/AV:N/...`.
pub(crate) fn cvss_version_from_vector(vector: &str) -> Option<String> {
    let rest = vector.trim().strip_prefix("CVSS:")?;
    let version = rest.split('/').next()?;
    (!version.is_empty()).then(|| version.to_string())
}

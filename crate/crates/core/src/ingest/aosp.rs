//! Monthly Android security bulletins.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use scraper::Html;

use super::html::{self, split_list};
use super::validate::{check_cve, parse_calendar_date};
use super::{expect_vantage_point, ParseError, Parsed, SourceDocument, ValidationIssue};
use crate::domain::{AospBulletin, EntityError, VantagePoint};

const CVE_COLUMN: &str = "CVE";

fn spl_heading() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(\d{4}-\d{2}-\d{2})\s+security\s+patch\s+level").expect("static regex")
    })
}

/// Parse a bulletin into its security patch level and CVE set.
///
/// The SPL is the earliest `YYYY-MM-DD security patch level` heading; all
/// CVE tables of the bulletin, including manufacturer-attributed sections,
/// contribute to the set. Invalid CVE cells are reported and skipped.
pub fn parse_aosp_bulletin(doc: &SourceDocument) -> Result<Parsed<AospBulletin>, ParseError> {
    expect_vantage_point(doc, &[VantagePoint::AospBulletin], "AOSP bulletin")?;
    let page = Html::parse_document(&doc.body);

    let mut levels = BTreeSet::new();
    for heading in html::texts(&page, "h1, h2, h3, h4") {
        for cap in spl_heading().captures_iter(&heading) {
            let raw = &cap[1];
            let date = parse_calendar_date(raw).ok_or_else(|| ParseError::InvalidField {
                field: "security patch level".into(),
                rule: "date-format".into(),
                raw: raw.to_string(),
            })?;
            levels.insert(date);
        }
    }
    let spl = *levels.first().ok_or(ParseError::MissingSpl)?;
    if spl > doc.retrieved_at {
        return Err(ParseError::InvalidField {
            field: "security patch level".into(),
            rule: "date-range".into(),
            raw: spl.to_string(),
        });
    }

    let mut out = Parsed::default();
    let mut cves = BTreeSet::new();
    let mut index = 0;
    let grids = html::columnar_tables(&page, CVE_COLUMN);
    if grids.is_empty() {
        out.issues
            .push(ValidationIssue::warn(None, "cve", "no-cve-table", ""));
    }
    for grid in grids {
        for row in grid.rows {
            let cell = row.first().map(String::as_str).unwrap_or_default();
            for raw in split_list(cell) {
                match check_cve(Some(index), "cve", &raw, doc) {
                    Ok(cve) => {
                        cves.insert(cve);
                    }
                    Err(issue) => out.issues.push(issue),
                }
            }
            index += 1;
        }
    }
    let bulletin = AospBulletin::new(spl, cves).map_err(|e| match e {
        EntityError::SplNotFirstOfMonth(d) => ParseError::InvalidField {
            field: "security patch level".into(),
            rule: "spl-first-of-month".into(),
            raw: d.to_string(),
        },
        other => ParseError::Malformed(other.to_string()),
    })?;
    out.items.push(bulletin);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn doc(body: &str) -> SourceDocument {
        SourceDocument::new(
            VantagePoint::AospBulletin,
            NaiveDate::from_ymd_opt(2024, 4, 30).unwrap(),
            body,
        )
        .unwrap()
    }

    const TABLE: &str = "<table><tr><th>CVE</th><th>References</th><th>Type</th></tr>\
        <tr><td>CVE-2023-35658</td><td>A-275</td><td>EoP</td></tr>\
        <tr><td>CVE-2023-35658</td><td>A-276</td><td>EoP</td></tr></table>";

    #[test]
    fn duplicate_cves_collapse() {
        let body = format!(
            "<h2>2023-09-01 security patch level vulnerability details</h2>{TABLE}\
             <h2>2023-09-05 security patch level vulnerability details</h2>"
        );
        let parsed = parse_aosp_bulletin(&doc(&body)).unwrap();
        let b = &parsed.items[0];
        assert_eq!(b.spl_date, NaiveDate::from_ymd_opt(2023, 9, 1).unwrap());
        assert_eq!(b.cves.len(), 1);
    }

    #[test]
    fn spl_must_exist_and_be_first_of_month() {
        assert_eq!(
            parse_aosp_bulletin(&doc(TABLE)),
            Err(ParseError::MissingSpl)
        );
        let body = format!("<h2>2023-09-15 security patch level vulnerability details</h2>{TABLE}");
        let err = parse_aosp_bulletin(&doc(&body)).unwrap_err();
        assert!(
            matches!(err, ParseError::InvalidField { ref rule, .. } if rule == "spl-first-of-month")
        );
    }
}

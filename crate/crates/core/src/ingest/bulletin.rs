//! Chipset-manufacturer security bulletins.
//!
//! Each bulletin family is described by a [`Layout`]: where entries live in
//! the page, which labels it uses and which of them are mandatory. Labels
//! not listed in the layout are rejected so that structural changes on the
//! publisher's side surface as issues.

use scraper::Html;

use super::html::{self, label_key, split_list};
use super::validate::{
    check_cve, check_date, check_publication_date, check_score, cvss_version_from_vector,
    is_placeholder,
};
use super::{expect_vantage_point, ParseError, Parsed, SourceDocument, ValidationIssue};
use crate::domain::{ChipsetManufacturer, Source, VantagePoint, VantagePointRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Cve,
    Title,
    Description,
    Component,
    Severity,
    SeverityLabel,
    CvssVector,
    ReportedDate,
    Chipsets,
    Credit,
    InternalSource,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    /// One two-column table per entry; the first row carries the anchor.
    KeyValue,
    /// One row per entry under a header row starting with the anchor.
    Columnar,
}

struct Layout {
    shape: Shape,
    anchor: &'static str,
    labels: &'static [(&'static str, Field)],
    required: &'static [&'static str],
}

const PUBLISHED_LABEL: &str = "Published Date";

const QUALCOMM: Layout = Layout {
    shape: Shape::KeyValue,
    anchor: "CVE ID",
    labels: &[
        ("CVE ID", Field::Cve),
        ("Title", Field::Title),
        ("Description", Field::Description),
        ("Technology Area", Field::Component),
        ("Vulnerability Type", Field::Ignored),
        ("Access Vector", Field::Ignored),
        ("Security Rating", Field::SeverityLabel),
        ("CVSS Rating", Field::Ignored),
        ("CVSS Score", Field::Severity),
        ("CVSS String", Field::CvssVector),
        ("Source", Field::InternalSource),
        ("Date Reported", Field::ReportedDate),
        ("Customer Notified Date", Field::Ignored),
        ("Affected Chipsets", Field::Chipsets),
        ("Acknowledgement", Field::Credit),
    ],
    required: &[
        "CVE ID",
        "Description",
        "Technology Area",
        "Source",
        "Affected Chipsets",
    ],
};

const MEDIATEK: Layout = Layout {
    shape: Shape::Columnar,
    anchor: "CVE",
    labels: &[
        ("CVE", Field::Cve),
        ("Title", Field::Title),
        ("Description", Field::Description),
        ("Severity", Field::SeverityLabel),
        ("CVSS Score", Field::Severity),
        ("Vulnerability Type", Field::Ignored),
        ("CWE", Field::Ignored),
        ("Subcomponent", Field::Component),
        ("Affected Chipsets", Field::Chipsets),
        ("Affected Software Versions", Field::Ignored),
        ("Credit", Field::Credit),
    ],
    required: &[
        "CVE",
        "Title",
        "Severity",
        "Subcomponent",
        "Affected Chipsets",
    ],
};

const SAMSUNG_MOBILE: Layout = Layout {
    shape: Shape::KeyValue,
    anchor: "CVE",
    labels: &[
        ("CVE", Field::Cve),
        ("SVE", Field::Ignored),
        ("Title", Field::Title),
        ("Severity", Field::SeverityLabel),
        ("CVSS Score", Field::Severity),
        ("CVSS Vector", Field::CvssVector),
        ("Component", Field::Component),
        ("Affected Chipsets", Field::Chipsets),
        ("Reported on", Field::ReportedDate),
        ("Disclosure status", Field::Ignored),
        ("Description", Field::Description),
        ("Acknowledgement", Field::Credit),
    ],
    required: &[
        "CVE",
        "Severity",
        "Affected Chipsets",
        "Reported on",
        "Description",
    ],
};

const SAMSUNG_SEMICONDUCTOR: Layout = Layout {
    shape: Shape::Columnar,
    anchor: "CVE ID",
    labels: &[
        ("CVE ID", Field::Cve),
        ("Severity", Field::SeverityLabel),
        ("CVSS Score", Field::Severity),
        ("Affected Products", Field::Chipsets),
        ("Component", Field::Component),
        ("Reported Date", Field::ReportedDate),
        ("Description", Field::Description),
        ("Reporter", Field::Credit),
    ],
    required: &["CVE ID", "Affected Products", "Description"],
};

const UNISOC: Layout = Layout {
    shape: Shape::KeyValue,
    anchor: "CVE",
    labels: &[
        ("CVE", Field::Cve),
        ("Title", Field::Title),
        ("Component", Field::Component),
        ("Severity", Field::SeverityLabel),
        ("CVSS Score", Field::Severity),
        ("CVSS Vector", Field::CvssVector),
        ("Affected Chipsets", Field::Chipsets),
        ("Description", Field::Description),
        ("Reporter", Field::Credit),
    ],
    required: &["CVE", "Component", "Affected Chipsets", "Description"],
};

fn layout_for(vp: VantagePoint) -> Option<&'static Layout> {
    match vp {
        VantagePoint::QualcommBulletin => Some(&QUALCOMM),
        VantagePoint::MediatekBulletin => Some(&MEDIATEK),
        VantagePoint::SamsungMobileBulletin => Some(&SAMSUNG_MOBILE),
        VantagePoint::SamsungSemiconductorBulletin => Some(&SAMSUNG_SEMICONDUCTOR),
        VantagePoint::UnisocBulletin => Some(&UNISOC),
        _ => None,
    }
}

impl Layout {
    fn field(&self, label: &str) -> Option<Field> {
        let key = label_key(label);
        self.labels
            .iter()
            .find(|(l, _)| label_key(l) == key)
            .map(|&(_, f)| f)
    }
}

/// Parse a CM security bulletin into one record per CVE entry.
pub fn parse_cm_bulletin(
    doc: &SourceDocument,
    cm: ChipsetManufacturer,
) -> Result<Parsed<VantagePointRecord>, ParseError> {
    let accepted: Vec<VantagePoint> = VantagePoint::ALL
        .iter()
        .copied()
        .filter(|vp| vp.bulletin_manufacturer() == Some(cm))
        .collect();
    expect_vantage_point(doc, &accepted, &format!("{cm} bulletin"))?;
    let layout = layout_for(doc.vantage_point).expect("bulletin vantage point has a layout");
    let page = Html::parse_document(&doc.body);

    let mut out = Parsed::default();
    let entries = match layout.shape {
        Shape::KeyValue => html::key_value_tables(&page, layout.anchor)
            .into_iter()
            .map(|pairs| pairs.into_iter().map(|p| (p.label, p.value)).collect())
            .collect::<Vec<Vec<(String, String)>>>(),
        Shape::Columnar => {
            let mut entries = Vec::new();
            for grid in html::columnar_tables(&page, layout.anchor) {
                let unknown: Vec<&String> = grid
                    .headers
                    .iter()
                    .filter(|h| layout.field(h).is_none())
                    .collect();
                for h in &unknown {
                    out.issues
                        .push(ValidationIssue::reject(None, "header", "unknown-label", h));
                }
                for row in grid.rows {
                    let pairs = grid.headers.iter().cloned().zip(row).collect();
                    entries.push(pairs);
                }
            }
            entries
        }
    };
    if entries.is_empty() {
        return Err(ParseError::NoEntries {
            anchor: layout.anchor.to_string(),
        });
    }
    let raw_published =
        html::page_field(&page, PUBLISHED_LABEL).ok_or_else(|| ParseError::MissingField {
            field: PUBLISHED_LABEL.to_string(),
        })?;
    let published =
        check_publication_date(None, "publication_date", &raw_published, doc).map_err(|issue| {
            ParseError::InvalidField {
                field: PUBLISHED_LABEL.to_string(),
                rule: issue.rule,
                raw: raw_published.clone(),
            }
        })?;
    // An unknown column taints every row of the table.
    let document_rejected = out.has_rejects();

    for (index, pairs) in entries.iter().enumerate() {
        let (record, issues) = build_record(index, pairs, layout, doc, published);
        let rejected = issues.iter().any(ValidationIssue::is_reject);
        out.issues.extend(issues);
        if let Some(record) = record.filter(|_| !rejected && !document_rejected) {
            out.items.push(record);
        }
    }
    Ok(out)
}

fn build_record(
    index: usize,
    pairs: &[(String, String)],
    layout: &Layout,
    doc: &SourceDocument,
    published: chrono::NaiveDate,
) -> (Option<VantagePointRecord>, Vec<ValidationIssue>) {
    let entry = Some(index);
    let mut issues = Vec::new();
    let mut fields: Vec<(Field, &str)> = Vec::new();
    for (label, value) in pairs {
        match layout.field(label) {
            Some(f) => {
                if !fields.iter().any(|(seen, _)| *seen == f) {
                    fields.push((f, value.as_str()));
                }
            }
            None if layout.shape == Shape::KeyValue => {
                issues.push(ValidationIssue::reject(
                    entry,
                    "label",
                    "unknown-label",
                    label,
                ));
            }
            None => {}
        }
    }
    for required in layout.required {
        let key = label_key(required);
        if !pairs.iter().any(|(l, _)| label_key(l) == key) {
            issues.push(ValidationIssue::reject(
                entry,
                required,
                "missing-label",
                "",
            ));
        }
    }
    let get = |f: Field| fields.iter().find(|(seen, _)| *seen == f).map(|&(_, v)| v);

    let Some(raw_cve) = get(Field::Cve) else {
        return (None, issues);
    };
    let cve = match check_cve(entry, "cve", raw_cve, doc) {
        Ok(c) => c,
        Err(issue) => {
            issues.push(issue);
            return (None, issues);
        }
    };
    let mut record = VantagePointRecord::new(Source::CmBulletin, doc.vantage_point, cve, published);

    record.description = get(Field::Description)
        .or_else(|| get(Field::Title))
        .map(|s| s.replace('\n', " "))
        .unwrap_or_default();
    record.component_raw = get(Field::Component)
        .filter(|v| !is_placeholder(v))
        .map(|v| v.replace('\n', " "));
    record.severity_label = get(Field::SeverityLabel)
        .filter(|v| !is_placeholder(v))
        .map(str::to_string);
    if let Some(raw) = get(Field::Severity).filter(|v| !is_placeholder(v)) {
        match check_score(entry, "severity", raw) {
            Ok(score) => record.severity = Some(score),
            Err(issue) => issues.push(issue),
        }
    }
    record.cvss_version = get(Field::CvssVector).and_then(cvss_version_from_vector);
    if let Some(raw) = get(Field::ReportedDate).filter(|v| !is_placeholder(v)) {
        match check_date(entry, "reported_date", raw, doc, None) {
            Ok(d) => record.reported_date = Some(d),
            Err(issue) => issues.push(issue),
        }
    }
    if let Some(raw) = get(Field::Chipsets) {
        record.affected_chipset_strings = split_list(raw);
        if record.affected_chipset_strings.is_empty() {
            issues.push(ValidationIssue::reject(
                entry,
                "affected_chipsets",
                "missing-chipset",
                raw,
            ));
        }
    }
    record.credit = get(Field::Credit)
        .filter(|v| !is_placeholder(v))
        .map(|v| v.replace('\n', ", "));
    if let Some(raw) = get(Field::InternalSource) {
        let lower = raw.to_lowercase();
        if lower.contains("internal") {
            record.internal_flag = Some(true);
        } else if lower.contains("external") {
            record.internal_flag = Some(false);
        } else if !is_placeholder(raw) {
            issues.push(ValidationIssue::reject(
                entry,
                "source",
                "unknown-value",
                raw,
            ));
        }
    }
    (Some(record), issues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn doc(vp: VantagePoint, body: &str) -> SourceDocument {
        SourceDocument::new(vp, NaiveDate::from_ymd_opt(2024, 4, 30).unwrap(), body).unwrap()
    }

    fn qualcomm_entry(cve: &str, area: &str) -> String {
        format!(
            "<table><tr><td>CVE ID</td><td>{cve}</td></tr>\
             <tr><td>Title</td><td>Buffer over-read in WLAN</td></tr>\
             <tr><td>Description</td><td>Memory corruption while parsing frames.</td></tr>\
             <tr><td>Technology Area</td><td>{area}</td></tr>\
             <tr><td>CVSS Score</td><td>7.5</td></tr>\
             <tr><td>CVSS String</td><td>CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:N/A:N</td></tr>\
             <tr><td>Source</td><td>Qualcomm Internal</td></tr>\
             <tr><td>Date Reported</td><td>2023-11-02</td></tr>\
             <tr><td>Affected Chipsets</td><td>SM8475, SM8450</td></tr></table>"
        )
    }

    #[test]
    fn qualcomm_entries_and_bad_cve() {
        let body = format!(
            "<html><body><p>Published Date: March 4, 2024</p>{}{}{}</body></html>",
            qualcomm_entry("CVE-2023-33025", "WLAN Firmware"),
            qualcomm_entry("CVE-20XX-1", "Audio"),
            qualcomm_entry("CVE-2023-28582", "Data Modem"),
        );
        let parsed = parse_cm_bulletin(
            &doc(VantagePoint::QualcommBulletin, &body),
            ChipsetManufacturer::Qualcomm,
        )
        .unwrap();
        assert_eq!(parsed.items.len(), 2);
        assert_eq!(parsed.issues.len(), 1);
        assert_eq!(parsed.issues[0].rule, "cve-pattern");
        assert_eq!(parsed.issues[0].entry, Some(1));
        let r = &parsed.items[0];
        assert_eq!(r.component_raw.as_deref(), Some("WLAN Firmware"));
        assert_eq!(r.internal_flag, Some(true));
        assert_eq!(r.cvss_version.as_deref(), Some("3.1"));
        assert_eq!(
            r.publication_date,
            NaiveDate::from_ymd_opt(2024, 3, 4).unwrap()
        );
        assert_eq!(r.affected_chipset_strings, ["SM8475", "SM8450"]);
        assert_eq!(r.manufacturer, Some(ChipsetManufacturer::Qualcomm));
    }

    #[test]
    fn empty_table_is_a_parse_error() {
        let body =
            "<p>Published Date: 2024-03-04</p><table><tr><th>CVE</th><th>Title</th></tr></table>";
        let err = parse_cm_bulletin(
            &doc(VantagePoint::MediatekBulletin, body),
            ChipsetManufacturer::Mediatek,
        )
        .unwrap_err();
        assert_eq!(
            err,
            ParseError::NoEntries {
                anchor: "CVE".into()
            }
        );
    }

    #[test]
    fn unknown_label_rejects_entry() {
        let body = format!(
            "<p>Published Date: 2024-03-04</p>{}",
            qualcomm_entry("CVE-2023-33025", "WLAN").replace("Title", "Headline")
        );
        let parsed = parse_cm_bulletin(
            &doc(VantagePoint::QualcommBulletin, &body),
            ChipsetManufacturer::Qualcomm,
        )
        .unwrap();
        assert!(parsed.items.is_empty());
        assert_eq!(parsed.issues[0].rule, "unknown-label");
        assert_eq!(parsed.issues[0].raw_value, "Headline");
    }

    #[test]
    fn wrong_manufacturer_is_refused() {
        let err = parse_cm_bulletin(
            &doc(VantagePoint::QualcommBulletin, "<p/>"),
            ChipsetManufacturer::Unisoc,
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::WrongVantagePoint { .. }));
    }
}

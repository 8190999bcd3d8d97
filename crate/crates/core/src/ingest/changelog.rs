//! OEM update changelogs (Samsung, Xiaomi, Tecno).

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use scraper::Html;
use serde::Deserialize;

use super::html::{self, label_key, split_list};
use super::validate::{check_cve, check_date, is_placeholder};
use super::{expect_vantage_point, ParseError, Parsed, SourceDocument, ValidationIssue};
use crate::domain::{CveId, DeviceId, DeviceUpdate, VantagePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Device,
    ReleaseDate,
    Spl,
    Cves,
    Ignored,
}

const SAMSUNG_ANCHOR: &str = "Device";
const SAMSUNG_LABELS: &[(&str, Field)] = &[
    ("Device", Field::Device),
    ("Model Number", Field::Ignored),
    ("Build", Field::Ignored),
    ("Android Version", Field::Ignored),
    ("Release Date", Field::ReleaseDate),
    ("Security Patch Level", Field::Spl),
    ("Fixed CVEs", Field::Cves),
];

const XIAOMI_ANCHOR: &str = "Device";
const XIAOMI_LABELS: &[(&str, Field)] = &[
    ("Device", Field::Device),
    ("Codename", Field::Ignored),
    ("Branch", Field::Ignored),
    ("Version", Field::Ignored),
    ("Android", Field::Ignored),
    ("Size", Field::Ignored),
    ("Release Date", Field::ReleaseDate),
    ("Security Patch", Field::Spl),
    ("Fixed CVEs", Field::Cves),
];

const REQUIRED: &[Field] = &[Field::Device, Field::ReleaseDate];

fn lookup(labels: &[(&str, Field)], label: &str) -> Option<Field> {
    let key = label_key(label);
    labels
        .iter()
        .find(|(l, _)| label_key(l) == key)
        .map(|&(_, f)| f)
}

fn required_label(field: Field) -> &'static str {
    match field {
        Field::Device => "Device",
        _ => "Release Date",
    }
}

/// Parse an OEM changelog into device updates.
///
/// An update may carry explicit CVEs, a security patch level, or both;
/// an update with neither is rejected.
pub fn parse_oem_changelog(
    doc: &SourceDocument,
    oem: &str,
) -> Result<Parsed<DeviceUpdate>, ParseError> {
    let accepted: Vec<VantagePoint> = VantagePoint::ALL
        .iter()
        .copied()
        .filter(|vp| {
            vp.changelog_oem()
                .is_some_and(|o| o.eq_ignore_ascii_case(oem))
        })
        .collect();
    expect_vantage_point(doc, &accepted, &format!("{oem} changelog"))?;
    let oem = doc
        .vantage_point
        .changelog_oem()
        .expect("changelog vantage point");
    match doc.vantage_point {
        VantagePoint::SamsungUpdates => {
            let page = Html::parse_document(&doc.body);
            let entries: Vec<Vec<(String, String)>> = html::key_value_tables(&page, SAMSUNG_ANCHOR)
                .into_iter()
                .map(|t| t.into_iter().map(|p| (p.label, p.value)).collect())
                .collect();
            labelled_entries(doc, oem, SAMSUNG_ANCHOR, SAMSUNG_LABELS, entries, None)
        }
        VantagePoint::XiaomiUpdates => {
            let page = Html::parse_document(&doc.body);
            let mut entries = Vec::new();
            let mut header_issues = Vec::new();
            for grid in html::columnar_tables(&page, XIAOMI_ANCHOR) {
                for h in grid
                    .headers
                    .iter()
                    .filter(|h| lookup(XIAOMI_LABELS, h).is_none())
                {
                    header_issues.push(ValidationIssue::reject(None, "header", "unknown-label", h));
                }
                for row in grid.rows {
                    entries.push(grid.headers.iter().cloned().zip(row).collect());
                }
            }
            labelled_entries(
                doc,
                oem,
                XIAOMI_ANCHOR,
                XIAOMI_LABELS,
                entries,
                Some(header_issues),
            )
        }
        VantagePoint::TecnoUpdates => tecno_updates(doc, oem),
        VantagePoint::TecnoChangesets => tecno_changesets(doc, oem),
        other => unreachable!("{other} is not a changelog"),
    }
}

fn labelled_entries(
    doc: &SourceDocument,
    oem: &str,
    anchor: &str,
    labels: &[(&str, Field)],
    entries: Vec<Vec<(String, String)>>,
    // Columnar layouts report unknown headers once, not per row.
    header_issues: Option<Vec<ValidationIssue>>,
) -> Result<Parsed<DeviceUpdate>, ParseError> {
    let columnar = header_issues.is_some();
    if entries.is_empty() {
        return Err(ParseError::NoEntries {
            anchor: anchor.to_string(),
        });
    }
    let mut out = Parsed {
        issues: header_issues.unwrap_or_default(),
        ..Parsed::default()
    };
    let document_rejected = out.has_rejects();
    for (index, pairs) in entries.into_iter().enumerate() {
        let entry = Some(index);
        let mut issues = Vec::new();
        let mut fields: Vec<(Field, String)> = Vec::new();
        for (label, value) in pairs {
            match lookup(labels, &label) {
                Some(f) if !fields.iter().any(|(seen, _)| *seen == f) => fields.push((f, value)),
                Some(_) => {}
                None if columnar => {}
                None => issues.push(ValidationIssue::reject(
                    entry,
                    "label",
                    "unknown-label",
                    &label,
                )),
            }
        }
        for &required in REQUIRED {
            if !fields.iter().any(|(f, _)| *f == required) {
                issues.push(ValidationIssue::reject(
                    entry,
                    required_label(required),
                    "missing-label",
                    "",
                ));
            }
        }
        let get = |f: Field| {
            fields
                .iter()
                .find(|(seen, _)| *seen == f)
                .map(|(_, v)| v.as_str())
        };
        let update = build_update(
            doc,
            oem,
            entry,
            get(Field::Device),
            get(Field::ReleaseDate),
            get(Field::Spl),
            get(Field::Cves).map(split_list).unwrap_or_default(),
            &mut issues,
        );
        let rejected = issues.iter().any(ValidationIssue::is_reject);
        out.issues.extend(issues);
        if let Some(u) = update.filter(|_| !rejected && !document_rejected) {
            out.items.push(u);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn build_update(
    doc: &SourceDocument,
    oem: &str,
    entry: Option<usize>,
    device: Option<&str>,
    release: Option<&str>,
    spl: Option<&str>,
    cves: Vec<String>,
    issues: &mut Vec<ValidationIssue>,
) -> Option<DeviceUpdate> {
    let device = device?.trim();
    if device.is_empty() {
        issues.push(ValidationIssue::reject(
            entry,
            "device",
            "missing-value",
            "",
        ));
        return None;
    }
    let release = match check_date(entry, "release_date", release?, doc, None) {
        Ok(d) => d,
        Err(issue) => {
            issues.push(issue);
            return None;
        }
    };
    let spl_date = match spl.filter(|s| !is_placeholder(s)) {
        Some(raw) => match check_date(entry, "spl_date", raw, doc, None) {
            Ok(d) => Some(d),
            Err(issue) => {
                issues.push(issue);
                return None;
            }
        },
        None => None,
    };
    let mut explicit = BTreeSet::new();
    for raw in cves {
        match check_cve(entry, "cve", &raw, doc) {
            Ok(c) => {
                explicit.insert(c);
            }
            Err(issue) => issues.push(issue),
        }
    }
    match DeviceUpdate::new(DeviceId::new(oem, device), release, spl_date, explicit) {
        Ok(u) => Some(u),
        Err(_) => {
            issues.push(ValidationIssue::reject(
                entry,
                "evidence",
                "missing-evidence",
                device,
            ));
            None
        }
    }
}

#[derive(Debug, Deserialize)]
struct TecnoUpdates {
    data: Vec<TecnoUpdate>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TecnoUpdate {
    device_name: Option<String>,
    release_date: Option<String>,
    security_patch_level: Option<String>,
    #[serde(default)]
    cve_list: Vec<String>,
}

fn tecno_updates(doc: &SourceDocument, oem: &str) -> Result<Parsed<DeviceUpdate>, ParseError> {
    let feed: TecnoUpdates =
        serde_json::from_str(&doc.body).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let mut out = Parsed::default();
    for (index, u) in feed.data.into_iter().enumerate() {
        let entry = Some(index);
        let mut issues = Vec::new();
        if u.device_name.is_none() {
            issues.push(ValidationIssue::reject(
                entry,
                "deviceName",
                "missing-label",
                "",
            ));
        }
        if u.release_date.is_none() {
            issues.push(ValidationIssue::reject(
                entry,
                "releaseDate",
                "missing-label",
                "",
            ));
        }
        let update = build_update(
            doc,
            oem,
            entry,
            u.device_name.as_deref(),
            u.release_date.as_deref(),
            u.security_patch_level.as_deref(),
            u.cve_list,
            &mut issues,
        );
        let rejected = issues.iter().any(ValidationIssue::is_reject);
        out.issues.extend(issues);
        if let Some(u) = update.filter(|_| !rejected) {
            out.items.push(u);
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct TecnoChangesets {
    data: ChangesetPage,
}

#[derive(Debug, Deserialize)]
struct ChangesetPage {
    list: Vec<Changeset>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Changeset {
    cve_id: Option<String>,
    #[serde(default)]
    device_list: Vec<String>,
    release_date: Option<String>,
}

/// Changesets list one CVE and the devices that received its fix; they are
/// regrouped into one update per (device, release date).
fn tecno_changesets(doc: &SourceDocument, oem: &str) -> Result<Parsed<DeviceUpdate>, ParseError> {
    let feed: TecnoChangesets =
        serde_json::from_str(&doc.body).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let mut out = Parsed::default();
    let mut grouped: BTreeMap<(DeviceId, NaiveDate), BTreeSet<CveId>> = BTreeMap::new();
    for (index, c) in feed.data.list.into_iter().enumerate() {
        let entry = Some(index);
        let Some(raw_cve) = c.cve_id else {
            out.issues
                .push(ValidationIssue::reject(entry, "cveId", "missing-label", ""));
            continue;
        };
        let cve = match check_cve(entry, "cve", &raw_cve, doc) {
            Ok(c) => c,
            Err(issue) => {
                out.issues.push(issue);
                continue;
            }
        };
        let Some(raw_date) = c.release_date else {
            out.issues.push(ValidationIssue::reject(
                entry,
                "releaseDate",
                "missing-label",
                "",
            ));
            continue;
        };
        let date = match check_date(entry, "release_date", &raw_date, doc, None) {
            Ok(d) => d,
            Err(issue) => {
                out.issues.push(issue);
                continue;
            }
        };
        let devices: Vec<&String> = c
            .device_list
            .iter()
            .filter(|d| !d.trim().is_empty())
            .collect();
        if devices.is_empty() {
            out.issues.push(ValidationIssue::reject(
                entry,
                "deviceList",
                "missing-value",
                &raw_cve,
            ));
            continue;
        }
        for d in devices {
            grouped
                .entry((DeviceId::new(oem, d.trim()), date))
                .or_default()
                .insert(cve.clone());
        }
    }
    for ((device, date), cves) in grouped {
        out.items
            .push(DeviceUpdate::new(device, date, None, cves).expect("non-empty CVE set"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(vp: VantagePoint, body: &str) -> SourceDocument {
        SourceDocument::new(vp, NaiveDate::from_ymd_opt(2024, 4, 30).unwrap(), body).unwrap()
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn samsung_update_with_both_evidence_kinds() {
        let body = "<table><tr><td>Device</td><td>Galaxy A41</td></tr>\
            <tr><td>Release Date</td><td>2022-03-10</td></tr>\
            <tr><td>Security Patch Level</td><td>2022-03-01</td></tr>\
            <tr><td>Fixed CVEs</td><td>CVE-2022-0001</td></tr></table>\
            <table><tr><td>Device</td><td>Galaxy A41</td></tr>\
            <tr><td>Release Date</td><td>2022-04-10</td></tr></table>";
        let parsed =
            parse_oem_changelog(&doc(VantagePoint::SamsungUpdates, body), "Samsung").unwrap();
        assert_eq!(parsed.items.len(), 1);
        let u = &parsed.items[0];
        assert_eq!(u.device.as_str(), "samsung-galaxy-a41");
        assert_eq!(u.release_date, d(2022, 3, 10));
        assert_eq!(u.spl_date, Some(d(2022, 3, 1)));
        assert_eq!(u.explicit_cves.len(), 1);
        assert_eq!(parsed.issues.len(), 1);
        assert_eq!(parsed.issues[0].rule, "missing-evidence");
        assert_eq!(parsed.issues[0].entry, Some(1));
    }

    #[test]
    fn tecno_changesets_group_by_device_and_date() {
        let body = r#"{"data":{"year":2022,"quarter":1,"list":[
            {"cveId":"CVE-2022-20001","deviceList":["Spark 8","Camon 18"],"releaseDate":"2022-03-10"},
            {"cveId":"CVE-2022-20002","deviceList":["Spark 8"],"releaseDate":"2022-03-10"},
            {"cveId":"CVE-2022-2","deviceList":["Spark 8"],"releaseDate":"2022-03-10"}]}}"#;
        let parsed =
            parse_oem_changelog(&doc(VantagePoint::TecnoChangesets, body), "Tecno").unwrap();
        assert_eq!(parsed.items.len(), 2);
        let spark = parsed
            .items
            .iter()
            .find(|u| u.device.as_str() == "tecno-spark-8")
            .unwrap();
        assert_eq!(spark.explicit_cves.len(), 2);
        assert_eq!(parsed.issues[0].rule, "cve-pattern");
    }

    #[test]
    fn tecno_update_with_only_spl_is_valid() {
        let body = r#"{"data":[{"deviceName":"TECNO SPARK 8","releaseDate":"2022-03-10","securityPatchLevel":"2022-03-01"}]}"#;
        let parsed = parse_oem_changelog(&doc(VantagePoint::TecnoUpdates, body), "Tecno").unwrap();
        assert_eq!(parsed.items[0].device.as_str(), "tecno-spark-8");
        assert!(parsed.issues.is_empty());
    }
}

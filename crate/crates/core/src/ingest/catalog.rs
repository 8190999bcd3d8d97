//! Device catalog (GSMArena specification sheets).

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use scraper::Html;

use super::chipsets::parse_release_date;
use super::html::{self, label_key};
use super::validate::is_placeholder;
use super::{expect_vantage_point, Exclusion, ParseError, Parsed, SourceDocument, ValidationIssue};
use crate::domain::{
    normalize_chipset_name, ChipsetKey, ChipsetManufacturer, ChipsetModel, SmartphoneModel,
    VantagePoint,
};

/// OEMs without any device released on or after this date are excluded.
pub const OEM_ACTIVITY_SINCE: NaiveDate = match NaiveDate::from_ymd_opt(2022, 1, 1) {
    Some(d) => d,
    None => panic!("invalid constant date"),
};

const ANCHOR: &str = "Brand";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Brand,
    Model,
    Released,
    Chipset,
    Ignored,
}

const LABELS: &[(&str, Field)] = &[
    ("Brand", Field::Brand),
    ("Model", Field::Model),
    ("Announced", Field::Ignored),
    ("Status", Field::Ignored),
    ("Released", Field::Released),
    ("Chipset", Field::Chipset),
    ("CPU", Field::Ignored),
    ("GPU", Field::Ignored),
    ("OS", Field::Ignored),
];

fn lookup(label: &str) -> Option<Field> {
    let key = label_key(label);
    LABELS
        .iter()
        .find(|(l, _)| label_key(l) == key)
        .map(|&(_, f)| f)
}

/// Split a catalog chipset description such as
/// `Qualcomm SM8250 Snapdragon 865 5G (7 nm+)` into the designation used
/// for linking (`SM8250`) and the manufacturer, when recognisable.
///
/// Lines naming a marketing family (`Exynos 990`, `Unisoc Tiger T610`) keep
/// the family word; normalization strips it later.
pub fn extract_chipset(raw: &str) -> Option<(String, Option<ChipsetManufacturer>)> {
    let without_parens: String = {
        let mut depth = 0usize;
        raw.chars()
            .filter(|&c| match c {
                '(' => {
                    depth += 1;
                    false
                }
                ')' => {
                    depth = depth.saturating_sub(1);
                    false
                }
                _ => depth == 0,
            })
            .collect()
    };
    let mut tokens: Vec<&str> = without_parens.split_whitespace().collect();
    if tokens.is_empty() {
        return None;
    }
    let mut vendor = tokens[0].parse::<ChipsetManufacturer>().ok();
    if vendor.is_some() {
        tokens.remove(0);
    }
    let family_vendor = |t: &str| match t.to_ascii_uppercase().as_str() {
        "SNAPDRAGON" => Some(ChipsetManufacturer::Qualcomm),
        "HELIO" | "DIMENSITY" => Some(ChipsetManufacturer::Mediatek),
        "EXYNOS" => Some(ChipsetManufacturer::Samsung),
        "TIGER" => Some(ChipsetManufacturer::Unisoc),
        _ => None,
    };
    match tokens.as_slice() {
        [] => None,
        [family, number, ..] if family_vendor(family).is_some() => {
            vendor = vendor.or(family_vendor(family));
            Some((format!("{family} {number}"), vendor))
        }
        [first, ..] if vendor.is_some() => Some((first.to_string(), vendor)),
        // Unknown vendor: keep the full designation for the unresolved report.
        _ => Some((tokens.join(" "), None)),
    }
}

/// Parse a device catalog. Devices of OEMs that released no model since
/// [`OEM_ACTIVITY_SINCE`] are listed as exclusions, not items.
pub fn parse_device_catalog(doc: &SourceDocument) -> Result<Parsed<SmartphoneModel>, ParseError> {
    expect_vantage_point(doc, &[VantagePoint::GsmArena], "device catalog")?;
    let page = Html::parse_document(&doc.body);
    let mut out = Parsed::default();
    let mut candidates = Vec::new();

    for (index, pairs) in html::key_value_tables(&page, ANCHOR)
        .into_iter()
        .enumerate()
    {
        let entry = Some(index);
        let mut issues = Vec::new();
        let mut fields: Vec<(Field, String)> = Vec::new();
        for p in pairs {
            match lookup(&p.label) {
                Some(f) if !fields.iter().any(|(seen, _)| *seen == f) => fields.push((f, p.value)),
                Some(_) => {}
                None => issues.push(ValidationIssue::reject(
                    entry,
                    "label",
                    "unknown-label",
                    &p.label,
                )),
            }
        }
        let get = |f: Field| {
            fields
                .iter()
                .find(|(seen, _)| *seen == f)
                .map(|(_, v)| v.replace('\n', " "))
                .filter(|v| !is_placeholder(v))
        };
        let brand = get(Field::Brand);
        let model = get(Field::Model);
        if brand.is_none() {
            issues.push(ValidationIssue::reject(entry, "Brand", "missing-value", ""));
        }
        if model.is_none() {
            issues.push(ValidationIssue::reject(entry, "Model", "missing-value", ""));
        }
        let chipset = get(Field::Chipset).and_then(|c| extract_chipset(&c));
        if chipset.is_none() {
            issues.push(ValidationIssue::reject(
                entry,
                "chipset",
                "missing-chipset",
                &get(Field::Chipset).unwrap_or_default(),
            ));
        }
        let released = match get(Field::Released) {
            None => {
                issues.push(ValidationIssue::reject(
                    entry,
                    "release_date",
                    "missing-value",
                    "",
                ));
                None
            }
            Some(raw) => match parse_release_date(&raw) {
                None => {
                    issues.push(ValidationIssue::reject(
                        entry,
                        "release_date",
                        "date-format",
                        &raw,
                    ));
                    None
                }
                Some(d) if d > doc.retrieved_at => {
                    issues.push(ValidationIssue::reject(
                        entry,
                        "release_date",
                        "date-range",
                        &raw,
                    ));
                    None
                }
                Some(d) => Some(d),
            },
        };
        let rejected = issues.iter().any(ValidationIssue::is_reject);
        out.issues.extend(issues);
        if rejected {
            continue;
        }
        let (Some(brand), Some(model), Some((chipset_raw, vendor)), Some(released)) =
            (brand, model, chipset, released)
        else {
            continue;
        };
        candidates.push((
            index,
            SmartphoneModel::new(&brand, &model, &chipset_raw, vendor, released),
        ));
    }

    let active: BTreeSet<String> = candidates
        .iter()
        .filter(|(_, s)| s.release_date >= OEM_ACTIVITY_SINCE)
        .map(|(_, s)| s.oem.to_lowercase())
        .collect();
    for (index, s) in candidates {
        if active.contains(&s.oem.to_lowercase()) {
            out.items.push(s);
        } else {
            out.excluded.push(Exclusion {
                entry: index,
                subject: s.id.to_string(),
                reason: "oem-inactive-since-2022".into(),
            });
        }
    }
    Ok(out)
}

/// Warn about devices released before their chipset. `devices` indices
/// become the issue entry numbers.
pub fn check_release_order(
    devices: &[SmartphoneModel],
    chipsets: &[ChipsetModel],
) -> Vec<ValidationIssue> {
    let released: BTreeMap<ChipsetKey, NaiveDate> = chipsets
        .iter()
        .filter_map(|c| c.release_date.map(|d| (c.key(), d)))
        .collect();
    let mut issues = Vec::new();
    for (index, device) in devices.iter().enumerate() {
        let Ok(n) = normalize_chipset_name(&device.chipset_raw) else {
            continue;
        };
        let earliest = released
            .iter()
            .filter(|(k, _)| {
                k.model_number == n.model_number
                    && device.chipset_vendor.is_none_or(|v| v == k.manufacturer)
            })
            .map(|(_, d)| *d)
            .min();
        if earliest.is_some_and(|d| device.release_date < d) {
            issues.push(ValidationIssue::warn(
                Some(index),
                "release_date",
                "release-before-chipset",
                &device.release_date.to_string(),
            ));
        }
    }
    issues
}

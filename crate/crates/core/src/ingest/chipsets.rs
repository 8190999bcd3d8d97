//! Chipset release-date lists (Wikipedia "List of ... systems on chips").

use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use scraper::Html;

use super::html::{self, label_key};
use super::validate::{is_placeholder, parse_calendar_date, strip_footnotes};
use super::{expect_vantage_point, Exclusion, ParseError, Parsed, SourceDocument, ValidationIssue};
use crate::domain::{normalize_chipset_name, ChipsetManufacturer, ChipsetModel, VantagePoint};

const MODEL_COLUMN: &str = "Model number";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Model,
    ReleaseDate,
    MarketingName,
    Modem,
    Manufacturer,
    Ignored,
}

const COLUMNS: &[(&str, Column)] = &[
    ("Model number", Column::Model),
    ("Release date", Column::ReleaseDate),
    ("Marketing name", Column::MarketingName),
    ("Modem", Column::Modem),
    ("Manufacturer", Column::Manufacturer),
    ("CPU", Column::Ignored),
    ("GPU", Column::Ignored),
    ("DSP", Column::Ignored),
    ("ISP", Column::Ignored),
    ("Fab", Column::Ignored),
    ("Process", Column::Ignored),
    ("Memory", Column::Ignored),
    ("Connectivity", Column::Ignored),
    ("Notes", Column::Ignored),
];

fn column(label: &str) -> Option<Column> {
    let key = label_key(label);
    COLUMNS
        .iter()
        .find(|(l, _)| label_key(l) == key)
        .map(|&(_, c)| c)
}

/// Parse a release date of day, month, quarter or year granularity.
/// Coarser values map to the first day of the period: `Q1 2020` is
/// 2020-01-01, `June 2019` is 2019-06-01.
pub fn parse_release_date(raw: &str) -> Option<NaiveDate> {
    static QUARTER: OnceLock<Regex> = OnceLock::new();
    static YEAR: OnceLock<Regex> = OnceLock::new();
    let text = strip_footnotes(raw);
    let text = text
        .strip_prefix("Released")
        .or_else(|| text.strip_prefix("released"))
        .unwrap_or(&text)
        .trim();
    if let Some(d) = parse_calendar_date(text) {
        return Some(d);
    }
    let quarter = QUARTER.get_or_init(|| {
        Regex::new(r"(?i)^(?:Q([1-4])\s*,?\s*(\d{4})|(\d{4})\s*,?\s*Q([1-4])|([1-4])Q\s*(\d{4}))$")
            .expect("static regex")
    });
    if let Some(c) = quarter.captures(text) {
        let (q, y) = if let (Some(q), Some(y)) = (c.get(1), c.get(2)) {
            (q, y)
        } else if let (Some(y), Some(q)) = (c.get(3), c.get(4)) {
            (q, y)
        } else {
            (c.get(5)?, c.get(6)?)
        };
        let q: u32 = q.as_str().parse().ok()?;
        let y: i32 = y.as_str().parse().ok()?;
        return NaiveDate::from_ymd_opt(y, 3 * (q - 1) + 1, 1);
    }
    for layout in ["%B %Y", "%b %Y", "%Y, %B", "%Y, %b", "%Y-%m"] {
        if let Ok(d) = NaiveDate::parse_from_str(&format!("{text} 1"), &format!("{layout} %d")) {
            return Some(d);
        }
    }
    let year = YEAR.get_or_init(|| Regex::new(r"^(\d{4})$").expect("static regex"));
    let y: i32 = year.captures(text)?[1].parse().ok()?;
    NaiveDate::from_ymd_opt(y, 1, 1)
}

fn manufacturer_from_title(page: &Html) -> Option<ChipsetManufacturer> {
    let titles = html::texts(page, "title, h1");
    for title in titles {
        let lower = title.to_lowercase();
        let found = if lower.contains("qualcomm") || lower.contains("snapdragon") {
            Some(ChipsetManufacturer::Qualcomm)
        } else if lower.contains("mediatek") {
            Some(ChipsetManufacturer::Mediatek)
        } else if lower.contains("exynos") || lower.contains("samsung") {
            Some(ChipsetManufacturer::Samsung)
        } else if lower.contains("unisoc") || lower.contains("spreadtrum") {
            Some(ChipsetManufacturer::Unisoc)
        } else {
            None
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Parse a chipset list into models with release dates. Chipsets whose
/// modem cell is empty are excluded: only parts with an integrated cellular
/// modem are in scope.
pub fn parse_chipset_release_dates(
    doc: &SourceDocument,
) -> Result<Parsed<ChipsetModel>, ParseError> {
    expect_vantage_point(doc, &[VantagePoint::WikipediaChipsets], "chipset list")?;
    let page = Html::parse_document(&doc.body);
    let grids = html::columnar_tables(&page, MODEL_COLUMN);
    if grids.is_empty() {
        return Err(ParseError::NoEntries {
            anchor: MODEL_COLUMN.to_string(),
        });
    }
    let page_cm = manufacturer_from_title(&page);
    let mut out = Parsed::default();
    let mut index = 0;
    for grid in grids {
        let columns: Vec<Option<Column>> = grid.headers.iter().map(|h| column(h)).collect();
        let unknown: Vec<&String> = grid
            .headers
            .iter()
            .zip(&columns)
            .filter(|(_, c)| c.is_none())
            .map(|(h, _)| h)
            .collect();
        for h in &unknown {
            out.issues
                .push(ValidationIssue::reject(None, "header", "unknown-label", h));
        }
        if !columns.contains(&Some(Column::ReleaseDate)) {
            out.issues.push(ValidationIssue::reject(
                None,
                "Release date",
                "missing-label",
                "",
            ));
        }
        let table_rejected = !unknown.is_empty() || !columns.contains(&Some(Column::ReleaseDate));
        for row in grid.rows {
            let entry = Some(index);
            let cell = |c: Column| {
                columns
                    .iter()
                    .position(|x| *x == Some(c))
                    .and_then(|i| row.get(i))
                    .map(|s| strip_footnotes(&s.replace('\n', " ")))
            };
            index += 1;
            if table_rejected {
                continue;
            }
            let raw_models = cell(Column::Model).unwrap_or_default();
            let manufacturer = match cell(Column::Manufacturer).filter(|m| !is_placeholder(m)) {
                Some(m) => match m.parse::<ChipsetManufacturer>() {
                    Ok(cm) => Some(cm),
                    Err(_) => {
                        out.issues.push(ValidationIssue::reject(
                            entry,
                            "manufacturer",
                            "unknown-value",
                            &m,
                        ));
                        continue;
                    }
                },
                None => page_cm,
            };
            let Some(manufacturer) = manufacturer else {
                out.issues.push(ValidationIssue::reject(
                    entry,
                    "manufacturer",
                    "missing-value",
                    &raw_models,
                ));
                continue;
            };
            let raw_date = cell(Column::ReleaseDate).unwrap_or_default();
            if is_placeholder(&raw_date) {
                out.issues.push(ValidationIssue::reject(
                    entry,
                    "release_date",
                    "missing-value",
                    &raw_date,
                ));
                continue;
            }
            let Some(release) = parse_release_date(&raw_date) else {
                out.issues.push(ValidationIssue::reject(
                    entry,
                    "release_date",
                    "date-format",
                    &raw_date,
                ));
                continue;
            };
            if release > doc.retrieved_at {
                out.issues.push(ValidationIssue::reject(
                    entry,
                    "release_date",
                    "date-range",
                    &raw_date,
                ));
                continue;
            }
            if let Some(modem) = cell(Column::Modem) {
                if is_placeholder(&modem) {
                    out.excluded.push(Exclusion {
                        entry: index - 1,
                        subject: raw_models.clone(),
                        reason: "no-cellular-modem".into(),
                    });
                    continue;
                }
            }
            let marketing = cell(Column::MarketingName).filter(|m| !is_placeholder(m));
            let models: Vec<&str> = raw_models
                .split(['/', ','])
                .map(str::trim)
                .filter(|m| !m.is_empty())
                .collect();
            if models.is_empty() {
                out.issues.push(ValidationIssue::reject(
                    entry,
                    "model_number",
                    "missing-value",
                    "",
                ));
                continue;
            }
            for raw in models {
                match normalize_chipset_name(raw) {
                    Ok(n) => out.items.push(ChipsetModel {
                        manufacturer,
                        model_number: n.model_number,
                        release_date: Some(release),
                        marketing_name: marketing.clone().or(n.marketing_name),
                    }),
                    Err(_) => out.issues.push(ValidationIssue::reject(
                        entry,
                        "model_number",
                        "chipset-normalization",
                        raw,
                    )),
                }
            }
        }
    }
    Ok(out)
}

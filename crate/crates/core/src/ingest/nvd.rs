//! NVD CVE API 2.0 documents holding a single CVE.

use std::collections::BTreeSet;

use serde::Deserialize;

use super::validate::{check_cve, check_publication_date, check_score};
use super::{expect_vantage_point, ParseError, Parsed, SourceDocument, ValidationIssue};
use crate::domain::{ChipsetManufacturer, Source, VantagePoint, VantagePointRecord};

/// Score source considered NIST's own analysis.
const NIST_SOURCE: &str = "nvd@nist.gov";

#[derive(Debug, Deserialize)]
struct Feed {
    vulnerabilities: Vec<Item>,
}

#[derive(Debug, Deserialize)]
struct Item {
    cve: Cve,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Cve {
    id: String,
    published: String,
    #[serde(default)]
    descriptions: Vec<Description>,
    #[serde(default)]
    metrics: Metrics,
    #[serde(default)]
    configurations: Vec<Configuration>,
}

#[derive(Debug, Deserialize)]
struct Description {
    lang: String,
    value: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Metrics {
    #[serde(default)]
    cvss_metric_v31: Vec<Metric>,
    #[serde(default)]
    cvss_metric_v30: Vec<Metric>,
    #[serde(default)]
    cvss_metric_v2: Vec<Metric>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Metric {
    source: String,
    cvss_data: CvssData,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CvssData {
    version: String,
    base_score: serde_json::Number,
}

#[derive(Debug, Deserialize)]
struct Configuration {
    #[serde(default)]
    nodes: Vec<Node>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Node {
    #[serde(default)]
    cpe_match: Vec<CpeMatch>,
}

#[derive(Debug, Deserialize)]
struct CpeMatch {
    #[serde(default)]
    vulnerable: bool,
    criteria: String,
}

/// Parse a single-CVE NVD document.
///
/// NIST's primary score is used; v3.x is preferred over v2. Chipset strings
/// come from vulnerable hardware/firmware CPEs of the four chipset vendors.
pub fn parse_nvd_record(doc: &SourceDocument) -> Result<Parsed<VantagePointRecord>, ParseError> {
    expect_vantage_point(doc, &[VantagePoint::Nvd], "NVD")?;
    let feed: Feed =
        serde_json::from_str(&doc.body).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let [item] = <[Item; 1]>::try_from(feed.vulnerabilities).map_err(|v| {
        ParseError::Malformed(format!(
            "expected exactly one vulnerability, found {}",
            v.len()
        ))
    })?;
    let cve = item.cve;
    let entry = Some(0);
    let mut out = Parsed::default();

    let id = match check_cve(entry, "cve", &cve.id, doc) {
        Ok(id) => id,
        Err(issue) => {
            out.issues.push(issue);
            return Ok(out);
        }
    };
    let published = match check_publication_date(entry, "publication_date", &cve.published, doc) {
        Ok(d) => d,
        Err(issue) => {
            out.issues.push(issue);
            return Ok(out);
        }
    };
    let mut record = VantagePointRecord::new(Source::Nvd, VantagePoint::Nvd, id, published);
    record.description = cve
        .descriptions
        .iter()
        .find(|d| d.lang == "en")
        .or(cve.descriptions.first())
        .map(|d| d.value.trim().to_string())
        .unwrap_or_default();

    let primary = [
        &cve.metrics.cvss_metric_v31,
        &cve.metrics.cvss_metric_v30,
        &cve.metrics.cvss_metric_v2,
    ]
    .into_iter()
    .find_map(|list| list.iter().find(|m| m.source == NIST_SOURCE));
    let mut rejected = false;
    if let Some(metric) = primary {
        match check_score(entry, "severity", &metric.cvss_data.base_score.to_string()) {
            Ok(score) => {
                record.severity = Some(score);
                record.cvss_version = Some(metric.cvss_data.version.clone());
            }
            Err(issue) => {
                out.issues.push(issue);
                rejected = true;
            }
        }
    }

    let mut seen = BTreeSet::new();
    let mut any_cpe = false;
    for m in cve
        .configurations
        .iter()
        .flat_map(|c| &c.nodes)
        .flat_map(|n| &n.cpe_match)
    {
        any_cpe = true;
        if !m.vulnerable {
            continue;
        }
        if let Some(chipset) = chipset_from_cpe(&m.criteria) {
            if seen.insert(chipset.clone()) {
                record.affected_chipset_strings.push(chipset);
            }
        }
    }
    if !any_cpe {
        out.issues.push(ValidationIssue::warn(
            entry,
            "configurations",
            "missing-cpe",
            "",
        ));
    }
    if !rejected {
        out.items.push(record);
    }
    Ok(out)
}

/// Product of a `cpe:2.3:{h,o}:<vendor>:<product>:...` name when the vendor
/// is a chipset manufacturer; a `_firmware` suffix is dropped.
fn chipset_from_cpe(cpe: &str) -> Option<String> {
    let parts: Vec<&str> = cpe.split(':').collect();
    if parts.len() < 5 || parts[0] != "cpe" || parts[1] != "2.3" {
        return None;
    }
    if parts[2] != "h" && parts[2] != "o" {
        return None;
    }
    parts[3].parse::<ChipsetManufacturer>().ok()?;
    let product = parts[4].strip_suffix("_firmware").unwrap_or(parts[4]);
    if product.is_empty() || product == "*" || product == "-" {
        return None;
    }
    Some(product.replace('_', " "))
}

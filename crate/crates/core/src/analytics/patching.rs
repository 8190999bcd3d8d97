//! Severity, patch latency, information availability and score
//! consistency.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{days, reference, share, AnalyticsConfig, ReferenceValue};
use crate::domain::{ChipsetManufacturer, CveId, Location, Source};
use crate::kb::KnowledgeBase;
use crate::stats::{
    kruskal_wallis, median, quantile, FiveNumberSummary, KruskalWallis, SampleGroup,
};

/// NIST severity distribution of one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSeverity {
    pub location: Location,
    pub summary: FiveNumberSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityByLocation {
    /// Firmware then driver; a location without scored vulnerabilities is
    /// absent.
    pub groups: Vec<LocationSeverity>,
    /// Firmware median minus driver median.
    pub median_difference: Option<f64>,
    pub kruskal_wallis: Option<KruskalWallis>,
    /// Why the test was skipped, when it was.
    pub notice: Option<String>,
    pub unknown_location: usize,
    pub without_nist_severity: usize,
    pub reference_values: Vec<ReferenceValue>,
}

/// NIST severities of firmware and driver vulnerabilities compared with a
/// Kruskal-Wallis test. Unknown-location vulnerabilities are left out.
pub fn severity_by_location(kb: &KnowledgeBase) -> SeverityByLocation {
    let mut firmware = Vec::new();
    let mut driver = Vec::new();
    let (mut unknown_location, mut without_nist_severity) = (0, 0);
    for v in kb.vulnerabilities() {
        let Some(score) = v.nist_severity() else {
            without_nist_severity += 1;
            continue;
        };
        match v.location {
            Location::Firmware => firmware.push(score.value()),
            Location::Driver => driver.push(score.value()),
            Location::Unknown => unknown_location += 1,
        }
    }
    let groups: Vec<LocationSeverity> =
        [(Location::Firmware, &firmware), (Location::Driver, &driver)]
            .into_iter()
            .filter_map(|(location, values)| {
                FiveNumberSummary::of(values)
                    .ok()
                    .map(|summary| LocationSeverity { location, summary })
            })
            .collect();
    let median_difference = match (median(&firmware), median(&driver)) {
        (Ok(f), Ok(d)) => Some(f - d),
        _ => None,
    };
    let (kw, notice) = match kruskal_wallis(&[
        SampleGroup::new(Location::Firmware.as_str(), firmware),
        SampleGroup::new(Location::Driver.as_str(), driver),
    ]) {
        Ok(kw) => (Some(kw), None),
        Err(e) => (None, Some(format!("Kruskal-Wallis test skipped: {e}"))),
    };
    SeverityByLocation {
        groups,
        median_difference,
        kruskal_wallis: kw,
        notice,
        unknown_location,
        without_nist_severity,
        reference_values: vec![reference("median_difference", 0.8, "cvss")],
    }
}

/// Days from report to patch for one vulnerability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyEntry {
    pub cve: CveId,
    pub manufacturers: Vec<ChipsetManufacturer>,
    pub report_date: NaiveDate,
    pub patch_date: NaiveDate,
    pub days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    /// Absent for the summary over all manufacturers.
    pub manufacturer: Option<ChipsetManufacturer>,
    pub n: usize,
    pub within_threshold: usize,
    pub within_threshold_share: f64,
    pub median_days: f64,
    pub q95_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub threshold_days: i64,
    pub entries: Vec<LatencyEntry>,
    /// Report dates after the patch date, kept out of every summary.
    pub data_errors: Vec<LatencyEntry>,
    pub overall: Option<LatencySummary>,
    pub per_manufacturer: Vec<LatencySummary>,
    /// Vulnerabilities with a patch date but no report date.
    pub without_report_date: usize,
    pub reference_values: Vec<ReferenceValue>,
}

fn latency_summary(
    manufacturer: Option<ChipsetManufacturer>,
    entries: &[&LatencyEntry],
    threshold: i64,
) -> Option<LatencySummary> {
    let values: Vec<f64> = entries.iter().map(|e| e.days as f64).collect();
    let within = entries.iter().filter(|e| e.days <= threshold).count();
    Some(LatencySummary {
        manufacturer,
        n: entries.len(),
        within_threshold: within,
        within_threshold_share: share(within, entries.len())?,
        median_days: median(&values).ok()?,
        q95_days: quantile(&values, 0.95).ok()?,
    })
}

/// T_patch − T_report per vulnerability with both dates, the share within
/// `threshold_days`, and 0.95 quantiles overall and per manufacturer.
pub fn patch_latency_report(kb: &KnowledgeBase, threshold_days: i64) -> LatencyReport {
    let mut entries = Vec::new();
    let mut data_errors = Vec::new();
    let mut without_report_date = 0;
    for v in kb.vulnerabilities() {
        let Some(patch_date) = v.patch_date else {
            continue;
        };
        let Some(report_date) = v.report_date else {
            without_report_date += 1;
            continue;
        };
        let entry = LatencyEntry {
            cve: v.cve.clone(),
            manufacturers: v.manufacturers().into_iter().collect(),
            report_date,
            patch_date,
            days: days(patch_date, report_date),
        };
        if entry.days < 0 {
            data_errors.push(entry);
        } else {
            entries.push(entry);
        }
    }
    let all: Vec<&LatencyEntry> = entries.iter().collect();
    let mut by_cm: BTreeMap<ChipsetManufacturer, Vec<&LatencyEntry>> = BTreeMap::new();
    for e in &entries {
        for cm in &e.manufacturers {
            by_cm.entry(*cm).or_default().push(e);
        }
    }
    LatencyReport {
        threshold_days,
        overall: latency_summary(None, &all, threshold_days),
        per_manufacturer: by_cm
            .into_iter()
            .filter_map(|(cm, list)| latency_summary(Some(cm), &list, threshold_days))
            .collect(),
        entries,
        data_errors,
        without_report_date,
        reference_values: vec![
            reference("samsung_within_90_days_share", 0.469, "share"),
            reference("qualcomm_within_90_days_share", 0.199, "share"),
            reference("samsung_q95_days", 185.0, "days"),
            reference("qualcomm_q95_days", 348.0, "days"),
        ],
    }
}

/// Share of one manufacturer's vulnerabilities visible in each channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityRow {
    pub manufacturer: ChipsetManufacturer,
    pub total: usize,
    pub in_nvd: usize,
    pub in_aosp: usize,
    pub cm_website: f64,
    pub nvd: f64,
    pub aosp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityMatrix {
    pub window_days: i64,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub rows: Vec<AvailabilityRow>,
    pub reference_values: Vec<ReferenceValue>,
}

/// For manufacturer-bulletin vulnerabilities first published by that
/// manufacturer inside the configured range, the share also published in
/// NVD and in an AOSP bulletin no later than `window_days` after the
/// manufacturer's publication.
pub fn availability_matrix(kb: &KnowledgeBase, config: &AnalyticsConfig) -> AvailabilityMatrix {
    let mut counts: BTreeMap<ChipsetManufacturer, (usize, usize, usize)> = BTreeMap::new();
    for v in kb.vulnerabilities() {
        let mut first: BTreeMap<ChipsetManufacturer, NaiveDate> = BTreeMap::new();
        for r in v.cm_records() {
            if let Some(cm) = r.manufacturer {
                let e = first.entry(cm).or_insert(r.publication_date);
                *e = (*e).min(r.publication_date);
            }
        }
        let nvd = v
            .records
            .iter()
            .filter(|r| r.source == Source::Nvd)
            .map(|r| r.publication_date)
            .min();
        let aosp = kb.first_bulletin_spl(&v.cve);
        for (cm, published) in first {
            if config.availability_from.is_some_and(|f| published < f)
                || config.availability_to.is_some_and(|t| published > t)
            {
                continue;
            }
            let within =
                |d: Option<NaiveDate>| d.is_some_and(|d| days(d, published) <= config.window_days);
            let c = counts.entry(cm).or_default();
            c.0 += 1;
            c.1 += usize::from(within(nvd));
            c.2 += usize::from(within(aosp));
        }
    }
    AvailabilityMatrix {
        window_days: config.window_days,
        from: config.availability_from,
        to: config.availability_to,
        rows: counts
            .into_iter()
            .map(|(cm, (total, in_nvd, in_aosp))| AvailabilityRow {
                manufacturer: cm,
                total,
                in_nvd,
                in_aosp,
                cm_website: 1.0,
                nvd: in_nvd as f64 / total as f64,
                aosp: in_aosp as f64 / total as f64,
            })
            .collect(),
        reference_values: vec![
            reference("samsung_aosp_share", 0.0, "share"),
            reference("samsung_nvd_share", 0.91, "share"),
        ],
    }
}

/// How NIST scores compare with the manufacturer's own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityConsistency {
    pub n: usize,
    pub nist_lower_count: usize,
    pub equal_count: usize,
    pub nist_higher_count: usize,
    pub nist_lower: Option<f64>,
    pub equal: Option<f64>,
    pub nist_higher: Option<f64>,
    pub reference_values: Vec<ReferenceValue>,
}

/// Three-way comparison of raw scores for vulnerabilities scored by both
/// NIST and the manufacturer.
pub fn severity_consistency(kb: &KnowledgeBase) -> SeverityConsistency {
    let (mut lower, mut equal, mut higher) = (0, 0, 0);
    for v in kb.vulnerabilities() {
        let (Some(nist), Some(cm)) = (v.nist_severity(), v.cm_severity()) else {
            continue;
        };
        match nist.cmp(&cm) {
            std::cmp::Ordering::Less => lower += 1,
            std::cmp::Ordering::Equal => equal += 1,
            std::cmp::Ordering::Greater => higher += 1,
        }
    }
    let n = lower + equal + higher;
    SeverityConsistency {
        n,
        nist_lower_count: lower,
        equal_count: equal,
        nist_higher_count: higher,
        nist_lower: share(lower, n),
        equal: share(equal, n),
        nist_higher: share(higher, n),
        reference_values: vec![
            reference("nist_lower", 0.10, "share"),
            reference("nist_higher", 0.15, "share"),
            reference("n", 2249.0, "vulnerabilities"),
        ],
    }
}

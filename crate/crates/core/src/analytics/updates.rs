//! Propagation of patches to smartphones.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{days, reference, share, AnalyticsError, ReferenceValue};
use crate::domain::{ChipsetKey, ChipsetManufacturer, CveId, DeviceId};
use crate::kb::KnowledgeBase;
use crate::stats::{median, quantile, FiveNumberSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmitigatedReport {
    pub cutoff: NaiveDate,
    /// Vulnerabilities meeting every criterion except the absence of a
    /// mitigating update.
    pub eligible: usize,
    pub mitigated: Vec<CveId>,
    pub unmitigated: Vec<CveId>,
    pub unmitigated_share: Option<f64>,
    pub reference_values: Vec<ReferenceValue>,
    pub reference_note: String,
}

/// Vulnerabilities that no affected smartphone with update information has
/// received a mitigating update for. A vulnerability qualifies when
/// 1. at least one affected smartphone has update information,
/// 2. none of those smartphones has a mitigating update,
/// 3. its patch date is strictly after the release of at least one of them,
/// 4. its patch date is before `cutoff`.
///
/// Eligible vulnerabilities failing only the second criterion are listed as
/// mitigated.
pub fn unmitigated_vulnerabilities(kb: &KnowledgeBase, cutoff: NaiveDate) -> UnmitigatedReport {
    let mut mitigated = Vec::new();
    let mut unmitigated = Vec::new();
    for v in kb.vulnerabilities() {
        let Some(patch) = v.patch_date else { continue };
        if patch >= cutoff {
            continue;
        }
        let tracked: Vec<DeviceId> = kb
            .affected_smartphones(&v.cve)
            .into_iter()
            .filter(|s| kb.has_update_info(s))
            .collect();
        let released_before = tracked
            .iter()
            .any(|s| kb.smartphone(s).is_some_and(|p| p.release_date < patch));
        if tracked.is_empty() || !released_before {
            continue;
        }
        if tracked
            .iter()
            .any(|s| !kb.mitigating_updates(&v.cve, s).is_empty())
        {
            mitigated.push(v.cve.clone());
        } else {
            unmitigated.push(v.cve.clone());
        }
    }
    let eligible = mitigated.len() + unmitigated.len();
    UnmitigatedReport {
        cutoff,
        eligible,
        unmitigated_share: share(unmitigated.len(), eligible),
        mitigated,
        unmitigated,
        reference_values: vec![
            reference("eligible", 1546.0, "vulnerabilities"),
            reference("mitigated", 951.0, "vulnerabilities"),
            reference("unmitigated", 631.0, "vulnerabilities"),
        ],
        reference_note: "the reference counts are mutually inconsistent: 951 + 631 != 1546 and the unmitigated share is quoted as both 40.8% and 43%".into(),
    }
}

/// Days from patch to the first mitigating update of one affected device.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairLatency {
    pub cve: CveId,
    pub device: DeviceId,
    pub patch_date: NaiveDate,
    pub update_date: NaiveDate,
    pub days: i64,
}

/// Every (vulnerability, affected device) pair with a mitigating update,
/// ordered by CVE then device. Negative day counts are included.
pub fn update_latencies(kb: &KnowledgeBase) -> Vec<PairLatency> {
    let mut out = Vec::new();
    for v in kb.vulnerabilities() {
        let Some(patch) = v.patch_date else { continue };
        for s in kb.affected_smartphones(&v.cve) {
            if let Some(first) = kb.mitigating_updates(&v.cve, &s).first() {
                out.push(PairLatency {
                    cve: v.cve.clone(),
                    patch_date: patch,
                    update_date: first.release_date,
                    days: days(first.release_date, patch),
                    device: s,
                });
            }
        }
    }
    out
}

/// Fragmentation of one vulnerability's rollout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub cve: CveId,
    pub updated_devices: usize,
    pub first_update: NaiveDate,
    pub last_update: NaiveDate,
    /// Last minus first update date.
    pub spread_days: i64,
    /// Days until half of the eventually updated devices were updated.
    pub first_to_half_days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateTimelineReport {
    pub pairs: usize,
    pub latency: Option<FiveNumberSummary>,
    pub latency_q95: Option<f64>,
    /// Pairs updated before the patch date, kept out of the latency figures.
    pub data_errors: Vec<PairLatency>,
    pub entries: Vec<TimelineEntry>,
    pub median_spread: Option<f64>,
    pub median_first_to_half: Option<f64>,
    pub reference_values: Vec<ReferenceValue>,
}

pub fn update_timeline_report(kb: &KnowledgeBase) -> UpdateTimelineReport {
    let pairs = update_latencies(kb);
    let (valid, data_errors): (Vec<&PairLatency>, Vec<&PairLatency>) =
        pairs.iter().partition(|p| p.days >= 0);
    let latencies: Vec<f64> = valid.iter().map(|p| p.days as f64).collect();

    let mut by_cve: BTreeMap<&CveId, Vec<NaiveDate>> = BTreeMap::new();
    for p in &pairs {
        by_cve.entry(&p.cve).or_default().push(p.update_date);
    }
    let entries: Vec<TimelineEntry> = by_cve
        .into_iter()
        .map(|(cve, mut dates)| {
            dates.sort();
            let m = dates.len();
            let first = dates[0];
            TimelineEntry {
                cve: cve.clone(),
                updated_devices: m,
                first_update: first,
                last_update: dates[m - 1],
                spread_days: days(dates[m - 1], first),
                first_to_half_days: days(dates[m.div_ceil(2) - 1], first),
            }
        })
        .collect();
    let spreads: Vec<f64> = entries.iter().map(|e| e.spread_days as f64).collect();
    let halves: Vec<f64> = entries
        .iter()
        .map(|e| e.first_to_half_days as f64)
        .collect();

    UpdateTimelineReport {
        pairs: valid.len(),
        latency: FiveNumberSummary::of(&latencies).ok(),
        latency_q95: quantile(&latencies, 0.95).ok(),
        data_errors: data_errors.into_iter().cloned().collect(),
        entries,
        median_spread: median(&spreads).ok(),
        median_first_to_half: median(&halves).ok(),
        reference_values: vec![
            reference("median_latency", 71.0, "days"),
            reference("q95_latency", 266.0, "days"),
            reference("median_spread", 182.0, "days"),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectedRow {
    pub manufacturer: ChipsetManufacturer,
    pub vulnerabilities: usize,
    pub summary: FiveNumberSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectedDistribution {
    pub rows: Vec<AffectedRow>,
    pub reference_values: Vec<ReferenceValue>,
}

/// Per manufacturer, the distribution of affected smartphone counts over
/// all vulnerabilities in its bulletins, including those affecting none.
pub fn affected_count_distribution(kb: &KnowledgeBase) -> AffectedDistribution {
    let mut counts: BTreeMap<ChipsetManufacturer, Vec<f64>> = BTreeMap::new();
    for v in kb.vulnerabilities() {
        let n = kb.affected_smartphones(&v.cve).len() as f64;
        for cm in v.manufacturers() {
            counts.entry(cm).or_default().push(n);
        }
    }
    AffectedDistribution {
        rows: counts
            .into_iter()
            .filter_map(|(cm, values)| {
                Some(AffectedRow {
                    manufacturer: cm,
                    vulnerabilities: values.len(),
                    summary: FiveNumberSummary::of(&values).ok()?,
                })
            })
            .collect(),
        reference_values: vec![
            reference("mediatek_median", 652.0, "smartphones"),
            reference("mediatek_max", 2222.0, "smartphones"),
            reference("qualcomm_median", 277.0, "smartphones"),
        ],
    }
}

/// Affected chipsets and smartphones of one vulnerability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub cve: CveId,
    pub chipsets: Vec<ChipsetKey>,
    pub smartphone_count: usize,
    pub smartphones: Vec<DeviceId>,
    pub per_oem: BTreeMap<String, usize>,
    pub warning: Option<String>,
}

pub fn impact_report(kb: &KnowledgeBase, cve: &CveId) -> Result<ImpactReport, AnalyticsError> {
    let v = kb
        .vulnerability(cve)
        .ok_or_else(|| AnalyticsError::UnknownVulnerability(cve.clone()))?;
    let phones: BTreeSet<DeviceId> = kb.affected_smartphones(cve);
    let mut per_oem = BTreeMap::new();
    for id in &phones {
        if let Some(p) = kb.smartphone(id) {
            *per_oem.entry(p.oem.clone()).or_insert(0) += 1;
        }
    }
    Ok(ImpactReport {
        cve: cve.clone(),
        chipsets: v.affected_chipsets.iter().cloned().collect(),
        smartphone_count: phones.len(),
        warning: v
            .affected_chipsets
            .is_empty()
            .then(|| format!("{cve} is not linked to any chipset")),
        smartphones: phones.into_iter().collect(),
        per_oem,
    })
}

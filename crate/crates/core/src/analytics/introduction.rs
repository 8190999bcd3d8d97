//! Where vulnerabilities first appear and how long they persist across
//! chipset generations.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{reference, share, AnalyticsError, Excluded, ReferenceValue};
use crate::domain::{ChipsetKey, ChipsetManufacturer, CveId, Vulnerability};
use crate::kb::KnowledgeBase;
use crate::stats::{mean, median};

fn release(kb: &KnowledgeBase, chipset: &ChipsetKey) -> Result<NaiveDate, AnalyticsError> {
    kb.chipset(chipset)
        .ok_or_else(|| AnalyticsError::UnknownChipset(chipset.clone()))?
        .release_date
        .ok_or_else(|| AnalyticsError::MissingReleaseDate(chipset.clone()))
}

fn affected<'a>(
    kb: &'a KnowledgeBase,
    cve: &CveId,
    chipset: &ChipsetKey,
) -> Result<&'a Vulnerability, AnalyticsError> {
    let v = kb
        .vulnerability(cve)
        .ok_or_else(|| AnalyticsError::UnknownVulnerability(cve.clone()))?;
    if !v.affected_chipsets.contains(chipset) {
        return Err(AnalyticsError::NotAffected {
            cve: cve.clone(),
            chipset: chipset.clone(),
        });
    }
    Ok(v)
}

/// True iff no chipset affected by `cve` was released strictly before
/// `chipset`. Requires `cve` to affect `chipset` and every affected chipset
/// to have a release date.
pub fn newly_introduced(
    kb: &KnowledgeBase,
    cve: &CveId,
    chipset: &ChipsetKey,
) -> Result<bool, AnalyticsError> {
    let v = affected(kb, cve, chipset)?;
    let own = release(kb, chipset)?;
    let mut newly = true;
    for other in &v.affected_chipsets {
        if release(kb, other)? < own {
            newly = false;
        }
    }
    Ok(newly)
}

/// True iff `cve` affects `chipset`, was not newly introduced there, and
/// the chipset was released on or before the patch date.
pub fn persists_into(
    kb: &KnowledgeBase,
    cve: &CveId,
    chipset: &ChipsetKey,
) -> Result<bool, AnalyticsError> {
    let v = kb
        .vulnerability(cve)
        .ok_or_else(|| AnalyticsError::UnknownVulnerability(cve.clone()))?;
    if !v.affected_chipsets.contains(chipset) {
        return Ok(false);
    }
    let patch = v
        .patch_date
        .ok_or_else(|| AnalyticsError::NoPatchDate(cve.clone()))?;
    Ok(!newly_introduced(kb, cve, chipset)? && release(kb, chipset)? <= patch)
}

/// The next chipset of the same manufacturer and how many of the current
/// chipset's vulnerabilities were patched by its release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextRelease {
    pub chipset: ChipsetKey,
    pub release_date: NaiveDate,
    /// Vulnerabilities with a patch date.
    pub considered: usize,
    /// Of those, patched on or before the next release.
    pub removed: usize,
    pub removed_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipsetIntroduction {
    pub chipset: ChipsetKey,
    pub release_date: NaiveDate,
    pub total: usize,
    pub newly_introduced: usize,
    pub inherited: usize,
    /// Inherited and still unpatched when the chipset was released.
    pub persistent: usize,
    pub newly_introduced_share: Option<f64>,
    pub inherited_share: Option<f64>,
    pub next_release: Option<NextRelease>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroductionAggregate {
    /// Chipsets with at least one vulnerability.
    pub chipsets: usize,
    pub mean_total: Option<f64>,
    pub median_total: Option<f64>,
    pub mean_inherited_share: Option<f64>,
    pub median_inherited_share: Option<f64>,
    pub mean_newly_introduced_share: Option<f64>,
    pub median_newly_introduced_share: Option<f64>,
    /// Inherited over total, pooled across chipsets.
    pub pooled_inherited_share: Option<f64>,
    /// Removed before the next release, pooled across chipsets.
    pub removed_before_next_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroductionReport {
    pub chipsets: Vec<ChipsetIntroduction>,
    pub aggregate: IntroductionAggregate,
    /// Vulnerabilities affecting a chipset without a release date.
    pub excluded: Vec<Excluded>,
    pub chipsets_without_release_date: Vec<ChipsetKey>,
    pub reference_values: Vec<ReferenceValue>,
}

fn opt_mean(values: &[f64]) -> Option<f64> {
    mean(values).ok()
}

fn opt_median(values: &[f64]) -> Option<f64> {
    median(values).ok()
}

pub fn introduction_report(kb: &KnowledgeBase) -> IntroductionReport {
    // Earliest release among each vulnerability's chipsets; None when one
    // of them is undated.
    let mut earliest: BTreeMap<&CveId, Option<NaiveDate>> = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for v in kb.vulnerabilities() {
        if v.affected_chipsets.is_empty() {
            continue;
        }
        let dates: Option<Vec<NaiveDate>> = v
            .affected_chipsets
            .iter()
            .map(|c| kb.chipset(c).and_then(|m| m.release_date))
            .collect();
        let min = dates.and_then(|d| d.into_iter().min());
        if min.is_none() {
            excluded.insert(Excluded {
                cve: v.cve.clone(),
                reason: "affected-chipset-without-release-date".into(),
            });
        }
        earliest.insert(&v.cve, min);
    }

    let mut by_cm: BTreeMap<ChipsetManufacturer, Vec<(NaiveDate, ChipsetKey)>> = BTreeMap::new();
    let mut undated = Vec::new();
    for c in kb.chipsets() {
        match c.release_date {
            Some(d) => by_cm.entry(c.manufacturer).or_default().push((d, c.key())),
            None => undated.push(c.key()),
        }
    }
    for list in by_cm.values_mut() {
        list.sort();
    }

    let mut rows = Vec::new();
    for list in by_cm.values() {
        for (rel, key) in list {
            let rel = *rel;
            let (mut total, mut newly, mut persistent) = (0, 0, 0);
            let mut patches = Vec::new();
            for cve in kb.vulnerabilities_of(key) {
                let Some(Some(min)) = earliest.get(&cve) else {
                    continue;
                };
                total += 1;
                let is_new = *min >= rel;
                newly += usize::from(is_new);
                let patch = kb.vulnerability(&cve).and_then(|v| v.patch_date);
                if let Some(p) = patch {
                    persistent += usize::from(!is_new && rel <= p);
                    patches.push(p);
                }
            }
            let next = list
                .iter()
                .find(|(d, _)| *d > rel)
                .map(|(next_rel, next_key)| {
                    let next_rel = *next_rel;
                    let removed = patches.iter().filter(|p| **p <= next_rel).count();
                    NextRelease {
                        chipset: next_key.clone(),
                        release_date: next_rel,
                        considered: patches.len(),
                        removed,
                        removed_share: share(removed, patches.len()),
                    }
                });
            rows.push(ChipsetIntroduction {
                chipset: key.clone(),
                release_date: rel,
                total,
                newly_introduced: newly,
                inherited: total - newly,
                persistent,
                newly_introduced_share: share(newly, total),
                inherited_share: share(total - newly, total),
                next_release: next,
            });
        }
    }

    let with_vulns: Vec<&ChipsetIntroduction> = rows.iter().filter(|r| r.total > 0).collect();
    let totals: Vec<f64> = with_vulns.iter().map(|r| r.total as f64).collect();
    let inherited: Vec<f64> = with_vulns
        .iter()
        .filter_map(|r| r.inherited_share)
        .collect();
    let newly: Vec<f64> = with_vulns
        .iter()
        .filter_map(|r| r.newly_introduced_share)
        .collect();
    let sum_total: usize = with_vulns.iter().map(|r| r.total).sum();
    let sum_inherited: usize = with_vulns.iter().map(|r| r.inherited).sum();
    let next: Vec<&NextRelease> = rows
        .iter()
        .filter_map(|r| r.next_release.as_ref())
        .collect();
    let considered: usize = next.iter().map(|n| n.considered).sum();
    let removed: usize = next.iter().map(|n| n.removed).sum();

    IntroductionReport {
        aggregate: IntroductionAggregate {
            chipsets: with_vulns.len(),
            mean_total: opt_mean(&totals),
            median_total: opt_median(&totals),
            mean_inherited_share: opt_mean(&inherited),
            median_inherited_share: opt_median(&inherited),
            mean_newly_introduced_share: opt_mean(&newly),
            median_newly_introduced_share: opt_median(&newly),
            pooled_inherited_share: share(sum_inherited, sum_total),
            removed_before_next_share: share(removed, considered),
        },
        chipsets: rows,
        excluded: excluded.into_iter().collect(),
        chipsets_without_release_date: undated,
        reference_values: vec![
            reference("mean_total", 204.0, "vulnerabilities"),
            reference("median_total", 149.0, "vulnerabilities"),
            reference("pooled_inherited_share", 0.93, "share"),
            reference("removed_before_next_share", 0.09, "share"),
        ],
    }
}

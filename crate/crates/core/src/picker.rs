//! Device selection maximizing the number of distinct vulnerabilities
//! covered by the chosen devices' chipsets.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ChipsetKey, ChipsetManufacturer, CveId, DeviceId, SmartphoneModel};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PickError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("device {0} is not linked to a chipset")]
    NotLinked(DeviceId),
    #[error("locked device {0} does not satisfy the filters")]
    LockedFiltered(DeviceId),
    #[error("{locked} locked devices exceed k = {k}")]
    TooManyLocked { locked: usize, k: usize },
    #[error("no device satisfies the filters")]
    NoCandidates,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PickFilters {
    /// Allowed OEMs, compared case-insensitively; all when empty.
    pub oems: Vec<String>,
    /// Allowed chipset manufacturers; all when empty.
    pub manufacturers: Vec<ChipsetManufacturer>,
    pub released_from: Option<NaiveDate>,
    pub released_to: Option<NaiveDate>,
}

impl PickFilters {
    pub fn admits(&self, phone: &SmartphoneModel, chipset: &ChipsetKey) -> bool {
        (self.oems.is_empty() || self.oems.iter().any(|o| o.eq_ignore_ascii_case(&phone.oem)))
            && (self.manufacturers.is_empty() || self.manufacturers.contains(&chipset.manufacturer))
            && self.released_from.is_none_or(|f| phone.release_date >= f)
            && self.released_to.is_none_or(|t| phone.release_date <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickRequest {
    /// Number of devices to select, locked ones included.
    pub k: usize,
    #[serde(default)]
    pub filters: PickFilters,
    #[serde(default)]
    pub locked: Vec<DeviceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickedDevice {
    pub device: DeviceId,
    pub oem: String,
    pub device_name: String,
    pub chipset: ChipsetKey,
    pub release_date: NaiveDate,
    pub vulnerabilities: usize,
    /// Vulnerabilities this device added to the selection's union.
    pub marginal_gain: usize,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickResult {
    pub selection: Vec<PickedDevice>,
    /// Distinct vulnerabilities covered by the selection.
    pub total_covered: usize,
    pub candidates: usize,
    /// `overlap[i][j]`: vulnerabilities shared by devices i and j of the
    /// selection; the diagonal holds each device's own count.
    pub overlap: Vec<Vec<usize>>,
    pub truncated: Option<String>,
}

/// One greedy step: the chosen set and how many new elements it added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub gain: usize,
}

/// Greedy maximum coverage over `sets`. The `locked` indexes come first in
/// the given order; then, until `k` sets are chosen or none remain, the set
/// adding the most uncovered elements is taken. Ties go to the set sharing
/// fewer elements with the current union, then to the lower index.
pub fn greedy_cover<T: Ord>(sets: &[BTreeSet<T>], locked: &[usize], k: usize) -> Vec<Step> {
    let mut covered: BTreeSet<&T> = BTreeSet::new();
    let mut chosen = vec![false; sets.len()];
    let mut steps: Vec<Step> = Vec::new();
    let mut order = locked.iter().copied();
    while steps.len() < k.max(locked.len()) {
        let next = order.find(|&i| !chosen[i]).or_else(|| {
            (0..sets.len())
                .filter(|&i| !chosen[i])
                .map(|i| {
                    let shared = sets[i].iter().filter(|e| covered.contains(e)).count();
                    (i, sets[i].len() - shared, shared)
                })
                .max_by_key(|&(i, gain, shared)| (gain, Reverse(shared), Reverse(i)))
                .map(|(i, _, _)| i)
        });
        let Some(i) = next else { break };
        let before = covered.len();
        covered.extend(sets[i].iter());
        chosen[i] = true;
        steps.push(Step {
            index: i,
            gain: covered.len() - before,
        });
    }
    steps
}

struct Candidate<'a> {
    phone: &'a SmartphoneModel,
    chipset: &'a ChipsetKey,
    vulns: BTreeSet<CveId>,
}

fn linked<'a>(
    kb: &'a KnowledgeBase,
    id: &DeviceId,
) -> Result<(&'a SmartphoneModel, &'a ChipsetKey), PickError> {
    let phone = kb
        .smartphone(id)
        .ok_or_else(|| PickError::UnknownDevice(id.clone()))?;
    let chipset = kb
        .chipset_of(id)
        .ok_or_else(|| PickError::NotLinked(id.clone()))?;
    Ok((phone, chipset))
}

/// Selects up to `k` linked devices passing the filters by greedy maximum
/// coverage of their chipsets' vulnerabilities. Candidates are ranked newest
/// first, then by device name, which settles ties left by the coverage
/// criteria.
pub fn pick_devices(kb: &KnowledgeBase, req: &PickRequest) -> Result<PickResult, PickError> {
    if req.k == 0 {
        return Err(PickError::ZeroK);
    }
    let mut locked_ids: Vec<&DeviceId> = Vec::new();
    for id in &req.locked {
        let (phone, chipset) = linked(kb, id)?;
        if !req.filters.admits(phone, chipset) {
            return Err(PickError::LockedFiltered(id.clone()));
        }
        if !locked_ids.contains(&id) {
            locked_ids.push(id);
        }
    }
    if locked_ids.len() > req.k {
        return Err(PickError::TooManyLocked {
            locked: locked_ids.len(),
            k: req.k,
        });
    }

    let mut candidates: Vec<Candidate> = kb
        .linked_smartphones()
        .filter_map(|phone| {
            let chipset = kb.chipset_of(&phone.id)?;
            req.filters.admits(phone, chipset).then(|| Candidate {
                phone,
                chipset,
                vulns: kb.vulnerabilities_of(chipset),
            })
        })
        .collect();
    if candidates.is_empty() {
        return Err(PickError::NoCandidates);
    }
    candidates.sort_by(|a, b| {
        b.phone
            .release_date
            .cmp(&a.phone.release_date)
            .then_with(|| a.phone.device_name.cmp(&b.phone.device_name))
            .then_with(|| a.phone.id.cmp(&b.phone.id))
    });

    let sets: Vec<BTreeSet<CveId>> = candidates.iter().map(|c| c.vulns.clone()).collect();
    let locked: Vec<usize> = locked_ids
        .iter()
        .map(|id| {
            candidates
                .iter()
                .position(|c| &c.phone.id == *id)
                .expect("locked devices are candidates")
        })
        .collect();
    let steps = greedy_cover(&sets, &locked, req.k);

    let truncated = (req.k > candidates.len()).then(|| {
        format!(
            "k = {} exceeds the {} candidate devices; all candidates are selected",
            req.k,
            candidates.len()
        )
    });
    let chosen: Vec<&Candidate> = steps.iter().map(|s| &candidates[s.index]).collect();
    let overlap = chosen
        .iter()
        .map(|a| {
            chosen
                .iter()
                .map(|b| a.vulns.intersection(&b.vulns).count())
                .collect()
        })
        .collect();
    let total_covered = chosen
        .iter()
        .flat_map(|c| c.vulns.iter())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(PickResult {
        selection: steps
            .iter()
            .enumerate()
            .map(|(pos, s)| {
                let c = &candidates[s.index];
                PickedDevice {
                    device: c.phone.id.clone(),
                    oem: c.phone.oem.clone(),
                    device_name: c.phone.device_name.clone(),
                    chipset: c.chipset.clone(),
                    release_date: c.phone.release_date,
                    vulnerabilities: c.vulns.len(),
                    marginal_gain: s.gain,
                    locked: pos < locked.len(),
                }
            })
            .collect(),
        total_covered,
        candidates: candidates.len(),
        overlap,
        truncated,
    })
}

/// Vulnerabilities of the candidate's chipset not covered by the selection.
/// Unlinked devices cover nothing.
pub fn coverage_delta(
    kb: &KnowledgeBase,
    selection: &[DeviceId],
    candidate: &DeviceId,
) -> Result<usize, PickError> {
    let vulns_of = |id: &DeviceId| -> Result<BTreeSet<CveId>, PickError> {
        kb.smartphone(id)
            .ok_or_else(|| PickError::UnknownDevice(id.clone()))?;
        Ok(kb
            .chipset_of(id)
            .map(|c| kb.vulnerabilities_of(c))
            .unwrap_or_default())
    };
    let mut covered = BTreeSet::new();
    for id in selection {
        covered.extend(vulns_of(id)?);
    }
    Ok(vulns_of(candidate)?.difference(&covered).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::KeyTermTable;
    use crate::domain::{ChipsetModel, ModelNumber, Source, VantagePoint, VantagePointRecord};

    fn set(items: &[u32]) -> BTreeSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn greedy_takes_the_largest_gain_first() {
        let sets = [set(&[1, 2]), set(&[2, 3]), set(&[1])];
        let steps = greedy_cover(&sets, &[], 2);
        assert_eq!(
            steps,
            vec![Step { index: 0, gain: 2 }, Step { index: 1, gain: 1 }]
        );
        assert_eq!(
            greedy_cover(&sets, &[], 1),
            vec![Step { index: 0, gain: 2 }]
        );
    }

    #[test]
    fn identical_sets_give_one_full_step_then_zeros() {
        let sets = [set(&[1, 2, 3]), set(&[1, 2, 3]), set(&[1, 2, 3])];
        let gains: Vec<usize> = greedy_cover(&sets, &[], 3).iter().map(|s| s.gain).collect();
        assert_eq!(gains, vec![3, 0, 0]);
    }

    #[test]
    fn ties_prefer_less_overlap_then_lower_index() {
        let sets = [set(&[1, 2, 3]), set(&[1, 4, 5]), set(&[6, 7])];
        let order: Vec<usize> = greedy_cover(&sets, &[], 3)
            .iter()
            .map(|s| s.index)
            .collect();
        assert_eq!(order, vec![0, 2, 1]);
        let sets = [set(&[1]), set(&[2])];
        assert_eq!(greedy_cover(&sets, &[], 1)[0].index, 0);
    }

    #[test]
    fn greedy_can_miss_the_optimum() {
        // Greedy takes the largest set and then gains one; the two smaller
        // sets together cover six.
        let sets = [set(&[1, 2, 3, 4]), set(&[1, 2, 5]), set(&[3, 4, 6])];
        let steps = greedy_cover(&sets, &[], 2);
        let total: usize = steps.iter().map(|s| s.gain).sum();
        assert_eq!(total, 5);
        assert_eq!(sets[1].union(&sets[2]).count(), 6);
    }

    #[test]
    fn locked_sets_come_first_even_when_worse() {
        let sets = [set(&[1, 2, 3]), set(&[1])];
        let steps = greedy_cover(&sets, &[1], 2);
        assert_eq!(
            steps,
            vec![Step { index: 1, gain: 1 }, Step { index: 0, gain: 2 }]
        );
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn toyset() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        for (model, rel) in [("C1", d(2020, 1, 1)), ("C2", d(2021, 1, 1))] {
            kb.upsert_chipset(ChipsetModel {
                manufacturer: ChipsetManufacturer::Qualcomm,
                model_number: ModelNumber::parse(model).unwrap(),
                release_date: Some(rel),
                marketing_name: None,
            });
        }
        for (cve, chipsets) in [
            ("CVE-2021-0001", &["C1", "C2"][..]),
            ("CVE-2021-0002", &["C2"]),
            ("CVE-2021-0003", &["C1"]),
        ] {
            let mut r = VantagePointRecord::new(
                Source::CmBulletin,
                VantagePoint::QualcommBulletin,
                cve.parse().unwrap(),
                d(2021, 6, 1),
            );
            r.affected_chipset_strings = chipsets.iter().map(|s| s.to_string()).collect();
            kb.upsert_record(r, KeyTermTable::builtin());
        }
        kb.upsert_smartphone(SmartphoneModel::new(
            "Acme",
            "S1",
            "C1",
            None,
            d(2020, 3, 1),
        ));
        kb.upsert_smartphone(SmartphoneModel::new(
            "Acme",
            "S2",
            "C2",
            None,
            d(2021, 3, 1),
        ));
        kb.upsert_smartphone(SmartphoneModel::new(
            "Bolt",
            "S3",
            "C2",
            None,
            d(2021, 4, 1),
        ));
        kb.link_all();
        kb
    }

    fn id(name: &str) -> DeviceId {
        let oem = if name == "S3" { "Bolt" } else { "Acme" };
        DeviceId::new(oem, name)
    }

    #[test]
    fn picks_on_the_toyset() {
        let kb = toyset();
        let req = PickRequest {
            k: 2,
            filters: PickFilters::default(),
            locked: vec![],
        };
        let r = pick_devices(&kb, &req).unwrap();
        let names: Vec<&str> = r.selection.iter().map(|p| p.device_name.as_str()).collect();
        // S2 and S3 tie on everything but release date; S3 is newer.
        assert_eq!(names, vec!["S3", "S1"]);
        assert_eq!(r.total_covered, 3);
        assert_eq!(r.overlap, vec![vec![2, 1], vec![1, 2]]);
        assert!(r.truncated.is_none());
        assert_eq!(pick_devices(&kb, &req).unwrap(), r);

        let locked = PickRequest {
            locked: vec![id("S2")],
            ..req.clone()
        };
        let r = pick_devices(&kb, &locked).unwrap();
        assert!(r.selection[0].locked && r.selection[0].device_name == "S2");
        assert_eq!(r.selection[1].device_name, "S1");

        let big = PickRequest {
            k: 9,
            ..req.clone()
        };
        let r = pick_devices(&kb, &big).unwrap();
        assert_eq!(r.selection.len(), 3);
        assert!(r.truncated.is_some());
    }

    #[test]
    fn filters_and_errors() {
        let kb = toyset();
        let only_acme = PickFilters {
            oems: vec!["acme".into()],
            ..PickFilters::default()
        };
        let req = PickRequest {
            k: 1,
            filters: only_acme.clone(),
            locked: vec![id("S3")],
        };
        assert_eq!(
            pick_devices(&kb, &req),
            Err(PickError::LockedFiltered(id("S3")))
        );
        let req = PickRequest {
            k: 1,
            filters: only_acme,
            locked: vec![],
        };
        assert_eq!(
            pick_devices(&kb, &req).unwrap().selection[0].device_name,
            "S2"
        );
        assert_eq!(
            pick_devices(
                &kb,
                &PickRequest {
                    k: 0,
                    ..req.clone()
                }
            ),
            Err(PickError::ZeroK)
        );
        let none = PickFilters {
            released_from: Some(d(2030, 1, 1)),
            ..PickFilters::default()
        };
        assert_eq!(
            pick_devices(
                &kb,
                &PickRequest {
                    filters: none,
                    ..req.clone()
                }
            ),
            Err(PickError::NoCandidates)
        );
        let two_locked = PickRequest {
            k: 1,
            filters: PickFilters::default(),
            locked: vec![id("S1"), id("S2")],
        };
        assert_eq!(
            pick_devices(&kb, &two_locked),
            Err(PickError::TooManyLocked { locked: 2, k: 1 })
        );
    }

    #[test]
    fn coverage_delta_counts_uncovered_vulnerabilities() {
        let kb = toyset();
        assert_eq!(coverage_delta(&kb, &[id("S1")], &id("S2")), Ok(1));
        assert_eq!(coverage_delta(&kb, &[], &id("S2")), Ok(2));
        assert_eq!(coverage_delta(&kb, &[id("S2")], &id("S3")), Ok(0));
        assert!(coverage_delta(&kb, &[], &DeviceId::new("Nope", "X")).is_err());
    }
}

//! The relational knowledge base: entities keyed by natural keys, the
//! vulnerability-chipset and smartphone-chipset links, and the set queries
//! over them.
//!
//! Upserts are commutative and idempotent, so replaying the same inputs in
//! any order yields the same base. Links are derived from the stored
//! records by [`KnowledgeBase::link_all`].

mod jsonl;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{augment, blank_vulnerability, AugmentError, KeyTermTable};
use crate::domain::{
    normalize_chipset_name, AospBulletin, ChipsetKey, ChipsetManufacturer, ChipsetModel, CveId,
    DeviceId, DeviceUpdate, ModelNumber, SmartphoneModel, Source, VantagePoint, VantagePointRecord,
    Vulnerability,
};
use crate::ingest::Ingested;

pub use jsonl::{JsonlError, TABLES};
pub use store::StoreError;

type UpdateKey = (DeviceId, NaiveDate, Option<NaiveDate>);

/// Why a link was created: the source and the verbatim chipset string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkSource {
    pub vantage_point: VantagePoint,
    pub raw: String,
}

/// One vulnerability-chipset link with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VulnerabilityLink {
    pub cve: CveId,
    pub chipset: ChipsetKey,
    pub sources: BTreeSet<LinkSource>,
}

/// A smartphone's resolved chipset, B(s).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceLink {
    pub device: DeviceId,
    pub chipset: ChipsetKey,
}

/// A chipset string that could not be resolved to exactly one model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Unresolved {
    /// CVE or device identifier the string belongs to.
    pub subject: String,
    pub vantage_point: Option<VantagePoint>,
    pub raw: String,
    /// `no-match`, `ambiguous` or `normalization`.
    pub reason: String,
}

/// Chipsets only one kind of source links to a vulnerability, when both
/// kinds contributed links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkConflict {
    pub cve: CveId,
    pub nvd_only: Vec<ChipsetKey>,
    pub cm_only: Vec<ChipsetKey>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub records: usize,
    pub chipsets: usize,
    pub smartphones: usize,
    pub updates: usize,
    pub bulletins: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub vulnerability_links: usize,
    pub device_links: usize,
    pub unresolved: usize,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("unknown vulnerability {0}")]
    UnknownVulnerability(CveId),
    #[error("link {0} references a missing {1}")]
    Dangling(String, &'static str),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    chipsets: BTreeMap<ChipsetKey, ChipsetModel>,
    smartphones: BTreeMap<DeviceId, SmartphoneModel>,
    vulnerabilities: BTreeMap<CveId, Vulnerability>,
    updates: BTreeMap<UpdateKey, DeviceUpdate>,
    bulletins: BTreeMap<NaiveDate, AospBulletin>,
    vuln_links: BTreeMap<CveId, BTreeMap<ChipsetKey, BTreeSet<LinkSource>>>,
    device_links: BTreeMap<DeviceId, ChipsetKey>,
    unresolved: BTreeSet<Unresolved>,
    // Indexes derived from the tables above.
    by_model: BTreeMap<ModelNumber, BTreeSet<ChipsetKey>>,
    chipset_vulns: BTreeMap<ChipsetKey, BTreeSet<CveId>>,
    chipset_devices: BTreeMap<ChipsetKey, BTreeSet<DeviceId>>,
    first_bulletin: BTreeMap<CveId, NaiveDate>,
}

fn merge_option_min<T: Ord + Clone>(a: &Option<T>, b: &Option<T>) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y).clone()),
        (x, y) => x.clone().or_else(|| y.clone()),
    }
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    // ---- upserts ----

    /// Store a record under its natural key (CVE, vantage point,
    /// publication date) and recompute the vulnerability's derived fields.
    /// When two different records share a key, the greater one (by its
    /// total order) is kept, so the outcome does not depend on arrival
    /// order.
    pub fn upsert_record(
        &mut self,
        record: VantagePointRecord,
        table: &KeyTermTable,
    ) -> (&Vulnerability, Vec<AugmentError>) {
        let cve = record.cve.clone();
        let vuln = self
            .vulnerabilities
            .entry(cve.clone())
            .or_insert_with(|| blank_vulnerability(cve, Vec::new()));
        let key = record.key();
        match vuln.records.iter_mut().find(|r| r.key() == key) {
            Some(existing) => {
                if record > *existing {
                    *existing = record;
                }
            }
            None => vuln.records.push(record),
        }
        vuln.records.sort_by_key(VantagePointRecord::key);
        let problems = augment(vuln, table);
        (vuln, problems)
    }

    /// Merge a chipset: the earliest known release date and the smallest
    /// marketing name win.
    pub fn upsert_chipset(&mut self, chipset: ChipsetModel) {
        let key = chipset.key();
        self.by_model
            .entry(key.model_number.clone())
            .or_default()
            .insert(key.clone());
        match self.chipsets.get_mut(&key) {
            Some(existing) => {
                existing.release_date =
                    merge_option_min(&existing.release_date, &chipset.release_date);
                existing.marketing_name =
                    merge_option_min(&existing.marketing_name, &chipset.marketing_name);
            }
            None => {
                self.chipsets.insert(key, chipset);
            }
        }
    }

    /// Merge a smartphone: duplicates keep the smaller entry.
    pub fn upsert_smartphone(&mut self, phone: SmartphoneModel) {
        match self.smartphones.get_mut(&phone.id) {
            Some(existing) if phone < *existing => *existing = phone,
            Some(_) => {}
            None => {
                self.smartphones.insert(phone.id.clone(), phone);
            }
        }
    }

    /// Merge an update: the same (device, release, SPL) unions its CVEs.
    pub fn upsert_update(&mut self, update: DeviceUpdate) {
        self.updates
            .entry(update.key())
            .and_modify(|u| u.explicit_cves.extend(update.explicit_cves.iter().cloned()))
            .or_insert(update);
    }

    /// Merge a bulletin: the same SPL unions its CVEs.
    pub fn upsert_bulletin(&mut self, bulletin: AospBulletin) {
        for cve in &bulletin.cves {
            self.first_bulletin
                .entry(cve.clone())
                .and_modify(|d| *d = (*d).min(bulletin.spl_date))
                .or_insert(bulletin.spl_date);
        }
        self.bulletins
            .entry(bulletin.spl_date)
            .and_modify(|b| b.cves.extend(bulletin.cves.iter().cloned()))
            .or_insert(bulletin);
    }

    /// Store every accepted item of a parse result.
    pub fn ingest(
        &mut self,
        parsed: Ingested,
        table: &KeyTermTable,
    ) -> (IngestCounts, Vec<AugmentError>) {
        let mut counts = IngestCounts::default();
        let mut problems = Vec::new();
        match parsed {
            Ingested::Records(p) => {
                counts.records = p.items.len();
                for r in p.items {
                    problems.extend(self.upsert_record(r, table).1);
                }
            }
            Ingested::Chipsets(p) => {
                counts.chipsets = p.items.len();
                p.items.into_iter().for_each(|c| self.upsert_chipset(c));
            }
            Ingested::Smartphones(p) => {
                counts.smartphones = p.items.len();
                p.items.into_iter().for_each(|s| self.upsert_smartphone(s));
            }
            Ingested::Updates(p) => {
                counts.updates = p.items.len();
                p.items.into_iter().for_each(|u| self.upsert_update(u));
            }
            Ingested::Bulletins(p) => {
                counts.bulletins = p.items.len();
                p.items.into_iter().for_each(|b| self.upsert_bulletin(b));
            }
        }
        (counts, problems)
    }

    /// Recompute every vulnerability's derived fields with `table`.
    pub fn augment_all(&mut self, table: &KeyTermTable) -> Vec<AugmentError> {
        let mut problems = Vec::new();
        for vuln in self.vulnerabilities.values_mut() {
            problems.extend(augment(vuln, table));
        }
        problems
    }

    // ---- linking ----

    /// Chipsets a raw string names, restricted to `cm` when given.
    fn resolve(
        &self,
        raw: &str,
        cm: Option<ChipsetManufacturer>,
    ) -> Result<Vec<ChipsetKey>, &'static str> {
        let n = normalize_chipset_name(raw).map_err(|_| "normalization")?;
        let found: Vec<ChipsetKey> = self
            .by_model
            .get(&n.model_number)
            .into_iter()
            .flatten()
            .filter(|k| cm.is_none_or(|m| k.manufacturer == m))
            .cloned()
            .collect();
        if found.is_empty() {
            Err("no-match")
        } else {
            Ok(found)
        }
    }

    /// Links and unresolved strings of one vulnerability. CM strings only
    /// match chipsets of the bulletin's manufacturer; NVD strings match
    /// across manufacturers.
    fn compute_links(
        &self,
        vuln: &Vulnerability,
    ) -> (BTreeMap<ChipsetKey, BTreeSet<LinkSource>>, Vec<Unresolved>) {
        let mut links: BTreeMap<ChipsetKey, BTreeSet<LinkSource>> = BTreeMap::new();
        let mut unresolved = Vec::new();
        for r in &vuln.records {
            let scope = match r.source {
                Source::CmBulletin => r.manufacturer,
                Source::Nvd => None,
                _ => continue,
            };
            for raw in &r.affected_chipset_strings {
                match self.resolve(raw, scope) {
                    Ok(keys) => {
                        for k in keys {
                            links.entry(k).or_default().insert(LinkSource {
                                vantage_point: r.vantage_point,
                                raw: raw.clone(),
                            });
                        }
                    }
                    Err(reason) => unresolved.push(Unresolved {
                        subject: vuln.cve.to_string(),
                        vantage_point: Some(r.vantage_point),
                        raw: raw.clone(),
                        reason: reason.to_string(),
                    }),
                }
            }
        }
        (links, unresolved)
    }

    fn apply_links(
        &mut self,
        cve: &CveId,
        links: BTreeMap<ChipsetKey, BTreeSet<LinkSource>>,
        unresolved: Vec<Unresolved>,
    ) -> usize {
        for k in links.keys() {
            self.chipset_vulns
                .entry(k.clone())
                .or_default()
                .insert(cve.clone());
        }
        if let Some(v) = self.vulnerabilities.get_mut(cve) {
            v.affected_chipsets = links.keys().cloned().collect();
        }
        self.unresolved.extend(unresolved);
        let count = links.len();
        if count > 0 {
            self.vuln_links.insert(cve.clone(), links);
        }
        count
    }

    /// Relink one vulnerability to every chipset its CM and NVD records
    /// name. Returns the number of links.
    pub fn link_vulnerability(&mut self, cve: &CveId) -> Result<usize, KbError> {
        let vuln = self
            .vulnerabilities
            .get(cve)
            .ok_or_else(|| KbError::UnknownVulnerability(cve.clone()))?;
        let (links, unresolved) = self.compute_links(vuln);
        for chipset in self.vuln_links.remove(cve).unwrap_or_default().keys() {
            if let Some(set) = self.chipset_vulns.get_mut(chipset) {
                set.remove(cve);
            }
        }
        let subject = cve.to_string();
        self.unresolved.retain(|u| u.subject != subject);
        Ok(self.apply_links(cve, links, unresolved))
    }

    /// Resolve a smartphone's chipset. A device whose string matches no
    /// chipset, or several when the vendor is unknown, stays unlinked.
    fn link_device(&mut self, id: &DeviceId) -> bool {
        let Some(phone) = self.smartphones.get(id) else {
            return false;
        };
        let outcome = match self.resolve(&phone.chipset_raw, phone.chipset_vendor) {
            Ok(keys) if keys.len() == 1 => Ok(keys[0].clone()),
            Ok(_) => Err("ambiguous"),
            Err(e) => Err(e),
        };
        if let Some(old) = self.device_links.remove(id) {
            if let Some(set) = self.chipset_devices.get_mut(&old) {
                set.remove(id);
            }
        }
        let subject = id.to_string();
        self.unresolved
            .retain(|u| !(u.subject == subject && u.vantage_point.is_none()));
        match outcome {
            Ok(key) => {
                self.chipset_devices
                    .entry(key.clone())
                    .or_default()
                    .insert(id.clone());
                self.device_links.insert(id.clone(), key);
                true
            }
            Err(reason) => {
                let raw = phone.chipset_raw.clone();
                self.unresolved.insert(Unresolved {
                    subject,
                    vantage_point: None,
                    raw,
                    reason: reason.to_string(),
                });
                false
            }
        }
    }

    /// Rebuild every link from the stored records and catalogs.
    pub fn link_all(&mut self) -> LinkSummary {
        self.vuln_links.clear();
        self.device_links.clear();
        self.unresolved.clear();
        self.chipset_vulns.clear();
        self.chipset_devices.clear();
        let computed: Vec<_> = self
            .vulnerabilities
            .values()
            .map(|v| (v.cve.clone(), self.compute_links(v)))
            .collect();
        for (cve, (links, unresolved)) in computed {
            self.apply_links(&cve, links, unresolved);
        }
        let ids: Vec<DeviceId> = self.smartphones.keys().cloned().collect();
        for id in &ids {
            self.link_device(id);
        }
        LinkSummary {
            vulnerability_links: self.vuln_links.values().map(BTreeMap::len).sum(),
            device_links: self.device_links.len(),
            unresolved: self.unresolved.len(),
        }
    }

    // ---- queries ----

    pub fn chipsets(&self) -> impl Iterator<Item = &ChipsetModel> {
        self.chipsets.values()
    }

    pub fn chipset(&self, key: &ChipsetKey) -> Option<&ChipsetModel> {
        self.chipsets.get(key)
    }

    /// All catalogued smartphones, linked or not.
    pub fn smartphones(&self) -> impl Iterator<Item = &SmartphoneModel> {
        self.smartphones.values()
    }

    pub fn smartphone(&self, id: &DeviceId) -> Option<&SmartphoneModel> {
        self.smartphones.get(id)
    }

    /// Smartphones with a resolved chipset: the set S of the metrics.
    pub fn linked_smartphones(&self) -> impl Iterator<Item = &SmartphoneModel> {
        self.smartphones
            .values()
            .filter(|s| self.device_links.contains_key(&s.id))
    }

    pub fn vulnerabilities(&self) -> impl Iterator<Item = &Vulnerability> {
        self.vulnerabilities.values()
    }

    pub fn vulnerability(&self, cve: &CveId) -> Option<&Vulnerability> {
        self.vulnerabilities.get(cve)
    }

    pub fn updates(&self) -> impl Iterator<Item = &DeviceUpdate> {
        self.updates.values()
    }

    /// Updates of one device ordered by release date.
    pub fn updates_for(&self, device: &DeviceId) -> impl Iterator<Item = &DeviceUpdate> + '_ {
        let device = device.clone();
        self.updates
            .range((device.clone(), NaiveDate::MIN, None)..)
            .take_while(move |((d, _, _), _)| *d == device)
            .map(|(_, u)| u)
    }

    /// Whether any update is recorded for the device.
    pub fn has_update_info(&self, device: &DeviceId) -> bool {
        self.updates_for(device).next().is_some()
    }

    /// Updates whose device is not in the catalog.
    pub fn orphan_updates(&self) -> impl Iterator<Item = &DeviceUpdate> {
        self.updates
            .values()
            .filter(|u| !self.smartphones.contains_key(&u.device))
    }

    pub fn bulletins(&self) -> impl Iterator<Item = &AospBulletin> {
        self.bulletins.values()
    }

    /// Earliest SPL of an AOSP bulletin listing the CVE.
    pub fn first_bulletin_spl(&self, cve: &CveId) -> Option<NaiveDate> {
        self.first_bulletin.get(cve).copied()
    }

    /// V(c): vulnerabilities linked to a chipset.
    pub fn vulnerabilities_of(&self, chipset: &ChipsetKey) -> BTreeSet<CveId> {
        self.chipset_vulns.get(chipset).cloned().unwrap_or_default()
    }

    /// |V(c)| without cloning.
    pub fn vulnerability_count(&self, chipset: &ChipsetKey) -> usize {
        self.chipset_vulns.get(chipset).map_or(0, BTreeSet::len)
    }

    /// B(s): a smartphone's chipset.
    pub fn chipset_of(&self, device: &DeviceId) -> Option<&ChipsetKey> {
        self.device_links.get(device)
    }

    /// Smartphones built on a chipset.
    pub fn devices_on(&self, chipset: &ChipsetKey) -> impl Iterator<Item = &DeviceId> {
        self.chipset_devices.get(chipset).into_iter().flatten()
    }

    /// {s ∈ S | v ∈ V(B(s))}, by traversal vulnerability → chipsets →
    /// smartphones.
    pub fn affected_smartphones(&self, cve: &CveId) -> BTreeSet<DeviceId> {
        let Some(v) = self.vulnerabilities.get(cve) else {
            return BTreeSet::new();
        };
        v.affected_chipsets
            .iter()
            .flat_map(|c| self.devices_on(c))
            .cloned()
            .collect()
    }

    /// Whether an update mitigates the CVE: it lists the CVE, or its SPL is
    /// on or after the SPL of a bulletin listing the CVE.
    pub fn update_mitigates(&self, update: &DeviceUpdate, cve: &CveId) -> bool {
        update.explicit_cves.contains(cve)
            || matches!((update.spl_date, self.first_bulletin_spl(cve)), (Some(u), Some(b)) if b <= u)
    }

    /// Updates of `device` mitigating `cve`, by release date.
    pub fn mitigating_updates(&self, cve: &CveId, device: &DeviceId) -> Vec<&DeviceUpdate> {
        let mut out: Vec<&DeviceUpdate> = self
            .updates_for(device)
            .filter(|u| self.update_mitigates(u, cve))
            .collect();
        out.sort_by(|a, b| a.release_date.cmp(&b.release_date).then_with(|| a.cmp(b)));
        out
    }

    /// Links with their provenance, ordered by CVE then chipset.
    pub fn vulnerability_links(&self) -> impl Iterator<Item = VulnerabilityLink> + '_ {
        self.vuln_links.iter().flat_map(|(cve, links)| {
            links
                .iter()
                .map(move |(chipset, sources)| VulnerabilityLink {
                    cve: cve.clone(),
                    chipset: chipset.clone(),
                    sources: sources.clone(),
                })
        })
    }

    pub fn device_links(&self) -> impl Iterator<Item = DeviceLink> + '_ {
        self.device_links
            .iter()
            .map(|(device, chipset)| DeviceLink {
                device: device.clone(),
                chipset: chipset.clone(),
            })
    }

    pub fn unresolved(&self) -> impl Iterator<Item = &Unresolved> {
        self.unresolved.iter()
    }

    /// Vulnerabilities where NVD and manufacturer bulletins disagree on the
    /// affected chipsets. Both sets stay linked; this only flags them.
    pub fn link_conflicts(&self) -> Vec<LinkConflict> {
        let mut out = Vec::new();
        for (cve, links) in &self.vuln_links {
            let (mut nvd_only, mut cm_only) = (Vec::new(), Vec::new());
            let (mut has_nvd, mut has_cm) = (false, false);
            for (chipset, sources) in links {
                let nvd = sources.iter().any(|s| s.vantage_point == VantagePoint::Nvd);
                let cm = sources.iter().any(|s| s.vantage_point != VantagePoint::Nvd);
                has_nvd |= nvd;
                has_cm |= cm;
                match (nvd, cm) {
                    (true, false) => nvd_only.push(chipset.clone()),
                    (false, true) => cm_only.push(chipset.clone()),
                    _ => {}
                }
            }
            if has_nvd && has_cm && !(nvd_only.is_empty() && cm_only.is_empty()) {
                out.push(LinkConflict {
                    cve: cve.clone(),
                    nvd_only,
                    cm_only,
                });
            }
        }
        out
    }

    /// Rebuild derived indexes after bulk loading the tables.
    fn reindex(&mut self) {
        self.by_model.clear();
        for key in self.chipsets.keys() {
            self.by_model
                .entry(key.model_number.clone())
                .or_default()
                .insert(key.clone());
        }
        self.chipset_vulns.clear();
        for (cve, links) in &self.vuln_links {
            for chipset in links.keys() {
                self.chipset_vulns
                    .entry(chipset.clone())
                    .or_default()
                    .insert(cve.clone());
            }
        }
        self.chipset_devices.clear();
        for (device, chipset) in &self.device_links {
            self.chipset_devices
                .entry(chipset.clone())
                .or_default()
                .insert(device.clone());
        }
        self.first_bulletin.clear();
        for b in self.bulletins.values() {
            for cve in &b.cves {
                self.first_bulletin.entry(cve.clone()).or_insert(b.spl_date);
            }
        }
    }

    /// Check that every link endpoint exists and that each vulnerability's
    /// affected chipsets equal its link rows.
    pub fn check_integrity(&self) -> Result<(), KbError> {
        for (cve, links) in &self.vuln_links {
            let Some(v) = self.vulnerabilities.get(cve) else {
                return Err(KbError::Dangling(cve.to_string(), "vulnerability"));
            };
            if let Some(chipset) = links.keys().find(|k| !self.chipsets.contains_key(*k)) {
                return Err(KbError::Dangling(format!("{cve}-{chipset}"), "chipset"));
            }
            if !links.keys().eq(v.affected_chipsets.iter()) {
                return Err(KbError::Dangling(cve.to_string(), "link row"));
            }
        }
        for (device, chipset) in &self.device_links {
            if !self.smartphones.contains_key(device) {
                return Err(KbError::Dangling(
                    format!("{device}-{chipset}"),
                    "smartphone",
                ));
            }
            if !self.chipsets.contains_key(chipset) {
                return Err(KbError::Dangling(format!("{device}-{chipset}"), "chipset"));
            }
        }
        if let Some(v) = self
            .vulnerabilities
            .values()
            .find(|v| !v.affected_chipsets.is_empty() && !self.vuln_links.contains_key(&v.cve))
        {
            return Err(KbError::Dangling(v.cve.to_string(), "link row"));
        }
        Ok(())
    }
}

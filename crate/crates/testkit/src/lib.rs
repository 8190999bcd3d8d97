//! Randomized knowledge-base instances and brute-force evaluations of the
//! lifecycle metrics, written directly from their set definitions and
//! independent of the library's indexes.

use std::collections::{BTreeMap, BTreeSet};

use chipkb_core::augment::KeyTermTable;
use chipkb_core::domain::{
    AospBulletin, ChipsetKey, ChipsetManufacturer, ChipsetModel, CveId, DeviceId, DeviceUpdate,
    ModelNumber, SmartphoneModel, Source, VantagePoint, VantagePointRecord,
};
use chipkb_core::kb::KnowledgeBase;
use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct WorldChipset {
    pub key: ChipsetKey,
    pub release: Option<NaiveDate>,
}

#[derive(Debug, Clone)]
pub struct WorldVuln {
    pub cve: CveId,
    /// Manufacturer publishing a bulletin record; none for NVD-only entries.
    pub manufacturer: Option<ChipsetManufacturer>,
    pub patch: Option<NaiveDate>,
    /// Chipset indexes listed by the manufacturer record.
    pub cm_affected: BTreeSet<usize>,
    /// Chipset indexes listed by an NVD record, if there is one.
    pub nvd_affected: Option<BTreeSet<usize>>,
}

impl WorldVuln {
    pub fn affected(&self) -> BTreeSet<usize> {
        let mut all = self.cm_affected.clone();
        all.extend(self.nvd_affected.iter().flatten());
        all
    }
}

#[derive(Debug, Clone)]
pub struct WorldPhone {
    pub id: DeviceId,
    pub name: String,
    /// None for phones whose chipset string matches no chipset.
    pub chipset: Option<usize>,
    pub release: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct WorldUpdate {
    pub phone: usize,
    pub release: NaiveDate,
    pub spl: Option<NaiveDate>,
    pub cves: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct WorldBulletin {
    pub spl: NaiveDate,
    pub cves: BTreeSet<usize>,
}

/// A small synthetic dataset described as plain lists.
#[derive(Debug, Clone)]
pub struct World {
    pub chipsets: Vec<WorldChipset>,
    pub vulns: Vec<WorldVuln>,
    pub phones: Vec<WorldPhone>,
    pub updates: Vec<WorldUpdate>,
    pub bulletins: Vec<WorldBulletin>,
}

#[derive(Debug, Clone, Copy)]
pub struct WorldParams {
    pub max_chipsets: usize,
    pub max_vulns: usize,
    pub max_phones: usize,
    /// Chance that a chipset has no release date.
    pub undated_chance: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            max_chipsets: 8,
            max_vulns: 30,
            max_phones: 20,
            undated_chance: 0.1,
        }
    }
}

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()
}

/// A date drawn from a coarse grid so that ties are common.
fn grid_date<R: Rng>(rng: &mut R, step_days: i64, steps: i64) -> NaiveDate {
    base_date() + Duration::days(step_days * rng.gen_range(0..steps))
}

fn month_start(d: NaiveDate) -> NaiveDate {
    d.with_day(1).unwrap()
}

fn subset<R: Rng>(rng: &mut R, from: &[usize], p: f64) -> BTreeSet<usize> {
    from.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

impl World {
    pub fn random<R: Rng>(rng: &mut R, params: WorldParams) -> World {
        let cms = [ChipsetManufacturer::Qualcomm, ChipsetManufacturer::Mediatek];
        let n_chipsets = rng.gen_range(1..=params.max_chipsets);
        let chipsets: Vec<WorldChipset> = (0..n_chipsets)
            .map(|i| {
                let cm = cms[rng.gen_range(0..cms.len())];
                let prefix = if cm == ChipsetManufacturer::Qualcomm {
                    "SM"
                } else {
                    "MT"
                };
                WorldChipset {
                    key: ChipsetKey {
                        manufacturer: cm,
                        model_number: ModelNumber::parse(&format!("{prefix}{}", 6000 + i)).unwrap(),
                    },
                    release: (!rng.gen_bool(params.undated_chance)).then(|| grid_date(rng, 91, 12)),
                }
            })
            .collect();

        let n_vulns = rng.gen_range(0..=params.max_vulns);
        let vulns: Vec<WorldVuln> = (0..n_vulns)
            .map(|i| {
                let cve: CveId = format!("CVE-2021-{:04}", 1000 + i).parse().unwrap();
                let nvd_only = rng.gen_bool(0.1);
                let cm = cms[rng.gen_range(0..cms.len())];
                let own: Vec<usize> = (0..n_chipsets)
                    .filter(|&c| chipsets[c].key.manufacturer == cm)
                    .collect();
                let all: Vec<usize> = (0..n_chipsets).collect();
                let nvd_affected = (nvd_only || rng.gen_bool(0.3)).then(|| subset(rng, &all, 0.3));
                WorldVuln {
                    cve,
                    manufacturer: (!nvd_only).then_some(cm),
                    patch: (!nvd_only).then(|| grid_date(rng, 30, 50)),
                    cm_affected: if nvd_only {
                        BTreeSet::new()
                    } else {
                        subset(rng, &own, 0.5)
                    },
                    nvd_affected,
                }
            })
            .collect();

        let n_phones = rng.gen_range(0..=params.max_phones);
        let phones: Vec<WorldPhone> = (0..n_phones)
            .map(|i| {
                let name = format!("P{i:02}");
                WorldPhone {
                    id: DeviceId::new("Acme", &name),
                    name,
                    chipset: (!rng.gen_bool(0.1)).then(|| rng.gen_range(0..n_chipsets)),
                    release: grid_date(rng, 45, 30),
                }
            })
            .collect();

        let vuln_idx: Vec<usize> = (0..n_vulns).collect();
        let mut updates = Vec::new();
        for p in 0..n_phones {
            for _ in 0..rng.gen_range(0..=3) {
                let release = grid_date(rng, 20, 80);
                let spl = rng
                    .gen_bool(0.6)
                    .then(|| month_start(release - Duration::days(rng.gen_range(0..90))));
                let mut cves = subset(rng, &vuln_idx, 0.08);
                if spl.is_none() && cves.is_empty() && n_vulns > 0 {
                    cves.insert(rng.gen_range(0..n_vulns));
                }
                if spl.is_some() || !cves.is_empty() {
                    updates.push(WorldUpdate {
                        phone: p,
                        release,
                        spl,
                        cves,
                    });
                }
            }
        }
        let bulletins = (0..rng.gen_range(0..=4))
            .map(|_| WorldBulletin {
                spl: month_start(grid_date(rng, 30, 50)),
                cves: subset(rng, &vuln_idx, 0.2),
            })
            .collect();

        World {
            chipsets,
            vulns,
            phones,
            updates,
            bulletins,
        }
    }

    /// Every fact of the world as a separate ingestion step.
    pub fn steps(&self) -> Vec<Step> {
        let mut out = Vec::new();
        for c in &self.chipsets {
            out.push(Step::Chipset(ChipsetModel {
                manufacturer: c.key.manufacturer,
                model_number: c.key.model_number.clone(),
                release_date: c.release,
                marketing_name: None,
            }));
        }
        let name = |i: &usize| self.chipsets[*i].key.model_number.to_string();
        for v in &self.vulns {
            if let (Some(cm), Some(patch)) = (v.manufacturer, v.patch) {
                let vp = match cm {
                    ChipsetManufacturer::Qualcomm => VantagePoint::QualcommBulletin,
                    _ => VantagePoint::MediatekBulletin,
                };
                let mut r = VantagePointRecord::new(Source::CmBulletin, vp, v.cve.clone(), patch);
                r.affected_chipset_strings = v.cm_affected.iter().map(name).collect();
                out.push(Step::Record(r));
            }
            if let Some(nvd) = &v.nvd_affected {
                let published = v.patch.unwrap_or_else(base_date) + Duration::days(3);
                let mut r = VantagePointRecord::new(
                    Source::Nvd,
                    VantagePoint::Nvd,
                    v.cve.clone(),
                    published,
                );
                r.affected_chipset_strings = nvd.iter().map(name).collect();
                out.push(Step::Record(r));
            }
        }
        for p in &self.phones {
            let (raw, vendor) = match p.chipset {
                Some(c) => (name(&c), Some(self.chipsets[c].key.manufacturer)),
                None => ("ZZ9999".to_string(), None),
            };
            out.push(Step::Smartphone(SmartphoneModel::new(
                "Acme", &p.name, &raw, vendor, p.release,
            )));
        }
        for u in &self.updates {
            let cves = u.cves.iter().map(|v| self.vulns[*v].cve.clone()).collect();
            out.push(Step::Update(
                DeviceUpdate::new(self.phones[u.phone].id.clone(), u.release, u.spl, cves).unwrap(),
            ));
        }
        for b in &self.bulletins {
            let cves = b.cves.iter().map(|v| self.vulns[*v].cve.clone()).collect();
            out.push(Step::Bulletin(AospBulletin::new(b.spl, cves).unwrap()));
        }
        out
    }

    pub fn knowledge_base(&self) -> KnowledgeBase {
        build(self.steps())
    }

    /// The knowledge base built from the steps in a shuffled order.
    pub fn knowledge_base_shuffled<R: Rng>(&self, rng: &mut R) -> KnowledgeBase {
        let mut steps = self.steps();
        steps.shuffle(rng);
        build(steps)
    }
}

#[derive(Debug, Clone)]
pub enum Step {
    Chipset(ChipsetModel),
    Record(VantagePointRecord),
    Smartphone(SmartphoneModel),
    Update(DeviceUpdate),
    Bulletin(AospBulletin),
}

pub fn build(steps: Vec<Step>) -> KnowledgeBase {
    let table = KeyTermTable::builtin();
    let mut kb = KnowledgeBase::new();
    for s in steps {
        match s {
            Step::Chipset(c) => kb.upsert_chipset(c),
            Step::Record(r) => {
                kb.upsert_record(r, table);
            }
            Step::Smartphone(p) => kb.upsert_smartphone(p),
            Step::Update(u) => kb.upsert_update(u),
            Step::Bulletin(b) => kb.upsert_bulletin(b),
        }
    }
    kb.link_all();
    kb
}

/// Brute-force evaluation over a [`World`].
pub struct Oracle<'a> {
    pub world: &'a World,
}

/// Introduction counts of one dated chipset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntroductionRow {
    pub total: usize,
    pub newly_introduced: usize,
    pub inherited: usize,
    pub persistent: usize,
    /// Next release date, vulnerabilities with a patch date, and those
    /// patched by that date.
    pub next: Option<(NaiveDate, usize, usize)>,
}

/// Outcome of the four unmitigated criteria for one vulnerability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mitigation {
    Ineligible,
    Mitigated,
    Unmitigated,
}

impl<'a> Oracle<'a> {
    pub fn new(world: &'a World) -> Self {
        Oracle { world }
    }

    pub fn vuln_index(&self, cve: &CveId) -> Option<usize> {
        self.world.vulns.iter().position(|v| &v.cve == cve)
    }

    pub fn chipset_index(&self, key: &ChipsetKey) -> Option<usize> {
        self.world.chipsets.iter().position(|c| &c.key == key)
    }

    fn in_v(&self, v: usize, c: usize) -> bool {
        self.world.vulns[v].affected().contains(&c)
    }

    /// Whether every chipset affected by `v` has a release date.
    pub fn dated(&self, v: usize) -> bool {
        (0..self.world.chipsets.len())
            .all(|c| !self.in_v(v, c) || self.world.chipsets[c].release.is_some())
    }

    /// For all c' in C: v in V(c') implies T_rel(c') >= T_rel(c). None when
    /// a release date it needs is missing or v does not affect c.
    pub fn newly_introduced(&self, v: usize, c: usize) -> Option<bool> {
        if !self.in_v(v, c) || !self.dated(v) {
            return None;
        }
        let own = self.world.chipsets[c].release?;
        Some(
            (0..self.world.chipsets.len())
                .filter(|&other| self.in_v(v, other))
                .all(|other| self.world.chipsets[other].release.unwrap() >= own),
        )
    }

    /// Not newly introduced, T_rel(c) <= T_patch(v), and v in V(c).
    pub fn persists_into(&self, v: usize, c: usize) -> Option<bool> {
        if !self.in_v(v, c) {
            return Some(false);
        }
        let patch = self.world.vulns[v].patch?;
        let newly = self.newly_introduced(v, c)?;
        Some(!newly && self.world.chipsets[c].release? <= patch)
    }

    /// Rows for dated chipsets, keyed by chipset.
    pub fn introduction(&self) -> BTreeMap<ChipsetKey, IntroductionRow> {
        let w = self.world;
        let mut out = BTreeMap::new();
        for (c, chip) in w.chipsets.iter().enumerate() {
            let Some(rel) = chip.release else { continue };
            let members: Vec<usize> = (0..w.vulns.len())
                .filter(|&v| self.in_v(v, c) && self.dated(v))
                .collect();
            let newly = members
                .iter()
                .filter(|&&v| self.newly_introduced(v, c) == Some(true))
                .count();
            let persistent = members
                .iter()
                .filter(|&&v| self.persists_into(v, c) == Some(true))
                .count();
            let next_release = w
                .chipsets
                .iter()
                .filter(|o| o.key.manufacturer == chip.key.manufacturer)
                .filter_map(|o| o.release)
                .filter(|&r| r > rel)
                .min();
            let next = next_release.map(|next| {
                let patched: Vec<NaiveDate> =
                    members.iter().filter_map(|&v| w.vulns[v].patch).collect();
                (
                    next,
                    patched.len(),
                    patched.iter().filter(|&&p| p <= next).count(),
                )
            });
            out.insert(
                chip.key.clone(),
                IntroductionRow {
                    total: members.len(),
                    newly_introduced: newly,
                    inherited: members.len() - newly,
                    persistent,
                    next,
                },
            );
        }
        out
    }

    /// {s in S | v in V(B(s))}.
    pub fn affected_smartphones(&self, v: usize) -> BTreeSet<DeviceId> {
        self.world
            .phones
            .iter()
            .filter(|p| p.chipset.is_some_and(|c| self.in_v(v, c)))
            .map(|p| p.id.clone())
            .collect()
    }

    fn phones_affected(&self, v: usize) -> Vec<usize> {
        (0..self.world.phones.len())
            .filter(|&p| {
                self.world.phones[p]
                    .chipset
                    .is_some_and(|c| self.in_v(v, c))
            })
            .collect()
    }

    fn has_update_info(&self, p: usize) -> bool {
        self.world.updates.iter().any(|u| u.phone == p)
    }

    /// The update lists v, or some bulletin listing v has an SPL on or
    /// before the update's SPL.
    pub fn mitigates(&self, u: &WorldUpdate, v: usize) -> bool {
        u.cves.contains(&v)
            || u.spl.is_some_and(|spl| {
                self.world
                    .bulletins
                    .iter()
                    .any(|b| b.cves.contains(&v) && b.spl <= spl)
            })
    }

    fn first_mitigation(&self, v: usize, p: usize) -> Option<NaiveDate> {
        self.world
            .updates
            .iter()
            .filter(|u| u.phone == p && self.mitigates(u, v))
            .map(|u| u.release)
            .min()
    }

    pub fn mitigation(&self, v: usize, cutoff: NaiveDate) -> Mitigation {
        let vuln = &self.world.vulns[v];
        let Some(patch) = vuln.patch else {
            return Mitigation::Ineligible;
        };
        let tracked: Vec<usize> = self
            .phones_affected(v)
            .into_iter()
            .filter(|&p| self.has_update_info(p))
            .collect();
        let eligible = !tracked.is_empty()
            && tracked
                .iter()
                .any(|&p| patch > self.world.phones[p].release)
            && patch < cutoff;
        if !eligible {
            Mitigation::Ineligible
        } else if tracked
            .iter()
            .all(|&p| self.first_mitigation(v, p).is_none())
        {
            Mitigation::Unmitigated
        } else {
            Mitigation::Mitigated
        }
    }

    /// (cve, device) -> days from patch to the first mitigating update.
    pub fn latencies(&self) -> BTreeMap<(CveId, DeviceId), i64> {
        let mut out = BTreeMap::new();
        for (v, vuln) in self.world.vulns.iter().enumerate() {
            let Some(patch) = vuln.patch else { continue };
            for p in self.phones_affected(v) {
                if let Some(first) = self.first_mitigation(v, p) {
                    out.insert(
                        (vuln.cve.clone(), self.world.phones[p].id.clone()),
                        (first - patch).num_days(),
                    );
                }
            }
        }
        out
    }

    /// cve -> (updated devices, spread, first-to-half) over devices with a
    /// mitigating update. First-to-half is the earliest date by which at
    /// least half of them were updated, minus the first update date.
    pub fn timeline(&self) -> BTreeMap<CveId, (usize, i64, i64)> {
        let mut out = BTreeMap::new();
        for (v, vuln) in self.world.vulns.iter().enumerate() {
            if vuln.patch.is_none() {
                continue;
            }
            let dates: Vec<NaiveDate> = self
                .phones_affected(v)
                .into_iter()
                .filter_map(|p| self.first_mitigation(v, p))
                .collect();
            let (Some(&first), Some(&last)) = (dates.iter().min(), dates.iter().max()) else {
                continue;
            };
            let m = dates.len();
            let half = dates
                .iter()
                .copied()
                .filter(|d| 2 * dates.iter().filter(|e| *e <= d).count() >= m)
                .min()
                .unwrap();
            out.insert(
                vuln.cve.clone(),
                (m, (last - first).num_days(), (half - first).num_days()),
            );
        }
        out
    }
}

/// Random coverage instance: `n` sets over a universe of `universe`
/// elements.
pub fn random_sets<R: Rng>(rng: &mut R, n: usize, universe: u32) -> Vec<BTreeSet<u32>> {
    (0..n)
        .map(|_| {
            let density = rng.gen_range(0.05..0.5);
            (0..universe).filter(|_| rng.gen_bool(density)).collect()
        })
        .collect()
}

/// Largest union of at most `k` sets, by enumerating every subset.
pub fn exhaustive_max_coverage<T: Ord>(sets: &[BTreeSet<T>], k: usize) -> usize {
    assert!(sets.len() <= 20, "exhaustive search is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << sets.len()) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let union: BTreeSet<&T> = sets
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .flat_map(|(_, s)| s.iter())
            .collect();
        best = best.max(union.len());
    }
    best
}

/// Directory of the shipped toyset documents.
pub fn toyset_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toyset")
}

/// Retrieval date the toyset documents are parsed with.
pub fn toyset_retrieved_at() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, 30).expect("valid date")
}

/// The toyset ingested, augmented with the built-in key-term table and
/// linked.
pub fn toyset() -> KnowledgeBase {
    let docs = chipkb_core::ingest::read_corpus(&toyset_dir(), toyset_retrieved_at())
        .expect("toyset is readable");
    let mut kb = KnowledgeBase::new();
    for (path, doc) in docs {
        let parsed = chipkb_core::ingest::parse_document(&doc)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(
            parsed.issues().is_empty(),
            "{}: {:?}",
            path.display(),
            parsed.issues()
        );
        kb.ingest(parsed, KeyTermTable::builtin());
    }
    kb.link_all();
    kb
}

/// Compares the library's introduction predicates and report with the
/// oracle on one world. Returns the first mismatch.
pub fn check_introduction(world: &World) -> Result<(), String> {
    use chipkb_core::analytics::{introduction_report, newly_introduced, persists_into};
    let kb = world.knowledge_base();
    let oracle = Oracle::new(world);
    for (v, vuln) in world.vulns.iter().enumerate() {
        for (c, chip) in world.chipsets.iter().enumerate() {
            let lib = newly_introduced(&kb, &vuln.cve, &chip.key).ok();
            if lib != oracle.newly_introduced(v, c) {
                return Err(format!(
                    "newly_introduced({}, {}): {lib:?} vs {:?}",
                    vuln.cve,
                    chip.key,
                    oracle.newly_introduced(v, c)
                ));
            }
            let lib = persists_into(&kb, &vuln.cve, &chip.key).ok();
            if lib != oracle.persists_into(v, c) {
                return Err(format!(
                    "persists_into({}, {}): {lib:?} vs {:?}",
                    vuln.cve,
                    chip.key,
                    oracle.persists_into(v, c)
                ));
            }
        }
    }
    let report = introduction_report(&kb);
    let expected = oracle.introduction();
    let got: BTreeMap<ChipsetKey, IntroductionRow> = report
        .chipsets
        .iter()
        .map(|r| {
            (
                r.chipset.clone(),
                IntroductionRow {
                    total: r.total,
                    newly_introduced: r.newly_introduced,
                    inherited: r.inherited,
                    persistent: r.persistent,
                    next: r
                        .next_release
                        .as_ref()
                        .map(|n| (n.release_date, n.considered, n.removed)),
                },
            )
        })
        .collect();
    if got != expected {
        return Err(format!("introduction rows differ:\n{got:?}\n{expected:?}"));
    }
    for r in &report.chipsets {
        if r.newly_introduced + r.inherited != r.total
            || r.total != kb.vulnerability_count(&r.chipset) - excluded_on(&report, &kb, &r.chipset)
        {
            return Err(format!("partition broken for {}", r.chipset));
        }
    }
    let excluded: BTreeSet<CveId> = report.excluded.iter().map(|e| e.cve.clone()).collect();
    let expected_excluded: BTreeSet<CveId> = world
        .vulns
        .iter()
        .enumerate()
        .filter(|(v, vuln)| !vuln.affected().is_empty() && !oracle.dated(*v))
        .map(|(_, vuln)| vuln.cve.clone())
        .collect();
    if excluded != expected_excluded {
        return Err(format!(
            "excluded differ: {excluded:?} vs {expected_excluded:?}"
        ));
    }
    Ok(())
}

fn excluded_on(
    report: &chipkb_core::analytics::IntroductionReport,
    kb: &KnowledgeBase,
    chipset: &ChipsetKey,
) -> usize {
    let members = kb.vulnerabilities_of(chipset);
    report
        .excluded
        .iter()
        .filter(|e| members.contains(&e.cve))
        .count()
}

/// Compares affected smartphones, the unmitigated criteria and the update
/// timeline with the oracle on one world.
pub fn check_updates(world: &World, cutoff: NaiveDate) -> Result<(), String> {
    use chipkb_core::analytics::{
        unmitigated_vulnerabilities, update_latencies, update_timeline_report,
    };
    let kb = world.knowledge_base();
    let oracle = Oracle::new(world);
    for (v, vuln) in world.vulns.iter().enumerate() {
        let lib = kb.affected_smartphones(&vuln.cve);
        if lib != oracle.affected_smartphones(v) {
            return Err(format!("affected_smartphones({}) differ", vuln.cve));
        }
    }
    let report = unmitigated_vulnerabilities(&kb, cutoff);
    for (v, vuln) in world.vulns.iter().enumerate() {
        let lib = if report.unmitigated.contains(&vuln.cve) {
            Mitigation::Unmitigated
        } else if report.mitigated.contains(&vuln.cve) {
            Mitigation::Mitigated
        } else {
            Mitigation::Ineligible
        };
        if lib != oracle.mitigation(v, cutoff) {
            return Err(format!(
                "mitigation of {}: {lib:?} vs {:?}",
                vuln.cve,
                oracle.mitigation(v, cutoff)
            ));
        }
    }
    let lib: BTreeMap<(CveId, DeviceId), i64> = update_latencies(&kb)
        .into_iter()
        .map(|p| ((p.cve, p.device), p.days))
        .collect();
    if lib != oracle.latencies() {
        return Err(format!(
            "latencies differ:\n{lib:?}\n{:?}",
            oracle.latencies()
        ));
    }
    let timeline = update_timeline_report(&kb);
    let lib: BTreeMap<CveId, (usize, i64, i64)> = timeline
        .entries
        .iter()
        .map(|e| {
            (
                e.cve.clone(),
                (e.updated_devices, e.spread_days, e.first_to_half_days),
            )
        })
        .collect();
    if lib != oracle.timeline() {
        return Err(format!(
            "timeline differs:\n{lib:?}\n{:?}",
            oracle.timeline()
        ));
    }
    let negative = oracle.latencies().values().filter(|d| **d < 0).count();
    if timeline.data_errors.len() != negative
        || timeline.pairs + negative != oracle.latencies().len()
    {
        return Err("latency data errors differ".into());
    }
    Ok(())
}

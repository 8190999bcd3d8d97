//! Publications per year and who found the vulnerabilities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{reference, share, ReferenceValue};
use crate::augment::AttributionMode;
use crate::domain::{ChipsetManufacturer, Component, DiscoveryAttribution};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Tally {
    total: usize,
    internal: usize,
    external: usize,
    unknown: usize,
}

impl Tally {
    fn add(&mut self, a: DiscoveryAttribution) {
        self.total += 1;
        match a {
            DiscoveryAttribution::Internal => self.internal += 1,
            DiscoveryAttribution::External => self.external += 1,
            DiscoveryAttribution::Unknown => self.unknown += 1,
        }
    }
}

/// Vulnerabilities of one manufacturer by CVE assignment year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRow {
    pub manufacturer: ChipsetManufacturer,
    pub year: u16,
    pub total: usize,
    pub internal: usize,
    pub external: usize,
    pub unknown: usize,
    pub internal_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturerShare {
    pub manufacturer: ChipsetManufacturer,
    pub total: usize,
    pub internal: usize,
    pub external: usize,
    pub unknown: usize,
    pub internal_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManufacturerCount {
    pub manufacturer: ChipsetManufacturer,
    pub total: usize,
    pub internal: usize,
}

/// One row of the per-component table; `component` is absent for
/// unclassified vulnerabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub component: Option<Component>,
    pub total: usize,
    pub internal: usize,
    pub internal_share: Option<f64>,
    pub per_manufacturer: Vec<ManufacturerCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub attribution_mode: AttributionMode,
    pub years: Vec<YearRow>,
    pub manufacturers: Vec<ManufacturerShare>,
    pub components: Vec<ComponentRow>,
    pub reference_values: Vec<ReferenceValue>,
}

/// Counts per manufacturer listing the vulnerability in its bulletins. A
/// vulnerability listed by two manufacturers counts for both.
pub fn discovery_report(kb: &KnowledgeBase, mode: AttributionMode) -> DiscoveryReport {
    let mut years: BTreeMap<(ChipsetManufacturer, u16), Tally> = BTreeMap::new();
    let mut overall: BTreeMap<ChipsetManufacturer, Tally> = BTreeMap::new();
    let mut components: BTreeMap<Option<Component>, BTreeMap<ChipsetManufacturer, Tally>> =
        BTreeMap::new();
    let mut component_totals: BTreeMap<Option<Component>, Tally> = BTreeMap::new();

    for v in kb.vulnerabilities() {
        let cms = v.manufacturers();
        if cms.is_empty() {
            continue;
        }
        let a = mode.apply(v);
        for &cm in &cms {
            years.entry((cm, v.cve.year())).or_default().add(a);
            overall.entry(cm).or_default().add(a);
            components
                .entry(v.component)
                .or_default()
                .entry(cm)
                .or_default()
                .add(a);
        }
        component_totals.entry(v.component).or_default().add(a);
    }

    let component_rows = Component::TABLE_ORDER
        .iter()
        .map(|c| Some(*c))
        .chain(std::iter::once(None))
        .map(|c| {
            let t = component_totals.get(&c).cloned().unwrap_or_default();
            ComponentRow {
                component: c,
                total: t.total,
                internal: t.internal,
                internal_share: share(t.internal, t.total),
                per_manufacturer: components
                    .get(&c)
                    .into_iter()
                    .flatten()
                    .map(|(cm, t)| ManufacturerCount {
                        manufacturer: *cm,
                        total: t.total,
                        internal: t.internal,
                    })
                    .collect(),
            }
        })
        .collect();

    DiscoveryReport {
        attribution_mode: mode,
        years: years
            .into_iter()
            .map(|((cm, year), t)| YearRow {
                manufacturer: cm,
                year,
                internal_share: share(t.internal, t.total),
                total: t.total,
                internal: t.internal,
                external: t.external,
                unknown: t.unknown,
            })
            .collect(),
        manufacturers: overall
            .into_iter()
            .map(|(cm, t)| ManufacturerShare {
                manufacturer: cm,
                internal_share: share(t.internal, t.total),
                total: t.total,
                internal: t.internal,
                external: t.external,
                unknown: t.unknown,
            })
            .collect(),
        components: component_rows,
        reference_values: vec![reference("qualcomm_2023_internal_share", 0.57, "share")],
    }
}

impl DiscoveryReport {
    pub fn year(&self, cm: ChipsetManufacturer, year: u16) -> Option<&YearRow> {
        self.years
            .iter()
            .find(|r| r.manufacturer == cm && r.year == year)
    }
}

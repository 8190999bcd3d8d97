//! Hand-enumerated facts about the shipped toyset: chipsets C1 = SM7125
//! (2020-01-01) and C2 = SM7225 (2021-01-01); v1 affects both, v2 only C2,
//! v3 only C1; Galaxy T1 runs C1, Galaxy T2 and T3 run C2.

use std::collections::BTreeSet;

use chipkb_core::analytics::{
    impact_report, introduction_report, newly_introduced, persists_into,
    unmitigated_vulnerabilities, update_latencies, DEFAULT_CUTOFF,
};
use chipkb_core::domain::{ChipsetKey, ChipsetManufacturer, CveId, DeviceId, ModelNumber};
use chipkb_core::picker::{coverage_delta, pick_devices, PickRequest};
use chipkb_testkit::{exhaustive_max_coverage, toyset};

fn c(model: &str) -> ChipsetKey {
    ChipsetKey {
        manufacturer: ChipsetManufacturer::Qualcomm,
        model_number: ModelNumber::parse(model).unwrap(),
    }
}

fn v(n: u32) -> CveId {
    format!("CVE-2021-190{n}").parse().unwrap()
}

fn s(n: u32) -> DeviceId {
    DeviceId::new("Samsung", &format!("Galaxy T{n}"))
}

#[test]
fn introduction_predicates() {
    let kb = toyset();
    assert!(newly_introduced(&kb, &v(1), &c("SM7125")).unwrap());
    assert!(!newly_introduced(&kb, &v(1), &c("SM7225")).unwrap());
    assert!(newly_introduced(&kb, &v(2), &c("SM7225")).unwrap());
    assert!(persists_into(&kb, &v(1), &c("SM7225")).unwrap());
    assert!(!persists_into(&kb, &v(3), &c("SM7225")).unwrap());
}

#[test]
fn introduction_report_counts() {
    let kb = toyset();
    let report = introduction_report(&kb);
    let row = |m: &str| report.chipsets.iter().find(|r| r.chipset == c(m)).unwrap();
    let c1 = row("SM7125");
    assert_eq!((c1.total, c1.newly_introduced, c1.inherited), (2, 2, 0));
    let c2 = row("SM7225");
    assert_eq!((c2.total, c2.newly_introduced, c2.inherited), (2, 1, 1));
    assert_eq!(report.aggregate.pooled_inherited_share, Some(0.25));
}

#[test]
fn impact_of_v1() {
    let kb = toyset();
    let impact = impact_report(&kb, &v(1)).unwrap();
    assert_eq!(impact.chipsets, [c("SM7125"), c("SM7225")]);
    assert_eq!(impact.smartphone_count, 3);
    assert_eq!(impact.per_oem.get("Samsung"), Some(&3));
    assert_eq!(
        kb.affected_smartphones(&v(1)),
        BTreeSet::from([s(1), s(2), s(3)])
    );
}

#[test]
fn chipset_page_facts() {
    let kb = toyset();
    assert_eq!(
        kb.vulnerabilities_of(&c("SM7225")),
        BTreeSet::from([v(1), v(2)])
    );
    let devices: BTreeSet<_> = kb.devices_on(&c("SM7225")).cloned().collect();
    assert_eq!(devices, BTreeSet::from([s(2), s(3)]));
}

#[test]
fn unmitigated_and_latencies() {
    let kb = toyset();
    let r = unmitigated_vulnerabilities(&kb, DEFAULT_CUTOFF);
    assert_eq!(r.eligible, 3);
    assert_eq!(r.mitigated, [v(1), v(3)]);
    assert_eq!(r.unmitigated, [v(2)]);
    let pairs: Vec<(CveId, DeviceId, i64)> = update_latencies(&kb)
        .into_iter()
        .map(|p| (p.cve, p.device, p.days))
        .collect();
    assert_eq!(
        pairs,
        [(v(1), s(1), 49), (v(1), s(2), 75), (v(3), s(1), 49)]
    );
}

#[test]
fn picker_examples() {
    let kb = toyset();
    assert_eq!(coverage_delta(&kb, &[s(1)], &s(2)).unwrap(), 1);

    let req = PickRequest {
        k: 2,
        filters: Default::default(),
        locked: vec![s(3)],
    };
    let result = pick_devices(&kb, &req).unwrap();
    assert_eq!(result.selection[0].device, s(3));
    assert!(result.selection[0].locked);
    let sets: Vec<BTreeSet<CveId>> = [s(1), s(2), s(3)]
        .iter()
        .map(|d| kb.vulnerabilities_of(kb.chipset_of(d).unwrap()))
        .collect();
    assert_eq!(result.total_covered, exhaustive_max_coverage(&sets, 2));
    assert_eq!(result.total_covered, 3);
}

//! Every fixture under `tests/fixtures/<vantage-point>/` parses to exactly the
//! lines of its `.golden.jsonl` sibling. Set `CHIPKB_UPDATE_GOLDEN=1` to
//! rewrite the golden files after an intended change, then review the diff.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chipkb_core::domain::VantagePoint;
use chipkb_core::ingest::{parse_document, read_corpus, render_golden, Ingested, ParseError};
use chrono::NaiveDate;

/// Directory, file, accepted item count, (issue rule, is reject).
type Case = (
    &'static str,
    &'static str,
    usize,
    &'static [(&'static str, bool)],
);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn retrieved() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, 30).unwrap()
}

fn golden_path(doc: &Path) -> PathBuf {
    let stem = doc.file_stem().unwrap().to_str().unwrap();
    doc.with_file_name(format!("{stem}.golden.jsonl"))
}

fn outcome(dir: &str, file: &str) -> Result<Ingested, ParseError> {
    let path = fixtures().join(dir).join(file);
    let vp: VantagePoint = dir.parse().unwrap();
    let doc = chipkb_core::ingest::read_document(vp, &path, retrieved()).unwrap();
    parse_document(&doc)
}

#[test]
fn every_fixture_matches_its_golden_file() {
    let update = std::env::var_os("CHIPKB_UPDATE_GOLDEN").is_some();
    let docs = read_corpus(&fixtures(), retrieved()).unwrap();
    assert!(docs.len() >= 13);
    let mut mismatches = Vec::new();
    for (path, doc) in docs {
        let actual = render_golden(&parse_document(&doc));
        let golden = golden_path(&path);
        if update {
            fs::write(&golden, &actual).unwrap();
        }
        let expected =
            fs::read_to_string(&golden).unwrap_or_else(|e| panic!("{}: {e}", golden.display()));
        if actual != expected {
            mismatches.push(path.display().to_string());
        }
    }
    assert!(mismatches.is_empty(), "golden mismatches: {mismatches:?}");
}

#[test]
fn every_vantage_point_has_a_fixture() {
    let docs = read_corpus(&fixtures(), retrieved()).unwrap();
    let covered: BTreeSet<VantagePoint> = docs.iter().map(|(_, d)| d.vantage_point).collect();
    let all: BTreeSet<VantagePoint> = VantagePoint::ALL.iter().copied().collect();
    assert_eq!(covered, all);
}

/// Item count and issue rules (with severity) per fixture, listed by hand.
#[test]
fn fixture_outcomes_match_manual_listing() {
    let cases: &[Case] = &[
        (
            "qualcomm-bulletin",
            "march-2024-bad-cve.html",
            2,
            &[("cve-pattern", true)],
        ),
        (
            "qualcomm-bulletin",
            "score-out-of-range.html",
            0,
            &[("severity-range", true)],
        ),
        ("mediatek-bulletin", "march-2024.html", 2, &[]),
        ("samsung-mobile-bulletin", "march-2024.html", 2, &[]),
        ("samsung-semiconductor-bulletin", "march-2024.html", 2, &[]),
        ("unisoc-bulletin", "march-2024.html", 1, &[]),
        (
            "samsung-updates",
            "galaxy-a41.html",
            1,
            &[("missing-evidence", true)],
        ),
        (
            "xiaomi-updates",
            "updates.html",
            1,
            &[("date-format", true), ("missing-evidence", true)],
        ),
        (
            "tecno-updates",
            "updates.json",
            2,
            &[("missing-label", true)],
        ),
        (
            "tecno-changesets",
            "2022-q1.json",
            2,
            &[("cve-pattern", true), ("missing-value", true)],
        ),
        ("aosp-bulletin", "2023-09-01.html", 1, &[]),
        ("nvd", "CVE-2022-33251.json", 1, &[]),
        ("nvd", "no-cpe.json", 1, &[("missing-cpe", false)]),
        (
            "nvd",
            "score-out-of-range.json",
            0,
            &[("severity-range", true), ("missing-cpe", false)],
        ),
        ("gsmarena", "catalog.html", 2, &[]),
        (
            "wikipedia-chipsets",
            "mediatek.html",
            1,
            &[("missing-value", true)],
        ),
        ("wikipedia-chipsets", "qualcomm.html", 3, &[]),
    ];
    for &(dir, file, items, rules) in cases {
        let parsed = outcome(dir, file).unwrap_or_else(|e| panic!("{dir}/{file}: {e}"));
        assert_eq!(parsed.item_count(), items, "{dir}/{file}");
        let got: Vec<(&str, bool)> = parsed
            .issues()
            .iter()
            .map(|i| (i.rule.as_str(), i.is_reject()))
            .collect();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        let mut want: Vec<(&str, bool)> = rules.to_vec();
        want.sort();
        assert_eq!(got_sorted, want, "{dir}/{file}");
    }
}

#[test]
fn document_level_failures() {
    assert_eq!(
        outcome("aosp-bulletin", "missing-spl.html").unwrap_err(),
        ParseError::MissingSpl
    );
    assert!(matches!(
        outcome("aosp-bulletin", "mid-month-spl.html").unwrap_err(),
        ParseError::InvalidField { ref rule, .. } if rule == "spl-first-of-month"
    ));
    assert_eq!(
        outcome("mediatek-bulletin", "empty-table.html").unwrap_err(),
        ParseError::NoEntries {
            anchor: "CVE".into()
        }
    );
}

#[test]
fn selected_field_values() {
    let Ok(Ingested::Bulletins(p)) = outcome("aosp-bulletin", "2023-09-01.html") else {
        panic!()
    };
    assert_eq!(
        p.items[0].spl_date,
        NaiveDate::from_ymd_opt(2023, 9, 1).unwrap()
    );
    assert_eq!(p.items[0].cves.len(), 5);

    let Ok(Ingested::Chipsets(p)) = outcome("wikipedia-chipsets", "qualcomm.html") else {
        panic!()
    };
    let sm8150 = p
        .items
        .iter()
        .find(|c| c.model_number.as_str() == "SM8150")
        .unwrap();
    assert_eq!(sm8150.release_date, NaiveDate::from_ymd_opt(2018, 12, 4));

    let Ok(Ingested::Records(p)) = outcome("qualcomm-bulletin", "march-2024-bad-cve.html") else {
        panic!()
    };
    assert_eq!(p.items[0].component_raw.as_deref(), Some("WLAN Firmware"));
    assert_eq!(p.issues[0].entry, Some(1));

    let Ok(Ingested::Records(p)) = outcome("nvd", "CVE-2022-33251.json") else {
        panic!()
    };
    assert_eq!(p.items[0].affected_chipset_strings, ["sm8475"]);

    let Ok(Ingested::Smartphones(p)) = outcome("gsmarena", "catalog.html") else {
        panic!()
    };
    assert_eq!(p.excluded.len(), 1);

    let Ok(Ingested::Updates(p)) = outcome("samsung-updates", "galaxy-a41.html") else {
        panic!()
    };
    assert!(p.items[0].spl_date.is_some() && !p.items[0].explicit_cves.is_empty());
}

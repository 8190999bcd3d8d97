#![no_main]

use chipkb_core::domain::VantagePoint;
use chipkb_core::ingest::{parse_oem_changelog, render_golden, Ingested, SourceDocument};
use chrono::NaiveDate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|input: (u8, &str)| {
    let (pick, body) = input;
    let changelogs: Vec<VantagePoint> = VantagePoint::ALL
        .iter()
        .copied()
        .filter(|vp| vp.changelog_oem().is_some())
        .collect();
    let vp = changelogs[pick as usize % changelogs.len()];
    let oem = vp.changelog_oem().unwrap();
    let retrieved = NaiveDate::from_ymd_opt(2024, 4, 30).unwrap();
    let Ok(doc) = SourceDocument::new(vp, retrieved, body) else {
        return;
    };
    let _ = render_golden(&parse_oem_changelog(&doc, oem).map(Ingested::Updates));
});

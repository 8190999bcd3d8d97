#![no_main]

use chipkb_core::domain::VantagePoint;
use chipkb_core::ingest::{parse_cm_bulletin, render_golden, Ingested, SourceDocument};
use chrono::NaiveDate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|input: (u8, &str)| {
    let (pick, body) = input;
    let bulletins: Vec<VantagePoint> = VantagePoint::ALL
        .iter()
        .copied()
        .filter(|vp| vp.bulletin_manufacturer().is_some())
        .collect();
    let vp = bulletins[pick as usize % bulletins.len()];
    let cm = vp.bulletin_manufacturer().unwrap();
    let retrieved = NaiveDate::from_ymd_opt(2024, 4, 30).unwrap();
    let Ok(doc) = SourceDocument::new(vp, retrieved, body) else {
        return;
    };
    let _ = render_golden(&parse_cm_bulletin(&doc, cm).map(Ingested::Records));
});

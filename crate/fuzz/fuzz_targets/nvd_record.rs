#![no_main]

use chipkb_core::domain::VantagePoint;
use chipkb_core::ingest::{parse_document, parse_nvd_record, render_golden, SourceDocument};
use chrono::NaiveDate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|body: &str| {
    let retrieved = NaiveDate::from_ymd_opt(2024, 4, 30).unwrap();
    let Ok(doc) = SourceDocument::new(VantagePoint::Nvd, retrieved, body) else {
        return;
    };
    let _ = parse_nvd_record(&doc);
    let _ = render_golden(&parse_document(&doc));
});

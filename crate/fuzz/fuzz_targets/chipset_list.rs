#![no_main]

use chipkb_core::domain::VantagePoint;
use chipkb_core::ingest::{
    parse_chipset_release_dates, parse_document, render_golden, SourceDocument,
};
use chrono::NaiveDate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|body: &str| {
    let retrieved = NaiveDate::from_ymd_opt(2024, 4, 30).unwrap();
    let Ok(doc) = SourceDocument::new(VantagePoint::WikipediaChipsets, retrieved, body) else {
        return;
    };
    let _ = parse_chipset_release_dates(&doc);
    let _ = render_golden(&parse_document(&doc));
});

#![no_main]

use chipkb_core::ingest::{parse_calendar_date, parse_release_date};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|raw: &str| {
    let _ = parse_calendar_date(raw);
    let _ = parse_release_date(raw);
});

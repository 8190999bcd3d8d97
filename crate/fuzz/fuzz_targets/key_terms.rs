#![no_main]

use chipkb_core::augment::{classify_component, classify_location, KeyTermTable};
use chipkb_core::domain::ChipsetManufacturer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|input: (&str, &str)| {
    let (table, text) = input;
    let Ok(table) = KeyTermTable::parse(table) else {
        return;
    };
    for &cm in ChipsetManufacturer::ALL {
        let _ = classify_component(text, cm, &table);
        let _ = classify_location(text, cm, &table);
    }
});

#![no_main]

use std::collections::BTreeMap;

use chipkb_core::kb::KnowledgeBase;
use libfuzzer_sys::fuzz_target;

const TABLES: [&str; 8] = [
    "chipsets",
    "smartphones",
    "vulnerabilities",
    "device_updates",
    "aosp_bulletins",
    "vulnerability_chipsets",
    "smartphone_chipsets",
    "unresolved",
];

// Tables are separated by NUL bytes, in `TABLES` order.
fuzz_target!(|input: &str| {
    let mut parts = input.split('\0');
    let tables: BTreeMap<String, String> = TABLES
        .iter()
        .map(|t| (t.to_string(), parts.next().unwrap_or("").to_string()))
        .collect();
    if let Ok(kb) = KnowledgeBase::import_tables(&tables) {
        let exported = kb.export_tables();
        let again = KnowledgeBase::import_tables(&exported).expect("exported tables re-import");
        assert_eq!(again.export_tables(), exported);
    }
});

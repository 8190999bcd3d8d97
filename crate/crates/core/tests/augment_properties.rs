use chipkb_core::augment::{augment, classify_component, classify_location, KeyTermTable};
use chipkb_core::domain::{
    ChipsetManufacturer, Location, Source, VantagePoint, VantagePointRecord,
};
use chipkb_core::kb::KnowledgeBase;
use chrono::NaiveDate;
use proptest::prelude::*;

fn words() -> impl Strategy<Value = String> {
    let vocab = prop::sample::select(vec![
        "Modem",
        "WLAN",
        "Adreno",
        "QSEE",
        "kernel",
        "driver",
        "firmware",
        "Kinibi",
        "camera",
        "audio",
        "display",
        "memory",
        "corruption",
        "in",
        "the",
        "a",
        "buffer",
        "overflow",
        "Bluetooth",
        "GNSS",
    ]);
    prop::collection::vec(vocab, 0..8).prop_map(|w| w.join(" "))
}

fn cm() -> impl Strategy<Value = ChipsetManufacturer> {
    prop::sample::select(ChipsetManufacturer::ALL.to_vec())
}

proptest! {
    #[test]
    fn classification_is_deterministic_and_case_insensitive(text in words(), cm in cm()) {
        let t = KeyTermTable::builtin();
        // Ambiguity errors quote the input text, so compare outcomes only.
        let a = classify_component(&text, cm, t);
        prop_assert_eq!(&a, &classify_component(&text, cm, t));
        prop_assert_eq!(a.ok(), classify_component(&text.to_uppercase(), cm, t).ok());
        prop_assert_eq!(
            classify_location(&text, cm, t).ok(),
            classify_location(&text.to_lowercase(), cm, t).ok()
        );
    }

    #[test]
    fn augmenting_twice_changes_nothing(raw in words(), description in words()) {
        let t = KeyTermTable::builtin();
        let mut kb = KnowledgeBase::new();
        let mut r = VantagePointRecord::new(
            Source::CmBulletin,
            VantagePoint::QualcommBulletin,
            "CVE-2022-1000".parse().unwrap(),
            NaiveDate::from_ymd_opt(2022, 1, 3).unwrap(),
        );
        r.component_raw = Some(raw);
        r.description = description;
        kb.upsert_record(r, t);
        let mut v = kb.vulnerabilities().next().unwrap().clone();
        let once = v.clone();
        augment(&mut v, t);
        prop_assert_eq!(v, once);
    }

    #[test]
    fn a_classified_location_survives_appending_text_without_terms(raw in words(), cm in cm()) {
        let t = KeyTermTable::builtin();
        if let Ok(loc) = classify_location(&raw, cm, t) {
            if loc != Location::Unknown {
                let longer = format!("{raw} zzz");
                prop_assert_eq!(classify_location(&longer, cm, t), Ok(loc));
            }
        }
    }
}

use chipkb_core::domain::{CveId, DeviceId};

#[test]
fn toyset_has_the_documented_shape() {
    let kb = chipkb_testkit::toyset();
    assert_eq!(kb.chipsets().count(), 2);
    assert_eq!(kb.smartphones().count(), 3);
    assert_eq!(kb.vulnerabilities().count(), 3);
    let v1: CveId = "CVE-2021-1901".parse().unwrap();
    let phones = kb.affected_smartphones(&v1);
    assert_eq!(phones.len(), 3);
    assert!(phones.contains(&DeviceId::new("Samsung", "Galaxy T3")));
    assert_eq!(kb.unresolved().count(), 0);
}

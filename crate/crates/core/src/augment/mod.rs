//! Derived vulnerability fields: component and location via key terms,
//! discovery attribution, report and patch dates.

mod terms;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ChipsetManufacturer, Component, CveId, DiscoveryAttribution, Location, VantagePointRecord,
    Vulnerability,
};
use crate::ingest::validate::is_placeholder;

pub use terms::{KeyTermError, KeyTermTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AugmentError {
    #[error("ambiguous {manufacturer} key terms for `{text}`: {}", terms.join(", "))]
    Ambiguous {
        manufacturer: ChipsetManufacturer,
        text: String,
        terms: Vec<String>,
    },
    #[error("{0} has no chipset-manufacturer bulletin record")]
    NoCmRecord(CveId),
}

/// Longest case-insensitive substring match among `candidates`. Equally
/// long matches naming different values are an error.
fn longest_match<'a, T: Copy + Eq>(
    text: &str,
    cm: ChipsetManufacturer,
    candidates: impl Iterator<Item = (&'a str, &'a str, T)>,
) -> Result<Option<T>, AugmentError> {
    let haystack = text.to_lowercase();
    let mut best: Vec<(&str, usize, T)> = Vec::new();
    for (term, folded, value) in candidates {
        if !haystack.contains(folded) {
            continue;
        }
        let len = folded.chars().count();
        match best.first().map(|b| b.1) {
            Some(l) if l > len => {}
            Some(l) if l == len => best.push((term, len, value)),
            _ => best = vec![(term, len, value)],
        }
    }
    let Some(&(_, _, winner)) = best.first() else {
        return Ok(None);
    };
    if best.iter().any(|b| b.2 != winner) {
        return Err(AugmentError::Ambiguous {
            manufacturer: cm,
            text: text.to_string(),
            terms: best.iter().map(|b| b.0.to_string()).collect(),
        });
    }
    Ok(Some(winner))
}

/// Map a manufacturer's component wording to the common nomenclature.
/// `None` means no key term matched.
pub fn classify_component(
    component_raw: &str,
    cm: ChipsetManufacturer,
    table: &KeyTermTable,
) -> Result<Option<Component>, AugmentError> {
    let candidates = table
        .terms_for(cm)
        .filter_map(|(e, f)| e.component.map(|c| (e.term.as_str(), f, c)));
    longest_match(component_raw, cm, candidates)
}

/// Classify text as firmware or driver using location-bearing key terms.
pub fn classify_location(
    text: &str,
    cm: ChipsetManufacturer,
    table: &KeyTermTable,
) -> Result<Location, AugmentError> {
    let candidates = table
        .terms_for(cm)
        .filter_map(|(e, f)| e.location.map(|l| (e.term.as_str(), f, l)));
    Ok(longest_match(text, cm, candidates)?.unwrap_or(Location::Unknown))
}

/// Whether a credit line names someone outside the manufacturer.
fn names_external_discoverer(credit: &str) -> bool {
    let lower = credit.trim().to_lowercase();
    !is_placeholder(&lower) && !lower.contains("internal") && !lower.starts_with("anonymous")
}

/// Who found the issue, as far as one bulletin record tells. Qualcomm
/// publishes an explicit internal/external flag; elsewhere a named credit
/// means an external discoverer and anything else stays unknown.
pub fn classify_discovery(
    record: &VantagePointRecord,
    cm: ChipsetManufacturer,
) -> DiscoveryAttribution {
    if cm == ChipsetManufacturer::Qualcomm {
        if let Some(internal) = record.internal_flag {
            return if internal {
                DiscoveryAttribution::Internal
            } else {
                DiscoveryAttribution::External
            };
        }
    }
    match record.credit.as_deref() {
        Some(c) if names_external_discoverer(c) => DiscoveryAttribution::External,
        _ => DiscoveryAttribution::Unknown,
    }
}

/// Earliest manufacturer bulletin publication date.
pub fn resolve_patch_date(vuln: &Vulnerability) -> Result<NaiveDate, AugmentError> {
    vuln.cm_records()
        .map(|r| r.publication_date)
        .min()
        .ok_or_else(|| AugmentError::NoCmRecord(vuln.cve.clone()))
}

/// How uncredited discoveries count in internal-share figures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionMode {
    /// Unknown is its own category.
    #[default]
    Strict,
    /// Unknown counts as Internal for manufacturers without an explicit
    /// flag, giving an upper bound on the internal share.
    UpperBoundInternal,
}

impl AttributionMode {
    pub const ALL: [AttributionMode; 2] =
        [AttributionMode::Strict, AttributionMode::UpperBoundInternal];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributionMode::Strict => "strict",
            AttributionMode::UpperBoundInternal => "upper-bound-internal",
        }
    }

    pub fn apply(self, vuln: &Vulnerability) -> DiscoveryAttribution {
        match (self, vuln.attribution) {
            (AttributionMode::UpperBoundInternal, DiscoveryAttribution::Unknown)
                if !vuln
                    .manufacturers()
                    .contains(&ChipsetManufacturer::Qualcomm) =>
            {
                DiscoveryAttribution::Internal
            }
            (_, a) => a,
        }
    }
}

impl std::fmt::Display for AttributionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AttributionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributionMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                format!("unknown attribution mode `{s}` (expected strict or upper-bound-internal)")
            })
    }
}

/// Manufacturer bulletin records in publication order, ties broken by
/// vantage point so the result does not depend on storage order.
fn ordered_cm_records(vuln: &Vulnerability) -> Vec<&VantagePointRecord> {
    let mut records: Vec<&VantagePointRecord> = vuln.cm_records().collect();
    records.sort_by_key(|r| (r.publication_date, r.vantage_point));
    records
}

/// Recompute every field derived from `vuln.records` except the affected
/// chipsets. Ambiguous key-term matches leave the affected text
/// unclassified and are returned so they can be curated.
pub fn augment(vuln: &mut Vulnerability, table: &KeyTermTable) -> Vec<AugmentError> {
    let mut problems = Vec::new();
    let cm_records = ordered_cm_records(vuln);

    let mut component = None;
    'component: for pass in [true, false] {
        for r in &cm_records {
            let Some(cm) = r.manufacturer else { continue };
            let text = if pass {
                r.component_raw.as_deref()
            } else {
                Some(r.description.as_str())
            };
            let Some(text) = text.filter(|t| !t.trim().is_empty()) else {
                continue;
            };
            match classify_component(text, cm, table) {
                Ok(Some(c)) => {
                    component = Some(c);
                    break 'component;
                }
                Ok(None) => {}
                Err(e) => problems.push(e),
            }
        }
    }

    let primary_cm = cm_records.iter().find_map(|r| r.manufacturer);
    let mut texts: Vec<(ChipsetManufacturer, &str)> = Vec::new();
    for r in &cm_records {
        let Some(cm) = r.manufacturer else { continue };
        texts.extend(r.component_raw.as_deref().map(|t| (cm, t)));
        texts.push((cm, r.description.as_str()));
    }
    if let Some(cm) = primary_cm {
        texts.extend(vuln.nvd_records().map(|r| (cm, r.description.as_str())));
    }
    let mut location = Location::Unknown;
    for (cm, text) in texts {
        match classify_location(text, cm, table) {
            Ok(Location::Unknown) => {}
            Ok(l) => {
                location = l;
                break;
            }
            Err(e) => problems.push(e),
        }
    }

    let votes: Vec<DiscoveryAttribution> = cm_records
        .iter()
        .filter_map(|r| r.manufacturer.map(|cm| classify_discovery(r, cm)))
        .collect();
    let attribution = if votes.contains(&DiscoveryAttribution::External) {
        DiscoveryAttribution::External
    } else if votes.contains(&DiscoveryAttribution::Internal) {
        DiscoveryAttribution::Internal
    } else {
        DiscoveryAttribution::Unknown
    };

    let report_date = cm_records.iter().filter_map(|r| r.reported_date).min();
    let patch_date = resolve_patch_date(vuln).ok();

    vuln.component = component;
    vuln.location = location;
    vuln.attribution = attribution;
    vuln.report_date = report_date;
    vuln.patch_date = patch_date;
    problems
}

/// A vulnerability with no derived fields yet.
pub fn blank_vulnerability(cve: CveId, records: Vec<VantagePointRecord>) -> Vulnerability {
    Vulnerability {
        cve,
        records,
        component: None,
        location: Location::Unknown,
        attribution: DiscoveryAttribution::Unknown,
        report_date: None,
        patch_date: None,
        affected_chipsets: Default::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ComponentKeyTerm, Source, VantagePoint};

    const Q: ChipsetManufacturer = ChipsetManufacturer::Qualcomm;
    const M: ChipsetManufacturer = ChipsetManufacturer::Mediatek;
    const U: ChipsetManufacturer = ChipsetManufacturer::Unisoc;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn term(
        cm: ChipsetManufacturer,
        t: &str,
        c: Option<Component>,
        l: Option<Location>,
    ) -> ComponentKeyTerm {
        ComponentKeyTerm {
            manufacturer: cm,
            term: t.into(),
            component: c,
            location: l,
        }
    }

    fn record(vp: VantagePoint, date: NaiveDate) -> VantagePointRecord {
        let source = if vp == VantagePoint::Nvd {
            Source::Nvd
        } else {
            Source::CmBulletin
        };
        VantagePointRecord::new(source, vp, "CVE-2021-1000".parse().unwrap(), date)
    }

    #[test]
    fn builtin_classifications() {
        let t = KeyTermTable::builtin();
        assert_eq!(
            classify_component("Kinibi", M, t),
            Ok(Some(Component::Trust))
        );
        assert_eq!(classify_component("QSEE", Q, t), Ok(Some(Component::Trust)));
        assert_eq!(
            classify_component("Adreno GPU driver", Q, t),
            Ok(Some(Component::Gpu))
        );
        assert_eq!(classify_component("Flux capacitor", U, t), Ok(None));
        assert_eq!(
            classify_location("WLAN firmware buffer overflow", Q, t),
            Ok(Location::Firmware)
        );
        assert_eq!(
            classify_location("GPU kernel driver use-after-free", Q, t),
            Ok(Location::Driver)
        );
        assert_eq!(
            classify_location("memory corruption", Q, t),
            Ok(Location::Unknown)
        );
        assert_eq!(
            classify_location("Adreno GPU driver", Q, t),
            Ok(Location::Driver)
        );
    }

    #[test]
    fn longest_term_wins_and_ties_are_errors() {
        let t = KeyTermTable::new(
            vec![
                term(Q, "WLAN", Some(Component::WiFi), None),
                term(
                    Q,
                    "WLAN firmware",
                    Some(Component::WiFi),
                    Some(Location::Firmware),
                ),
                term(Q, "firmware", None, Some(Location::Driver)),
                term(Q, "Audio", Some(Component::Audio), None),
                term(Q, "Video", Some(Component::Vision), None),
            ],
            None,
        )
        .unwrap();
        assert_eq!(
            classify_location("wlan FIRMWARE crash", Q, &t),
            Ok(Location::Firmware)
        );
        assert_eq!(
            classify_location("modem firmware crash", Q, &t),
            Ok(Location::Driver)
        );
        let err = classify_component("Audio/Video", Q, &t).unwrap_err();
        assert_eq!(
            err,
            AugmentError::Ambiguous {
                manufacturer: Q,
                text: "Audio/Video".into(),
                terms: vec!["Audio".into(), "Video".into()],
            }
        );
        // Equally long terms agreeing on the value are not ambiguous.
        let t = t
            .with_entry(term(Q, "Wi-Fi", Some(Component::WiFi), None))
            .unwrap();
        assert_eq!(
            classify_component("Wi-Fi/WLAN", Q, &t),
            Ok(Some(Component::WiFi))
        );
        // Terms of other manufacturers are ignored.
        assert_eq!(classify_component("Audio", M, &t), Ok(None));
    }

    #[test]
    fn discovery_attribution() {
        let mut r = record(VantagePoint::QualcommBulletin, d(2021, 6, 1));
        r.internal_flag = Some(true);
        assert_eq!(classify_discovery(&r, Q), DiscoveryAttribution::Internal);
        r.internal_flag = Some(false);
        assert_eq!(classify_discovery(&r, Q), DiscoveryAttribution::External);
        let mut r = record(VantagePoint::MediatekBulletin, d(2021, 6, 1));
        r.credit = Some("Jane Doe".into());
        assert_eq!(classify_discovery(&r, M), DiscoveryAttribution::External);
        r.credit = Some("Found internally".into());
        assert_eq!(classify_discovery(&r, M), DiscoveryAttribution::Unknown);
        let r = record(VantagePoint::UnisocBulletin, d(2021, 6, 1));
        assert_eq!(classify_discovery(&r, U), DiscoveryAttribution::Unknown);
    }

    #[test]
    fn patch_date_is_earliest_cm_publication() {
        let cve: CveId = "CVE-2021-1000".parse().unwrap();
        let v = blank_vulnerability(
            cve.clone(),
            vec![
                record(VantagePoint::QualcommBulletin, d(2021, 7, 1)),
                record(VantagePoint::QualcommBulletin, d(2021, 6, 1)),
                record(VantagePoint::Nvd, d(2021, 5, 1)),
            ],
        );
        assert_eq!(resolve_patch_date(&v), Ok(d(2021, 6, 1)));
        let v = blank_vulnerability(
            cve.clone(),
            vec![record(VantagePoint::UnisocBulletin, d(2020, 3, 2))],
        );
        assert_eq!(resolve_patch_date(&v), Ok(d(2020, 3, 2)));
        let v = blank_vulnerability(cve.clone(), vec![record(VantagePoint::Nvd, d(2020, 3, 2))]);
        assert_eq!(resolve_patch_date(&v), Err(AugmentError::NoCmRecord(cve)));
    }

    #[test]
    fn augment_derives_and_is_idempotent() {
        let mut late = record(VantagePoint::QualcommBulletin, d(2021, 7, 1));
        late.component_raw = Some("Multimedia".into());
        late.description = "Memory corruption in WLAN HOST".into();
        late.internal_flag = Some(true);
        late.reported_date = Some(d(2021, 1, 5));
        let mut early = record(VantagePoint::QualcommBulletin, d(2021, 6, 1));
        early.component_raw = Some("QSEE".into());
        early.internal_flag = Some(false);
        early.reported_date = Some(d(2021, 2, 1));
        let mut nvd = record(VantagePoint::Nvd, d(2021, 6, 3));
        nvd.description = "kernel issue".into();
        let mut v = blank_vulnerability("CVE-2021-1000".parse().unwrap(), vec![late, nvd, early]);
        let problems = augment(&mut v, KeyTermTable::builtin());
        assert!(problems.is_empty());
        assert_eq!(v.component, Some(Component::Trust));
        assert_eq!(v.location, Location::Firmware);
        assert_eq!(v.attribution, DiscoveryAttribution::External);
        assert_eq!(v.report_date, Some(d(2021, 1, 5)));
        assert_eq!(v.patch_date, Some(d(2021, 6, 1)));
        let once = v.clone();
        augment(&mut v, KeyTermTable::builtin());
        assert_eq!(v, once);
        v.records.reverse();
        augment(&mut v, KeyTermTable::builtin());
        assert_eq!(
            (v.component, v.location, v.attribution),
            (once.component, once.location, once.attribution)
        );
    }

    #[test]
    fn location_falls_back_to_nvd_description() {
        let mut cm = record(VantagePoint::MediatekBulletin, d(2021, 6, 1));
        cm.description = "possible out of bounds write".into();
        let mut nvd = record(VantagePoint::Nvd, d(2021, 6, 3));
        nvd.description = "In the display driver, there is a possible out of bounds write".into();
        let mut v = blank_vulnerability("CVE-2021-1000".parse().unwrap(), vec![cm, nvd]);
        augment(&mut v, KeyTermTable::builtin());
        assert_eq!(v.location, Location::Driver);
        assert_eq!(v.component, None);
    }

    #[test]
    fn attribution_modes() {
        let mut v = blank_vulnerability(
            "CVE-2021-1000".parse().unwrap(),
            vec![record(VantagePoint::MediatekBulletin, d(2021, 6, 1))],
        );
        augment(&mut v, KeyTermTable::builtin());
        assert_eq!(
            AttributionMode::Strict.apply(&v),
            DiscoveryAttribution::Unknown
        );
        assert_eq!(
            AttributionMode::UpperBoundInternal.apply(&v),
            DiscoveryAttribution::Internal
        );
        v.records = vec![record(VantagePoint::QualcommBulletin, d(2021, 6, 1))];
        augment(&mut v, KeyTermTable::builtin());
        assert_eq!(
            AttributionMode::UpperBoundInternal.apply(&v),
            DiscoveryAttribution::Unknown
        );
        assert_eq!(
            "upper-bound-internal".parse(),
            Ok(AttributionMode::UpperBoundInternal)
        );
        assert!("paper".parse::<AttributionMode>().is_err());
    }
}

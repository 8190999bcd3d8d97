use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::chipset::{ChipsetKey, DeviceId};
use super::cve::CveId;
use super::vocab::{
    ChipsetManufacturer, Component, DiscoveryAttribution, Location, Source, VantagePoint,
};

/// Earliest publication date accepted from any vantage point.
pub const EARLIEST_PUBLICATION: NaiveDate = match NaiveDate::from_ymd_opt(2009, 9, 1) {
    Some(d) => d,
    None => panic!("invalid constant date"),
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CvssError {
    #[error("`{0}` is not a number")]
    NotANumber(String),
    #[error("score {0} outside [0.0, 10.0]")]
    OutOfRange(String),
}

/// A CVSS base score stored in tenths, so comparisons are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CvssScore(u8);

impl CvssScore {
    pub fn from_tenths(tenths: u8) -> Result<Self, CvssError> {
        if tenths > 100 {
            return Err(CvssError::OutOfRange(format!(
                "{}.{}",
                tenths / 10,
                tenths % 10
            )));
        }
        Ok(CvssScore(tenths))
    }

    pub fn from_f64(value: f64) -> Result<Self, CvssError> {
        if !value.is_finite() {
            return Err(CvssError::NotANumber(value.to_string()));
        }
        if !(0.0..=10.0).contains(&value) {
            return Err(CvssError::OutOfRange(value.to_string()));
        }
        Ok(CvssScore((value * 10.0).round() as u8))
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl FromStr for CvssScore {
    type Err = CvssError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let value: f64 = trimmed
            .parse()
            .map_err(|_| CvssError::NotANumber(trimmed.to_string()))?;
        if !value.is_finite() {
            return Err(CvssError::NotANumber(trimmed.to_string()));
        }
        CvssScore::from_f64(value)
    }
}

impl fmt::Display for CvssScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for CvssScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for CvssScore {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        CvssScore::from_f64(v).map_err(serde::de::Error::custom)
    }
}

/// One vantage point's raw view of one vulnerability.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VantagePointRecord {
    pub source: Source,
    pub vantage_point: VantagePoint,
    /// Manufacturer of the bulletin; set for CM bulletin records only.
    pub manufacturer: Option<ChipsetManufacturer>,
    pub cve: CveId,
    pub publication_date: NaiveDate,
    /// Date the issue was reported to the manufacturer, where published.
    pub reported_date: Option<NaiveDate>,
    pub severity: Option<CvssScore>,
    pub cvss_version: Option<String>,
    pub severity_label: Option<String>,
    pub description: String,
    pub affected_chipset_strings: Vec<String>,
    pub component_raw: Option<String>,
    pub credit: Option<String>,
    pub internal_flag: Option<bool>,
}

impl VantagePointRecord {
    /// Natural key inside the knowledge base.
    pub fn key(&self) -> RecordKey {
        RecordKey {
            cve: self.cve.clone(),
            vantage_point: self.vantage_point,
            publication_date: self.publication_date,
        }
    }

    /// A minimal record; parsers fill in the optional fields.
    pub fn new(
        source: Source,
        vantage_point: VantagePoint,
        cve: CveId,
        publication_date: NaiveDate,
    ) -> Self {
        VantagePointRecord {
            source,
            vantage_point,
            manufacturer: vantage_point.bulletin_manufacturer(),
            cve,
            publication_date,
            reported_date: None,
            severity: None,
            cvss_version: None,
            severity_label: None,
            description: String::new(),
            affected_chipset_strings: Vec::new(),
            component_raw: None,
            credit: None,
            internal_flag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub cve: CveId,
    pub vantage_point: VantagePoint,
    pub publication_date: NaiveDate,
}

/// The canonical, CVE-keyed vulnerability with fields derived from all
/// stored records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vulnerability {
    pub cve: CveId,
    pub records: Vec<VantagePointRecord>,
    pub component: Option<Component>,
    pub location: Location,
    pub attribution: DiscoveryAttribution,
    pub report_date: Option<NaiveDate>,
    /// Earliest CM bulletin publication; `None` when no CM record exists.
    pub patch_date: Option<NaiveDate>,
    pub affected_chipsets: BTreeSet<ChipsetKey>,
}

impl Vulnerability {
    pub fn cm_records(&self) -> impl Iterator<Item = &VantagePointRecord> {
        self.records
            .iter()
            .filter(|r| r.source == Source::CmBulletin)
    }

    pub fn nvd_records(&self) -> impl Iterator<Item = &VantagePointRecord> {
        self.records.iter().filter(|r| r.source == Source::Nvd)
    }

    /// Manufacturers whose bulletins list this vulnerability.
    pub fn manufacturers(&self) -> BTreeSet<ChipsetManufacturer> {
        self.cm_records().filter_map(|r| r.manufacturer).collect()
    }

    /// NIST-assigned severity (from the NVD record, if any).
    pub fn nist_severity(&self) -> Option<CvssScore> {
        self.nvd_records().find_map(|r| r.severity)
    }

    /// Manufacturer-assigned severity from the earliest CM record carrying one.
    pub fn cm_severity(&self) -> Option<CvssScore> {
        self.cm_records().find_map(|r| r.severity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntityError {
    #[error("update for {0} carries neither CVEs nor a security patch level")]
    NoEvidence(DeviceId),
    #[error("security patch level {0} is not the first day of a month")]
    SplNotFirstOfMonth(NaiveDate),
}

/// A per-device update and the evidence of what it mitigates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceUpdate {
    pub device: DeviceId,
    pub release_date: NaiveDate,
    pub spl_date: Option<NaiveDate>,
    pub explicit_cves: BTreeSet<CveId>,
}

impl DeviceUpdate {
    pub fn new(
        device: DeviceId,
        release_date: NaiveDate,
        spl_date: Option<NaiveDate>,
        explicit_cves: BTreeSet<CveId>,
    ) -> Result<Self, EntityError> {
        if spl_date.is_none() && explicit_cves.is_empty() {
            return Err(EntityError::NoEvidence(device));
        }
        Ok(DeviceUpdate {
            device,
            release_date,
            spl_date,
            explicit_cves,
        })
    }

    pub fn key(&self) -> (DeviceId, NaiveDate, Option<NaiveDate>) {
        (self.device.clone(), self.release_date, self.spl_date)
    }
}

/// A monthly Android security bulletin.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AospBulletin {
    pub spl_date: NaiveDate,
    pub cves: BTreeSet<CveId>,
}

impl AospBulletin {
    pub fn new(spl_date: NaiveDate, cves: BTreeSet<CveId>) -> Result<Self, EntityError> {
        if spl_date.day() != 1 {
            return Err(EntityError::SplNotFirstOfMonth(spl_date));
        }
        Ok(AospBulletin { spl_date, cves })
    }
}

/// One curated key term mapping manufacturer-specific wording to a
/// component and/or a location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentKeyTerm {
    pub manufacturer: ChipsetManufacturer,
    pub term: String,
    pub component: Option<Component>,
    pub location: Option<Location>,
}

//! Canonical domain types, identifier normalization and controlled
//! vocabularies.

mod chipset;
mod cve;
mod entities;
mod vocab;

pub use chipset::{
    normalize_chipset_name, ChipsetKey, ChipsetModel, DeviceId, ModelNumber, NormalizeError,
    NormalizedChipset, SmartphoneModel, MARKETING_PREFIXES,
};
pub use cve::{validate_cve, validate_cve_as_of, CveError, CveId, FIRST_CVE_YEAR};
pub use entities::{
    AospBulletin, ComponentKeyTerm, CvssError, CvssScore, DeviceUpdate, EntityError, RecordKey,
    VantagePointRecord, Vulnerability, EARLIEST_PUBLICATION,
};
pub use vocab::{
    ChipsetManufacturer, Component, DiscoveryAttribution, DocumentFormat, Location, Source,
    UnknownValue, VantagePoint,
};

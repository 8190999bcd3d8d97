//! Parsers turning recorded vantage-point documents into domain values.
//!
//! Every parser is a pure function of the document. Field-level problems
//! become [`ValidationIssue`]s; a reject-level issue withholds the affected
//! entry from the returned items.

mod aosp;
mod bulletin;
mod catalog;
mod changelog;
mod chipsets;
mod corpus;
mod golden;
mod html;
mod nvd;
pub(crate) mod validate;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AospBulletin, ChipsetModel, DeviceUpdate, DocumentFormat, SmartphoneModel, VantagePoint,
    VantagePointRecord,
};

pub use aosp::parse_aosp_bulletin;
pub use bulletin::parse_cm_bulletin;
pub use catalog::{check_release_order, extract_chipset, parse_device_catalog, OEM_ACTIVITY_SINCE};
pub use changelog::parse_oem_changelog;
pub use chipsets::{parse_chipset_release_dates, parse_release_date};
pub use corpus::{document_files, is_document, read_corpus, read_document, CorpusError};
pub use golden::{render_golden, GoldenLine};
pub use nvd::parse_nvd_record;
pub use validate::parse_calendar_date;

/// A recorded document from one vantage point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub vantage_point: VantagePoint,
    /// Retrieval date; plausibility checks treat it as "today".
    pub retrieved_at: NaiveDate,
    pub body: String,
    pub format: DocumentFormat,
}

impl SourceDocument {
    pub fn new(
        vantage_point: VantagePoint,
        retrieved_at: NaiveDate,
        body: impl Into<String>,
    ) -> Result<Self, ParseError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(ParseError::EmptyDocument);
        }
        Ok(SourceDocument {
            vantage_point,
            retrieved_at,
            body,
            format: vantage_point.format(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueSeverity {
    Reject,
    Warn,
}

/// A plausibility-check finding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationIssue {
    /// Zero-based index of the entry within the document; `None` for
    /// document-level findings.
    pub entry: Option<usize>,
    pub field: String,
    pub rule: String,
    pub raw_value: String,
    pub severity: IssueSeverity,
}

impl ValidationIssue {
    pub fn reject(entry: Option<usize>, field: &str, rule: &str, raw_value: &str) -> Self {
        ValidationIssue {
            entry,
            field: field.to_string(),
            rule: rule.to_string(),
            raw_value: raw_value.to_string(),
            severity: IssueSeverity::Reject,
        }
    }

    pub fn warn(entry: Option<usize>, field: &str, rule: &str, raw_value: &str) -> Self {
        ValidationIssue {
            severity: IssueSeverity::Warn,
            ..ValidationIssue::reject(entry, field, rule, raw_value)
        }
    }

    pub fn is_reject(&self) -> bool {
        self.severity == IssueSeverity::Reject
    }
}

/// An entry that parsed cleanly but is out of scope.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub entry: usize,
    pub subject: String,
    pub reason: String,
}

/// Output of a parser: accepted items plus everything that was reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub issues: Vec<ValidationIssue>,
    pub excluded: Vec<Exclusion>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            items: Vec::new(),
            issues: Vec::new(),
            excluded: Vec::new(),
        }
    }
}

impl<T> Parsed<T> {
    pub fn has_rejects(&self) -> bool {
        self.issues.iter().any(ValidationIssue::is_reject)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("document body is empty")]
    EmptyDocument,
    #[error("parser for {expected} cannot read a {got} document")]
    WrongVantagePoint { expected: String, got: VantagePoint },
    #[error("no entries found; first unmatched anchor: `{anchor}`")]
    NoEntries { anchor: String },
    #[error("required document field `{field}` not found")]
    MissingField { field: String },
    #[error("document field `{field}` fails rule {rule}: `{raw}`")]
    InvalidField {
        field: String,
        rule: String,
        raw: String,
    },
    #[error("no security patch level heading found")]
    MissingSpl,
    #[error("malformed document: {0}")]
    Malformed(String),
}

/// Any parser output, tagged by what it produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ingested {
    Records(Parsed<VantagePointRecord>),
    Chipsets(Parsed<ChipsetModel>),
    Smartphones(Parsed<SmartphoneModel>),
    Updates(Parsed<DeviceUpdate>),
    Bulletins(Parsed<AospBulletin>),
}

impl Ingested {
    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            Ingested::Records(p) => &p.issues,
            Ingested::Chipsets(p) => &p.issues,
            Ingested::Smartphones(p) => &p.issues,
            Ingested::Updates(p) => &p.issues,
            Ingested::Bulletins(p) => &p.issues,
        }
    }

    pub fn item_count(&self) -> usize {
        match self {
            Ingested::Records(p) => p.items.len(),
            Ingested::Chipsets(p) => p.items.len(),
            Ingested::Smartphones(p) => p.items.len(),
            Ingested::Updates(p) => p.items.len(),
            Ingested::Bulletins(p) => p.items.len(),
        }
    }
}

/// Route a document to the parser for its vantage point.
pub fn parse_document(doc: &SourceDocument) -> Result<Ingested, ParseError> {
    let vp = doc.vantage_point;
    if let Some(cm) = vp.bulletin_manufacturer() {
        return parse_cm_bulletin(doc, cm).map(Ingested::Records);
    }
    if let Some(oem) = vp.changelog_oem() {
        return parse_oem_changelog(doc, oem).map(Ingested::Updates);
    }
    match vp {
        VantagePoint::Nvd => parse_nvd_record(doc).map(Ingested::Records),
        VantagePoint::AospBulletin => parse_aosp_bulletin(doc).map(Ingested::Bulletins),
        VantagePoint::GsmArena => parse_device_catalog(doc).map(Ingested::Smartphones),
        VantagePoint::WikipediaChipsets => parse_chipset_release_dates(doc).map(Ingested::Chipsets),
        other => unreachable!("vantage point {other} has no parser"),
    }
}

fn expect_vantage_point(
    doc: &SourceDocument,
    accepted: &[VantagePoint],
    expected: &str,
) -> Result<(), ParseError> {
    if accepted.contains(&doc.vantage_point) {
        Ok(())
    } else {
        Err(ParseError::WrongVantagePoint {
            expected: expected.to_string(),
            got: doc.vantage_point,
        })
    }
}

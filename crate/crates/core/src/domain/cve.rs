use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Earliest CVE assignment year.
pub const FIRST_CVE_YEAR: u16 = 1999;

/// A validated `CVE-<YEAR>-<NUM>` identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CveId {
    year: u16,
    sequence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CveError {
    #[error("`{0}` does not match CVE-<YEAR>-<NUM>")]
    Malformed(String),
    #[error("CVE year {year} is before {FIRST_CVE_YEAR}")]
    YearTooEarly { year: u16 },
    #[error("CVE year {year} is in the future (current year {current})")]
    YearInFuture { year: u16, current: i32 },
}

impl CveError {
    /// Name of the plausibility rule that rejected the input.
    pub fn rule(&self) -> &'static str {
        match self {
            CveError::Malformed(_) => "cve-pattern",
            CveError::YearTooEarly { .. } => "cve-year-range",
            CveError::YearInFuture { .. } => "cve-year-future",
        }
    }
}

impl CveId {
    pub fn year(&self) -> u16 {
        self.year
    }

    pub fn sequence(&self) -> &str {
        &self.sequence
    }

    /// Structural parse without the "year in the past" rule; used when
    /// reading back values that were validated at ingestion time.
    fn parse_structural(text: &str) -> Result<Self, CveError> {
        let folded = text.to_ascii_uppercase();
        let malformed = || CveError::Malformed(text.to_string());
        let rest = folded.strip_prefix("CVE-").ok_or_else(malformed)?;
        let (year, sequence) = rest.split_once('-').ok_or_else(malformed)?;
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if year.len() != 4 || !all_digits(year) || sequence.len() < 4 || !all_digits(sequence) {
            return Err(malformed());
        }
        let year: u16 = year.parse().map_err(|_| malformed())?;
        if year < FIRST_CVE_YEAR {
            return Err(CveError::YearTooEarly { year });
        }
        Ok(CveId {
            year,
            sequence: sequence.to_string(),
        })
    }
}

/// Validate a CVE identifier against the current calendar year.
pub fn validate_cve(text: &str) -> Result<CveId, CveError> {
    validate_cve_as_of(text, Utc::now().year())
}

/// Validate a CVE identifier; the year must not exceed `current_year`.
///
/// Input is case-folded; no other normalization (trimming, etc.) happens.
pub fn validate_cve_as_of(text: &str, current_year: i32) -> Result<CveId, CveError> {
    let id = CveId::parse_structural(text)?;
    if i32::from(id.year) > current_year {
        return Err(CveError::YearInFuture {
            year: id.year,
            current: current_year,
        });
    }
    Ok(id)
}

impl fmt::Display for CveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CVE-{}-{}", self.year, self.sequence)
    }
}

impl FromStr for CveId {
    type Err = CveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        validate_cve(s)
    }
}

// Numeric order on the sequence: CVE-2021-9999 < CVE-2021-10000.
impl Ord for CveId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.year
            .cmp(&other.year)
            .then_with(|| {
                let a = self.sequence.trim_start_matches('0');
                let b = other.sequence.trim_start_matches('0');
                a.len().cmp(&b.len()).then_with(|| a.cmp(b))
            })
            .then_with(|| self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for CveId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for CveId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CveId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CveId::parse_structural(&s).map_err(serde::de::Error::custom)
    }
}

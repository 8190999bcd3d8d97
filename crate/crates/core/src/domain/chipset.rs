use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vocab::ChipsetManufacturer;

/// Marketing-line words that precede model designations and are never part
/// of the model number itself.
pub const MARKETING_PREFIXES: &[&str] = &["SNAPDRAGON", "EXYNOS", "HELIO", "DIMENSITY", "TIGER"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("chipset name `{0}` is empty after normalization")]
    Empty(String),
}

/// Result of normalizing a raw chipset string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedChipset {
    pub model_number: ModelNumber,
    /// The original text when a marketing prefix was stripped.
    pub marketing_name: Option<String>,
}

/// Normalize a raw chipset designation into its model-number join key.
///
/// Uppercases, strips leading marketing-line words, then removes all
/// whitespace and hyphens: `"sm-8475 "` becomes `"SM8475"`.
pub fn normalize_chipset_name(raw: &str) -> Result<NormalizedChipset, NormalizeError> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let upper = collapsed.to_uppercase();
    let mut tokens: Vec<&str> = upper.split(' ').filter(|t| !t.is_empty()).collect();
    let mut stripped = false;
    while tokens.len() > 1 && MARKETING_PREFIXES.contains(&tokens[0]) {
        tokens.remove(0);
        stripped = true;
    }
    let model: String = tokens
        .concat()
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-')
        .collect();
    if model.is_empty() {
        return Err(NormalizeError::Empty(raw.to_string()));
    }
    Ok(NormalizedChipset {
        model_number: ModelNumber(model),
        marketing_name: stripped.then_some(collapsed),
    })
}

/// A normalized chipset model number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelNumber(String);

impl ModelNumber {
    pub fn parse(raw: &str) -> Result<Self, NormalizeError> {
        normalize_chipset_name(raw).map(|n| n.model_number)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModelNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identity of a chipset model: `(manufacturer, model number)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChipsetKey {
    pub manufacturer: ChipsetManufacturer,
    pub model_number: ModelNumber,
}

impl fmt::Display for ChipsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.manufacturer, self.model_number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChipsetModel {
    pub manufacturer: ChipsetManufacturer,
    pub model_number: ModelNumber,
    /// Release date; chipsets without one are excluded from introduction
    /// metrics.
    pub release_date: Option<NaiveDate>,
    pub marketing_name: Option<String>,
}

impl ChipsetModel {
    pub fn key(&self) -> ChipsetKey {
        ChipsetKey {
            manufacturer: self.manufacturer,
            model_number: self.model_number.clone(),
        }
    }
}

/// Stable slug identifying a smartphone model, e.g. `samsung-galaxy-a41`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(String);

impl DeviceId {
    /// Derive the identifier from OEM and device name. A device name that
    /// already starts with the OEM is not prefixed twice.
    pub fn new(oem: &str, device_name: &str) -> Self {
        let oem_slug = slug(oem);
        let name_slug = slug(device_name);
        let id = if name_slug == oem_slug || name_slug.starts_with(&format!("{oem_slug}-")) {
            name_slug
        } else if name_slug.is_empty() {
            oem_slug
        } else {
            format!("{oem_slug}-{name_slug}")
        };
        DeviceId(id)
    }

    /// Wrap an already-slugged identifier (e.g. from a URL path).
    pub fn from_slug(slug: &str) -> Self {
        DeviceId(slug.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn slug(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

/// A smartphone model and the chipset designation it was catalogued with.
///
/// `chipset_raw` is resolved to a [`ChipsetKey`] during linking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SmartphoneModel {
    pub id: DeviceId,
    pub oem: String,
    pub device_name: String,
    pub chipset_raw: String,
    pub chipset_vendor: Option<ChipsetManufacturer>,
    pub release_date: NaiveDate,
}

impl SmartphoneModel {
    pub fn new(
        oem: &str,
        device_name: &str,
        chipset_raw: &str,
        chipset_vendor: Option<ChipsetManufacturer>,
        release_date: NaiveDate,
    ) -> Self {
        SmartphoneModel {
            id: DeviceId::new(oem, device_name),
            oem: oem.to_string(),
            device_name: device_name.to_string(),
            chipset_raw: chipset_raw.to_string(),
            chipset_vendor,
            release_date,
        }
    }
}

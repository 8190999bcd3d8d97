//! Controlled vocabularies shared across the crate.
//!
//! Every vocabulary is a closed set; parsing an unknown value fails.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {vocabulary} `{value}`")]
pub struct UnknownValue {
    pub vocabulary: &'static str,
    pub value: String,
}

fn fold(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        $name:ident, $label:literal {
            $($variant:ident => $display:literal $(| $alias:literal)*),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $display)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $display,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownValue;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let folded = fold(s);
                $(
                    if folded == fold($display) $(|| folded == fold($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(UnknownValue { vocabulary: $label, value: s.to_string() })
            }
        }
    };
}

vocabulary! {
    /// The four chipset manufacturers in scope.
    ChipsetManufacturer, "chipset manufacturer" {
        Qualcomm => "Qualcomm",
        Mediatek => "Mediatek",
        Samsung => "Samsung" | "Samsung Semiconductor" | "Samsung LSI",
        Unisoc => "Unisoc" | "Spreadtrum",
    }
}

vocabulary! {
    /// Normalized chipset component names.
    Component, "component" {
        Bluetooth => "Bluetooth",
        WiFi => "WiFi" | "WLAN",
        Cellular => "Cellular",
        Gpu => "GPU",
        Vision => "Vision",
        Nfc => "NFC",
        Boot => "Boot",
        Position => "Position",
        Audio => "Audio",
        Virtualization => "Virtualization",
        MachineLearning => "MachineLearning",
        Trust => "Trust",
        Power => "Power",
        Ipc => "IPC",
        MemoryManagement => "MemoryManagement" | "Memory",
        Debug => "Debug",
    }
}

impl Component {
    /// Row order of the per-component discovery table (most affected first).
    pub const TABLE_ORDER: [Component; 16] = [
        Component::Cellular,
        Component::WiFi,
        Component::Gpu,
        Component::Trust,
        Component::Audio,
        Component::Vision,
        Component::Bluetooth,
        Component::Debug,
        Component::Boot,
        Component::Ipc,
        Component::MachineLearning,
        Component::Position,
        Component::MemoryManagement,
        Component::Power,
        Component::Virtualization,
        Component::Nfc,
    ];
}

vocabulary! {
    /// Where the vulnerable code executes.
    Location, "location" {
        Firmware => "Firmware",
        Driver => "Driver",
        Unknown => "Unknown",
    }
}

vocabulary! {
    /// Who discovered a vulnerability.
    DiscoveryAttribution, "discovery attribution" {
        Internal => "Internal",
        External => "External",
        Unknown => "Unknown",
    }
}

vocabulary! {
    /// Publication channel a record was obtained from.
    Source, "source" {
        CmBulletin => "CmBulletin",
        Nvd => "Nvd",
        AospBulletin => "AospBulletin",
        OemChangelog => "OemChangelog",
    }
}

vocabulary! {
    /// Concrete document families that can be ingested.
    VantagePoint, "vantage point" {
        QualcommBulletin => "qualcomm-bulletin",
        MediatekBulletin => "mediatek-bulletin",
        SamsungMobileBulletin => "samsung-mobile-bulletin",
        SamsungSemiconductorBulletin => "samsung-semiconductor-bulletin",
        UnisocBulletin => "unisoc-bulletin",
        SamsungUpdates => "samsung-updates",
        XiaomiUpdates => "xiaomi-updates",
        TecnoUpdates => "tecno-updates",
        TecnoChangesets => "tecno-changesets",
        AospBulletin => "aosp-bulletin",
        Nvd => "nvd",
        GsmArena => "gsmarena",
        WikipediaChipsets => "wikipedia-chipsets",
    }
}

/// Serialization format of a vantage point's documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentFormat {
    Html,
    Json,
}

impl VantagePoint {
    pub fn format(self) -> DocumentFormat {
        match self {
            VantagePoint::TecnoUpdates | VantagePoint::TecnoChangesets | VantagePoint::Nvd => {
                DocumentFormat::Json
            }
            _ => DocumentFormat::Html,
        }
    }

    /// The manufacturer whose bulletin this is, for CM bulletin families.
    pub fn bulletin_manufacturer(self) -> Option<ChipsetManufacturer> {
        match self {
            VantagePoint::QualcommBulletin => Some(ChipsetManufacturer::Qualcomm),
            VantagePoint::MediatekBulletin => Some(ChipsetManufacturer::Mediatek),
            VantagePoint::SamsungMobileBulletin | VantagePoint::SamsungSemiconductorBulletin => {
                Some(ChipsetManufacturer::Samsung)
            }
            VantagePoint::UnisocBulletin => Some(ChipsetManufacturer::Unisoc),
            _ => None,
        }
    }

    /// The OEM publishing this changelog family.
    pub fn changelog_oem(self) -> Option<&'static str> {
        match self {
            VantagePoint::SamsungUpdates => Some("Samsung"),
            VantagePoint::XiaomiUpdates => Some("Xiaomi"),
            VantagePoint::TecnoUpdates | VantagePoint::TecnoChangesets => Some("Tecno"),
            _ => None,
        }
    }
}

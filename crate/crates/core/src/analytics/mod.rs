//! Lifecycle metrics over a knowledge-base snapshot.
//!
//! - introduction: newly introduced and inherited vulnerabilities per chipset
//! - discovery: publications per year and internal discovery shares
//! - severity, patch latency, availability and score consistency
//! - unmitigated vulnerabilities, update timelines and affected-device counts
//!
//! Every report is a plain serializable value; [`crate::machine`] renders
//! the stable machine format and [`text`] the human-readable tables.

mod discovery;
mod introduction;
mod patching;
pub mod text;
mod updates;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AttributionMode;
use crate::domain::{ChipsetKey, CveId};
use crate::kb::KnowledgeBase;

pub use discovery::{
    discovery_report, ComponentRow, DiscoveryReport, ManufacturerCount, ManufacturerShare, YearRow,
};
pub use introduction::{
    introduction_report, newly_introduced, persists_into, ChipsetIntroduction,
    IntroductionAggregate, IntroductionReport, NextRelease,
};
pub use patching::{
    availability_matrix, patch_latency_report, severity_by_location, severity_consistency,
    AvailabilityMatrix, AvailabilityRow, LatencyEntry, LatencyReport, LatencySummary,
    LocationSeverity, SeverityByLocation, SeverityConsistency,
};
pub use updates::{
    affected_count_distribution, impact_report, unmitigated_vulnerabilities, update_latencies,
    update_timeline_report, AffectedDistribution, AffectedRow, ImpactReport, PairLatency,
    TimelineEntry, UnmitigatedReport, UpdateTimelineReport,
};

/// Default cutoff for the unmitigated-vulnerability criteria.
pub const DEFAULT_CUTOFF: NaiveDate = match NaiveDate::from_ymd_opt(2023, 1, 1) {
    Some(d) => d,
    None => panic!("invalid constant date"),
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("{cve} does not affect {chipset}")]
    NotAffected { cve: CveId, chipset: ChipsetKey },
    #[error("{0} has no release date")]
    MissingReleaseDate(ChipsetKey),
    #[error("{0} has no patch date")]
    NoPatchDate(CveId),
    #[error("unknown vulnerability {0}")]
    UnknownVulnerability(CveId),
    #[error("unknown chipset {0}")]
    UnknownChipset(ChipsetKey),
}

/// Tunable parameters of the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyticsConfig {
    /// Vulnerabilities published on or after this date are not considered
    /// unmitigated.
    pub cutoff: NaiveDate,
    /// Days after manufacturer publication within which NVD or AOSP
    /// presence counts as available.
    pub window_days: i64,
    /// Patch-latency compliance threshold in days.
    pub threshold_days: i64,
    pub attribution_mode: AttributionMode,
    /// Inclusive publication-date range for the availability matrix;
    /// unbounded when absent.
    pub availability_from: Option<NaiveDate>,
    pub availability_to: Option<NaiveDate>,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            cutoff: DEFAULT_CUTOFF,
            window_days: 365,
            threshold_days: 90,
            attribution_mode: AttributionMode::Strict,
            availability_from: None,
            availability_to: None,
        }
    }
}

/// A value measured on the full live dataset, shown next to the computed
/// value for comparison. Never asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

pub(crate) fn reference(metric: &str, value: f64, unit: &str) -> ReferenceValue {
    ReferenceValue {
        metric: metric.to_string(),
        value,
        unit: unit.to_string(),
    }
}

/// A vulnerability left out of a metric, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Excluded {
    pub cve: CveId,
    pub reason: String,
}

/// Share `part / whole`, absent for an empty whole.
pub(crate) fn share(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| part as f64 / whole as f64)
}

pub(crate) fn days(later: NaiveDate, earlier: NaiveDate) -> i64 {
    (later - earlier).num_days()
}

/// Counts of records the metrics could not use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataQuality {
    pub vulnerabilities: usize,
    pub without_patch_date: usize,
    pub unresolved_chipset_strings: usize,
    pub link_conflicts: usize,
    pub smartphones: usize,
    pub unlinked_smartphones: usize,
    pub orphan_updates: usize,
    pub chipsets_without_release_date: usize,
}

pub fn data_quality(kb: &KnowledgeBase) -> DataQuality {
    DataQuality {
        vulnerabilities: kb.vulnerabilities().count(),
        without_patch_date: kb
            .vulnerabilities()
            .filter(|v| v.patch_date.is_none())
            .count(),
        unresolved_chipset_strings: kb.unresolved().count(),
        link_conflicts: kb.link_conflicts().len(),
        smartphones: kb.smartphones().count(),
        unlinked_smartphones: kb.smartphones().count() - kb.linked_smartphones().count(),
        orphan_updates: kb.orphan_updates().count(),
        chipsets_without_release_date: kb.chipsets().filter(|c| c.release_date.is_none()).count(),
    }
}

/// Report groups selectable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportSection {
    Rq1,
    Rq2,
    Rq3,
    Rq4,
    All,
}

impl std::str::FromStr for ReportSection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rq1" => Ok(ReportSection::Rq1),
            "rq2" => Ok(ReportSection::Rq2),
            "rq3" => Ok(ReportSection::Rq3),
            "rq4" => Ok(ReportSection::Rq4),
            "all" => Ok(ReportSection::All),
            _ => Err(format!(
                "unknown report `{s}` (expected rq1, rq2, rq3, rq4 or all)"
            )),
        }
    }
}

/// Vulnerability introduction per chipset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Report {
    #[serde(flatten)]
    pub introduction: IntroductionReport,
}

/// Discovery by manufacturers and third parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Report {
    pub discovery: DiscoveryReport,
}

/// Severity, patching speed and information availability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq3Report {
    pub severity: SeverityByLocation,
    pub patch_latency: LatencyReport,
    pub availability: AvailabilityMatrix,
    pub consistency: SeverityConsistency,
}

/// Propagation to smartphones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq4Report {
    pub unmitigated: UnmitigatedReport,
    pub update_timeline: UpdateTimelineReport,
    pub affected_distribution: AffectedDistribution,
}

/// The complete report. Sections not requested are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub config: AnalyticsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq1: Option<Rq1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq2: Option<Rq2Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq3: Option<Rq3Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rq4: Option<Rq4Report>,
    pub data_quality: DataQuality,
}

pub fn rq1(kb: &KnowledgeBase) -> Rq1Report {
    Rq1Report {
        introduction: introduction_report(kb),
    }
}

pub fn rq2(kb: &KnowledgeBase, config: &AnalyticsConfig) -> Rq2Report {
    Rq2Report {
        discovery: discovery_report(kb, config.attribution_mode),
    }
}

pub fn rq3(kb: &KnowledgeBase, config: &AnalyticsConfig) -> Rq3Report {
    Rq3Report {
        severity: severity_by_location(kb),
        patch_latency: patch_latency_report(kb, config.threshold_days),
        availability: availability_matrix(kb, config),
        consistency: severity_consistency(kb),
    }
}

pub fn rq4(kb: &KnowledgeBase, config: &AnalyticsConfig) -> Rq4Report {
    Rq4Report {
        unmitigated: unmitigated_vulnerabilities(kb, config.cutoff),
        update_timeline: update_timeline_report(kb),
        affected_distribution: affected_count_distribution(kb),
    }
}

pub fn full_report(
    kb: &KnowledgeBase,
    config: &AnalyticsConfig,
    section: ReportSection,
) -> FullReport {
    let wants = |s: ReportSection| section == ReportSection::All || section == s;
    FullReport {
        config: *config,
        rq1: wants(ReportSection::Rq1).then(|| rq1(kb)),
        rq2: wants(ReportSection::Rq2).then(|| rq2(kb, config)),
        rq3: wants(ReportSection::Rq3).then(|| rq3(kb, config)),
        rq4: wants(ReportSection::Rq4).then(|| rq4(kb, config)),
        data_quality: data_quality(kb),
    }
}

//! Layered configuration: flags, then `CHIPKB_*` environment variables
//! (both resolved by clap), then the TOML file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use serde::Deserialize;

use chipkb_core::analytics::AnalyticsConfig;
use chipkb_core::augment::{AttributionMode, KeyTermTable};

use crate::CliError;

pub const DEFAULT_STORE: &str = "chipkb.sqlite";
pub const DEFAULT_DATA_DIR: &str = "data";

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "CHIPKB_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// SQLite knowledge-base store.
    #[arg(long, global = true, env = "CHIPKB_STORE", value_name = "PATH")]
    pub store: Option<PathBuf>,
    /// Corpus root ingested when `ingest` is given no paths.
    #[arg(long, global = true, env = "CHIPKB_DATA_DIR", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Component key-term table replacing the built-in one.
    #[arg(long, global = true, env = "CHIPKB_KEY_TERMS", value_name = "PATH")]
    pub key_terms: Option<PathBuf>,
    /// Vulnerabilities patched on or after this date are never unmitigated.
    #[arg(long, global = true, env = "CHIPKB_CUTOFF", value_name = "YYYY-MM-DD")]
    pub cutoff: Option<NaiveDate>,
    /// Availability window in days after manufacturer publication.
    #[arg(long, global = true, env = "CHIPKB_WINDOW_DAYS", value_name = "DAYS")]
    pub window_days: Option<i64>,
    /// Patch-latency compliance threshold in days.
    #[arg(
        long,
        global = true,
        env = "CHIPKB_THRESHOLD_DAYS",
        value_name = "DAYS"
    )]
    pub threshold_days: Option<i64>,
    /// `strict` or `upper-bound-internal`.
    #[arg(
        long,
        global = true,
        env = "CHIPKB_ATTRIBUTION_MODE",
        value_name = "MODE"
    )]
    pub attribution_mode: Option<AttributionMode>,
}

/// Contents of the TOML configuration file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub key_term_table: Option<PathBuf>,
    pub store_path: Option<PathBuf>,
    #[serde(default, deserialize_with = "toml_date")]
    pub cutoff_date: Option<NaiveDate>,
    pub window_days: Option<i64>,
    pub threshold_days: Option<i64>,
    pub attribution_mode: Option<AttributionMode>,
}

/// Accepts a TOML local date (`2023-01-01`) or a string holding one.
fn toml_date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
    let text = match Option::<toml::Value>::deserialize(d)? {
        None => return Ok(None),
        Some(toml::Value::String(s)) => s,
        Some(toml::Value::Datetime(dt)) => dt.to_string(),
        Some(other) => {
            return Err(serde::de::Error::custom(format!(
                "expected a date, found {}",
                other.type_str()
            )))
        }
    };
    text.parse().map(Some).map_err(serde::de::Error::custom)
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Effective configuration of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub key_term_table: Option<PathBuf>,
    pub store_path: PathBuf,
    pub analytics: AnalyticsConfig,
}

impl CliConfig {
    pub fn resolve(args: &GlobalArgs, file: FileConfig) -> Result<Self, CliError> {
        let defaults = AnalyticsConfig::default();
        let analytics = AnalyticsConfig {
            cutoff: args.cutoff.or(file.cutoff_date).unwrap_or(defaults.cutoff),
            window_days: args
                .window_days
                .or(file.window_days)
                .unwrap_or(defaults.window_days),
            threshold_days: args
                .threshold_days
                .or(file.threshold_days)
                .unwrap_or(defaults.threshold_days),
            attribution_mode: args
                .attribution_mode
                .or(file.attribution_mode)
                .unwrap_or(defaults.attribution_mode),
            ..defaults
        };
        if analytics.window_days < 0 || analytics.threshold_days < 0 {
            return Err(CliError::Usage("day counts must not be negative".into()));
        }
        Ok(CliConfig {
            data_dir: args
                .data_dir
                .clone()
                .or(file.data_dir)
                .unwrap_or_else(|| DEFAULT_DATA_DIR.into()),
            key_term_table: args.key_terms.clone().or(file.key_term_table),
            store_path: args
                .store
                .clone()
                .or(file.store_path)
                .unwrap_or_else(|| DEFAULT_STORE.into()),
            analytics,
        })
    }

    pub fn from_args(args: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(args, file)
    }

    pub fn key_terms(&self) -> Result<KeyTermTable, CliError> {
        match &self.key_term_table {
            None => Ok(KeyTermTable::builtin().clone()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                KeyTermTable::parse(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
            }
        }
    }
}

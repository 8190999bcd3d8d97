//! Line-delimited JSON export and import, one file per table.
//!
//! Each line is one row with keys in sorted order and rows in natural-key
//! order, so two exports of equal bases are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::{DeviceLink, KbError, KnowledgeBase, Unresolved, VulnerabilityLink};
use crate::domain::{AospBulletin, ChipsetModel, DeviceUpdate, SmartphoneModel, Vulnerability};

/// Table names; each is written as `<name>.jsonl`.
pub const TABLES: [&str; 8] = [
    "chipsets",
    "smartphones",
    "vulnerabilities",
    "device_updates",
    "aosp_bulletins",
    "vulnerability_chipsets",
    "smartphone_chipsets",
    "unresolved",
];

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{table}.jsonl line {line}: {source}")]
    Parse {
        table: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("missing table {0}")]
    MissingTable(String),
    #[error(transparent)]
    Integrity(#[from] KbError),
}

fn lines<'a, T: Serialize + 'a>(rows: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        let value = serde_json::to_value(&row).expect("domain values serialize");
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}

fn rows<T: DeserializeOwned>(
    tables: &BTreeMap<String, String>,
    table: &str,
) -> Result<Vec<T>, JsonlError> {
    let text = tables
        .get(table)
        .ok_or_else(|| JsonlError::MissingTable(table.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| JsonlError::Parse {
                table: table.to_string(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

impl KnowledgeBase {
    /// Render every table.
    pub fn export_tables(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("chipsets".to_string(), lines(self.chipsets.values()));
        out.insert("smartphones".to_string(), lines(self.smartphones.values()));
        out.insert(
            "vulnerabilities".to_string(),
            lines(self.vulnerabilities.values()),
        );
        out.insert("device_updates".to_string(), lines(self.updates.values()));
        out.insert("aosp_bulletins".to_string(), lines(self.bulletins.values()));
        out.insert(
            "vulnerability_chipsets".to_string(),
            lines(self.vulnerability_links()),
        );
        out.insert(
            "smartphone_chipsets".to_string(),
            lines(self.device_links()),
        );
        out.insert("unresolved".to_string(), lines(self.unresolved.iter()));
        out
    }

    /// Rebuild a base from rendered tables, checking referential integrity.
    pub fn import_tables(tables: &BTreeMap<String, String>) -> Result<Self, JsonlError> {
        let mut kb = KnowledgeBase::new();
        for c in rows::<ChipsetModel>(tables, "chipsets")? {
            kb.chipsets.insert(c.key(), c);
        }
        for s in rows::<SmartphoneModel>(tables, "smartphones")? {
            kb.smartphones.insert(s.id.clone(), s);
        }
        for v in rows::<Vulnerability>(tables, "vulnerabilities")? {
            kb.vulnerabilities.insert(v.cve.clone(), v);
        }
        for u in rows::<DeviceUpdate>(tables, "device_updates")? {
            kb.updates.insert(u.key(), u);
        }
        for b in rows::<AospBulletin>(tables, "aosp_bulletins")? {
            kb.bulletins.insert(b.spl_date, b);
        }
        for l in rows::<VulnerabilityLink>(tables, "vulnerability_chipsets")? {
            kb.vuln_links
                .entry(l.cve)
                .or_default()
                .insert(l.chipset, l.sources);
        }
        for l in rows::<DeviceLink>(tables, "smartphone_chipsets")? {
            kb.device_links.insert(l.device, l.chipset);
        }
        kb.unresolved = rows::<Unresolved>(tables, "unresolved")?
            .into_iter()
            .collect();
        kb.reindex();
        kb.check_integrity()?;
        Ok(kb)
    }

    /// Write `<dir>/<table>.jsonl` for every table.
    pub fn export_dir(&self, dir: &Path) -> Result<(), JsonlError> {
        fs::create_dir_all(dir).map_err(|source| JsonlError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, text) in self.export_tables() {
            let path = dir.join(format!("{name}.jsonl"));
            fs::write(&path, text).map_err(|source| JsonlError::Io { path, source })?;
        }
        Ok(())
    }

    /// Read a directory written by [`KnowledgeBase::export_dir`].
    pub fn import_dir(dir: &Path) -> Result<Self, JsonlError> {
        let mut tables = BTreeMap::new();
        for name in TABLES {
            let path = dir.join(format!("{name}.jsonl"));
            let text =
                fs::read_to_string(&path).map_err(|source| JsonlError::Io { path, source })?;
            tables.insert(name.to_string(), text);
        }
        KnowledgeBase::import_tables(&tables)
    }
}

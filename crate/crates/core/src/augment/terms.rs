//! The curated key-term table.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use thiserror::Error;

use crate::domain::{ChipsetManufacturer, Component, ComponentKeyTerm, Location, UnknownValue};

const BUILTIN: &str = include_str!("../../data/key_terms.psv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyTermError {
    #[error("line {line}: expected `manufacturer | term | component | location`")]
    Syntax { line: usize },
    #[error("line {line}: {source}")]
    Vocabulary { line: usize, source: UnknownValue },
    #[error("line {line}: empty term")]
    EmptyTerm { line: usize },
    #[error("line {line}: `{term}` maps to neither a component nor a location")]
    NoTarget { line: usize, term: String },
    #[error("duplicate term `{term}` for {manufacturer}")]
    Duplicate {
        manufacturer: ChipsetManufacturer,
        term: String,
    },
    #[error("no key term maps to {}", .0.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    Uncovered(Vec<Component>),
}

/// Key terms with their case-folded form, grouped per manufacturer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTermTable {
    version: Option<String>,
    entries: Vec<ComponentKeyTerm>,
    folded: Vec<String>,
}

impl KeyTermTable {
    /// Build a table, rejecting case-folded duplicates per manufacturer.
    /// Component coverage is not required here; see [`KeyTermTable::parse`].
    pub fn new(
        entries: Vec<ComponentKeyTerm>,
        version: Option<String>,
    ) -> Result<Self, KeyTermError> {
        let mut seen = BTreeSet::new();
        let mut folded = Vec::with_capacity(entries.len());
        for e in &entries {
            let f = e.term.to_lowercase();
            if !seen.insert((e.manufacturer, f.clone())) {
                return Err(KeyTermError::Duplicate {
                    manufacturer: e.manufacturer,
                    term: e.term.clone(),
                });
            }
            folded.push(f);
        }
        Ok(KeyTermTable {
            version,
            entries,
            folded,
        })
    }

    /// Parse the line format `manufacturer | term | component | location`,
    /// where `-` stands for "none", the location column may be omitted and
    /// `#` starts a comment. A `# version: X` comment sets the version. The
    /// result must map at least one term to every component.
    pub fn parse(text: &str) -> Result<Self, KeyTermError> {
        let mut version = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version.get_or_insert_with(|| v.trim().to_string());
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(KeyTermError::Syntax { line });
            }
            let vocab = |source| KeyTermError::Vocabulary { line, source };
            let manufacturer: ChipsetManufacturer = fields[0].parse().map_err(vocab)?;
            let term = fields[1].to_string();
            if term.is_empty() {
                return Err(KeyTermError::EmptyTerm { line });
            }
            let component = match fields[2] {
                "-" | "" => None,
                c => Some(c.parse::<Component>().map_err(vocab)?),
            };
            let location = match fields.get(3).copied() {
                None | Some("-") | Some("") => None,
                Some(l) => match l.parse::<Location>().map_err(vocab)? {
                    Location::Unknown => None,
                    known => Some(known),
                },
            };
            if component.is_none() && location.is_none() {
                return Err(KeyTermError::NoTarget { line, term });
            }
            entries.push(ComponentKeyTerm {
                manufacturer,
                term,
                component,
                location,
            });
        }
        let table = KeyTermTable::new(entries, version)?;
        let gaps = table.coverage_gaps();
        if !gaps.is_empty() {
            return Err(KeyTermError::Uncovered(gaps));
        }
        Ok(table)
    }

    /// The table shipped with the crate.
    pub fn builtin() -> &'static KeyTermTable {
        static TABLE: OnceLock<KeyTermTable> = OnceLock::new();
        TABLE.get_or_init(|| KeyTermTable::parse(BUILTIN).expect("shipped key-term table is valid"))
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn entries(&self) -> &[ComponentKeyTerm] {
        &self.entries
    }

    /// Components no entry maps to.
    pub fn coverage_gaps(&self) -> Vec<Component> {
        let covered: BTreeSet<Component> =
            self.entries.iter().filter_map(|e| e.component).collect();
        Component::ALL
            .iter()
            .copied()
            .filter(|c| !covered.contains(c))
            .collect()
    }

    /// A copy with one more entry.
    pub fn with_entry(&self, entry: ComponentKeyTerm) -> Result<Self, KeyTermError> {
        let mut entries = self.entries.clone();
        entries.push(entry);
        KeyTermTable::new(entries, self.version.clone())
    }

    /// Entries of one manufacturer with their folded terms.
    pub(crate) fn terms_for(
        &self,
        cm: ChipsetManufacturer,
    ) -> impl Iterator<Item = (&ComponentKeyTerm, &str)> {
        self.entries
            .iter()
            .zip(&self.folded)
            .filter(move |(e, _)| e.manufacturer == cm)
            .map(|(e, f)| (e, f.as_str()))
    }
}

//! Reading recorded documents from disk.
//!
//! A corpus directory holds one subdirectory per vantage point, named by its
//! kind (`qualcomm-bulletin`, `nvd`, ...). Every `.html` or `.json` file in
//! it is one document; other files are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use super::{ParseError, SourceDocument};
use crate::domain::VantagePoint;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: directory name is not a vantage point")]
    UnknownVantagePoint { path: PathBuf },
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Whether `path` names a document file.
pub fn is_document(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("html" | "htm" | "json")
    )
}

/// Read one document file.
pub fn read_document(
    vantage_point: VantagePoint,
    path: &Path,
    retrieved_at: NaiveDate,
) -> Result<SourceDocument, CorpusError> {
    let body = fs::read_to_string(path).map_err(io(path))?;
    SourceDocument::new(vantage_point, retrieved_at, body).map_err(|source| CorpusError::Document {
        path: path.to_path_buf(),
        source,
    })
}

/// Document files of one directory in file-name order.
pub fn document_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.is_file() && is_document(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Every document under `root`, ordered by vantage point directory and
/// file name.
pub fn read_corpus(
    root: &Path,
    retrieved_at: NaiveDate,
) -> Result<Vec<(PathBuf, SourceDocument)>, CorpusError> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io(root))? {
        let path = entry.map_err(io(root))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    let mut out = Vec::new();
    for dir in dirs {
        let vp: VantagePoint = dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| CorpusError::UnknownVantagePoint { path: dir.clone() })?;
        for file in document_files(&dir)? {
            let doc = read_document(vp, &file, retrieved_at)?;
            out.push((file, doc));
        }
    }
    Ok(out)
}

//! Chipset vulnerability knowledge base.
//!
//! Ingests recorded vantage-point documents (manufacturer bulletins, NVD,
//! Android security bulletins, OEM changelogs, device and chipset catalogs),
//! links them into one relational model and computes vulnerability
//! lifecycle metrics over it.

pub mod analytics;
pub mod augment;
pub mod domain;
pub mod ingest;
pub mod kb;
pub mod machine;
pub mod picker;
pub mod stats;

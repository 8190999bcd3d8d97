//! SQLite persistence. Tables mirror the domain types one-to-one, plus the
//! two link tables; every save rewrites the whole base in one transaction.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rusqlite::{params, Connection, OptionalExtension, Row};
use thiserror::Error;

use super::{KbError, KnowledgeBase, LinkSource, Unresolved};
use crate::domain::{
    AospBulletin, ChipsetKey, ChipsetModel, CveId, CvssScore, DeviceId, DeviceUpdate, ModelNumber,
    SmartphoneModel, VantagePointRecord, Vulnerability,
};

const SCHEMA_VERSION: &str = "1";

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS chipset (
    manufacturer TEXT NOT NULL,
    model_number TEXT NOT NULL,
    release_date TEXT,
    marketing_name TEXT,
    PRIMARY KEY (manufacturer, model_number)
);
CREATE TABLE IF NOT EXISTS smartphone (
    id TEXT PRIMARY KEY,
    oem TEXT NOT NULL,
    device_name TEXT NOT NULL,
    chipset_raw TEXT NOT NULL,
    chipset_vendor TEXT,
    release_date TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS vulnerability (
    cve TEXT PRIMARY KEY,
    component TEXT,
    location TEXT NOT NULL,
    attribution TEXT NOT NULL,
    report_date TEXT,
    patch_date TEXT
);
CREATE TABLE IF NOT EXISTS vantage_point_record (
    cve TEXT NOT NULL REFERENCES vulnerability (cve),
    vantage_point TEXT NOT NULL,
    publication_date TEXT NOT NULL,
    source TEXT NOT NULL,
    manufacturer TEXT,
    reported_date TEXT,
    severity_tenths INTEGER,
    cvss_version TEXT,
    severity_label TEXT,
    description TEXT NOT NULL,
    affected_chipset_strings TEXT NOT NULL,
    component_raw TEXT,
    credit TEXT,
    internal_flag INTEGER,
    PRIMARY KEY (cve, vantage_point, publication_date)
);
CREATE TABLE IF NOT EXISTS device_update (
    id INTEGER PRIMARY KEY,
    device TEXT NOT NULL,
    release_date TEXT NOT NULL,
    spl_date TEXT,
    UNIQUE (device, release_date, spl_date)
);
CREATE TABLE IF NOT EXISTS device_update_cve (
    update_id INTEGER NOT NULL REFERENCES device_update (id),
    cve TEXT NOT NULL,
    PRIMARY KEY (update_id, cve)
);
CREATE TABLE IF NOT EXISTS aosp_bulletin (
    spl_date TEXT PRIMARY KEY
);
CREATE TABLE IF NOT EXISTS aosp_bulletin_cve (
    spl_date TEXT NOT NULL REFERENCES aosp_bulletin (spl_date),
    cve TEXT NOT NULL,
    PRIMARY KEY (spl_date, cve)
);
CREATE TABLE IF NOT EXISTS vulnerability_chipset (
    cve TEXT NOT NULL REFERENCES vulnerability (cve),
    manufacturer TEXT NOT NULL,
    model_number TEXT NOT NULL,
    vantage_point TEXT NOT NULL,
    raw TEXT NOT NULL,
    PRIMARY KEY (cve, manufacturer, model_number, vantage_point, raw),
    FOREIGN KEY (manufacturer, model_number) REFERENCES chipset (manufacturer, model_number)
);
CREATE TABLE IF NOT EXISTS smartphone_chipset (
    device TEXT PRIMARY KEY REFERENCES smartphone (id),
    manufacturer TEXT NOT NULL,
    model_number TEXT NOT NULL,
    FOREIGN KEY (manufacturer, model_number) REFERENCES chipset (manufacturer, model_number)
);
CREATE TABLE IF NOT EXISTS unresolved_chipset_string (
    subject TEXT NOT NULL,
    vantage_point TEXT,
    raw TEXT NOT NULL,
    reason TEXT NOT NULL
);
";

const DATA_TABLES: [&str; 11] = [
    "unresolved_chipset_string",
    "smartphone_chipset",
    "vulnerability_chipset",
    "aosp_bulletin_cve",
    "aosp_bulletin",
    "device_update_cve",
    "device_update",
    "vantage_point_record",
    "vulnerability",
    "smartphone",
    "chipset",
];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("store schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: String },
    #[error("corrupt value in {table}: {message}")]
    Corrupt {
        table: &'static str,
        message: String,
    },
    #[error(transparent)]
    Integrity(#[from] KbError),
}

fn corrupt(table: &'static str, message: impl Display) -> StoreError {
    StoreError::Corrupt {
        table,
        message: message.to_string(),
    }
}

fn parse<T: FromStr>(table: &'static str, raw: &str) -> Result<T, StoreError>
where
    T::Err: Display,
{
    raw.parse()
        .map_err(|e: T::Err| corrupt(table, format!("`{raw}`: {e}")))
}

fn parse_opt<T: FromStr>(table: &'static str, raw: Option<String>) -> Result<Option<T>, StoreError>
where
    T::Err: Display,
{
    raw.map(|r| parse(table, &r)).transpose()
}

fn date(table: &'static str, raw: &str) -> Result<NaiveDate, StoreError> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|e| corrupt(table, format!("`{raw}`: {e}")))
}

fn date_opt(table: &'static str, raw: Option<String>) -> Result<Option<NaiveDate>, StoreError> {
    raw.map(|r| date(table, &r)).transpose()
}

fn chipset_key(table: &'static str, cm: &str, model: &str) -> Result<ChipsetKey, StoreError> {
    Ok(ChipsetKey {
        manufacturer: parse(table, cm)?,
        model_number: ModelNumber::parse(model).map_err(|e| corrupt(table, e))?,
    })
}

fn open(path: &Path) -> Result<Connection, StoreError> {
    let conn = Connection::open(path)?;
    conn.execute_batch("PRAGMA foreign_keys = ON;")?;
    conn.execute_batch(SCHEMA)?;
    let version: Option<String> = conn
        .query_row(
            "SELECT value FROM meta WHERE key = 'schema_version'",
            [],
            |r| r.get(0),
        )
        .optional()?;
    match version {
        Some(v) if v != SCHEMA_VERSION => Err(StoreError::SchemaVersion { found: v }),
        Some(_) => Ok(conn),
        None => {
            conn.execute(
                "INSERT INTO meta (key, value) VALUES ('schema_version', ?1)",
                [SCHEMA_VERSION],
            )?;
            Ok(conn)
        }
    }
}

impl KnowledgeBase {
    /// Replace the contents of the store at `path` with this base.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let mut conn = open(path)?;
        let tx = conn.transaction()?;
        for table in DATA_TABLES {
            tx.execute(&format!("DELETE FROM {table}"), [])?;
        }
        {
            let mut stmt = tx.prepare(
                "INSERT INTO chipset (manufacturer, model_number, release_date, marketing_name) VALUES (?1, ?2, ?3, ?4)",
            )?;
            for c in self.chipsets.values() {
                stmt.execute(params![
                    c.manufacturer.as_str(),
                    c.model_number.as_str(),
                    c.release_date.map(|d| d.to_string()),
                    c.marketing_name
                ])?;
            }
            let mut stmt = tx.prepare(
                "INSERT INTO smartphone (id, oem, device_name, chipset_raw, chipset_vendor, release_date) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            )?;
            for s in self.smartphones.values() {
                stmt.execute(params![
                    s.id.as_str(),
                    s.oem,
                    s.device_name,
                    s.chipset_raw,
                    s.chipset_vendor.map(|v| v.as_str()),
                    s.release_date.to_string()
                ])?;
            }
            let mut vuln = tx.prepare(
                "INSERT INTO vulnerability (cve, component, location, attribution, report_date, patch_date) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            )?;
            let mut rec = tx.prepare(
                "INSERT INTO vantage_point_record (cve, vantage_point, publication_date, source, manufacturer, reported_date, severity_tenths, cvss_version, severity_label, description, affected_chipset_strings, component_raw, credit, internal_flag) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14)",
            )?;
            for v in self.vulnerabilities.values() {
                vuln.execute(params![
                    v.cve.to_string(),
                    v.component.map(|c| c.as_str()),
                    v.location.as_str(),
                    v.attribution.as_str(),
                    v.report_date.map(|d| d.to_string()),
                    v.patch_date.map(|d| d.to_string())
                ])?;
                for r in &v.records {
                    rec.execute(params![
                        r.cve.to_string(),
                        r.vantage_point.as_str(),
                        r.publication_date.to_string(),
                        r.source.as_str(),
                        r.manufacturer.map(|m| m.as_str()),
                        r.reported_date.map(|d| d.to_string()),
                        r.severity.map(|s| s.tenths()),
                        r.cvss_version,
                        r.severity_label,
                        r.description,
                        serde_json::to_string(&r.affected_chipset_strings)
                            .expect("strings serialize"),
                        r.component_raw,
                        r.credit,
                        r.internal_flag
                    ])?;
                }
            }
            let mut upd = tx.prepare(
                "INSERT INTO device_update (device, release_date, spl_date) VALUES (?1, ?2, ?3)",
            )?;
            let mut upd_cve =
                tx.prepare("INSERT INTO device_update_cve (update_id, cve) VALUES (?1, ?2)")?;
            for u in self.updates.values() {
                upd.execute(params![
                    u.device.as_str(),
                    u.release_date.to_string(),
                    u.spl_date.map(|d| d.to_string())
                ])?;
                let id = tx.last_insert_rowid();
                for cve in &u.explicit_cves {
                    upd_cve.execute(params![id, cve.to_string()])?;
                }
            }
            let mut bul = tx.prepare("INSERT INTO aosp_bulletin (spl_date) VALUES (?1)")?;
            let mut bul_cve =
                tx.prepare("INSERT INTO aosp_bulletin_cve (spl_date, cve) VALUES (?1, ?2)")?;
            for b in self.bulletins.values() {
                bul.execute([b.spl_date.to_string()])?;
                for cve in &b.cves {
                    bul_cve.execute(params![b.spl_date.to_string(), cve.to_string()])?;
                }
            }
            let mut link = tx.prepare(
                "INSERT INTO vulnerability_chipset (cve, manufacturer, model_number, vantage_point, raw) VALUES (?1, ?2, ?3, ?4, ?5)",
            )?;
            for l in self.vulnerability_links() {
                for s in &l.sources {
                    link.execute(params![
                        l.cve.to_string(),
                        l.chipset.manufacturer.as_str(),
                        l.chipset.model_number.as_str(),
                        s.vantage_point.as_str(),
                        s.raw
                    ])?;
                }
            }
            let mut dev = tx.prepare(
                "INSERT INTO smartphone_chipset (device, manufacturer, model_number) VALUES (?1, ?2, ?3)",
            )?;
            for (device, chipset) in &self.device_links {
                dev.execute(params![
                    device.as_str(),
                    chipset.manufacturer.as_str(),
                    chipset.model_number.as_str()
                ])?;
            }
            let mut unr = tx.prepare(
                "INSERT INTO unresolved_chipset_string (subject, vantage_point, raw, reason) VALUES (?1, ?2, ?3, ?4)",
            )?;
            for u in &self.unresolved {
                unr.execute(params![
                    u.subject,
                    u.vantage_point.map(|v| v.as_str()),
                    u.raw,
                    u.reason
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    /// Load a base saved with [`KnowledgeBase::save`].
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let conn = open(path)?;
        let mut kb = KnowledgeBase::new();

        let mut stmt = conn.prepare(
            "SELECT manufacturer, model_number, release_date, marketing_name FROM chipset",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, Option<String>>(2)?,
                r.get::<_, Option<String>>(3)?,
            ))
        })?;
        for row in rows {
            let (cm, model, release, marketing) = row?;
            let key = chipset_key("chipset", &cm, &model)?;
            kb.chipsets.insert(
                key.clone(),
                ChipsetModel {
                    manufacturer: key.manufacturer,
                    model_number: key.model_number,
                    release_date: date_opt("chipset", release)?,
                    marketing_name: marketing,
                },
            );
        }

        let mut stmt = conn.prepare(
            "SELECT id, oem, device_name, chipset_raw, chipset_vendor, release_date FROM smartphone",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, Option<String>>(4)?,
                r.get::<_, String>(5)?,
            ))
        })?;
        for row in rows {
            let (id, oem, device_name, chipset_raw, vendor, release) = row?;
            let phone = SmartphoneModel {
                id: DeviceId::from_slug(&id),
                oem,
                device_name,
                chipset_raw,
                chipset_vendor: parse_opt("smartphone", vendor)?,
                release_date: date("smartphone", &release)?,
            };
            kb.smartphones.insert(phone.id.clone(), phone);
        }

        let mut stmt = conn.prepare(
            "SELECT cve, component, location, attribution, report_date, patch_date FROM vulnerability",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, Option<String>>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, Option<String>>(4)?,
                r.get::<_, Option<String>>(5)?,
            ))
        })?;
        for row in rows {
            let (cve, component, location, attribution, report, patch) = row?;
            let cve: CveId = parse("vulnerability", &cve)?;
            kb.vulnerabilities.insert(
                cve.clone(),
                Vulnerability {
                    cve,
                    records: Vec::new(),
                    component: parse_opt("vulnerability", component)?,
                    location: parse("vulnerability", &location)?,
                    attribution: parse("vulnerability", &attribution)?,
                    report_date: date_opt("vulnerability", report)?,
                    patch_date: date_opt("vulnerability", patch)?,
                    affected_chipsets: BTreeSet::new(),
                },
            );
        }

        let mut stmt = conn.prepare(
            "SELECT cve, vantage_point, publication_date, source, manufacturer, reported_date, severity_tenths, cvss_version, severity_label, description, affected_chipset_strings, component_raw, credit, internal_flag FROM vantage_point_record",
        )?;
        let mut rows = stmt.query([])?;
        while let Some(r) = rows.next()? {
            let record = record_from_row(r)?;
            let Some(v) = kb.vulnerabilities.get_mut(&record.cve) else {
                return Err(corrupt(
                    "vantage_point_record",
                    format!("no vulnerability {}", record.cve),
                ));
            };
            v.records.push(record);
        }
        for v in kb.vulnerabilities.values_mut() {
            v.records.sort_by_key(VantagePointRecord::key);
        }

        let mut stmt =
            conn.prepare("SELECT id, device, release_date, spl_date FROM device_update")?;
        let mut cves = conn.prepare("SELECT cve FROM device_update_cve WHERE update_id = ?1")?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, Option<String>>(3)?,
            ))
        })?;
        for row in rows {
            let (id, device, release, spl) = row?;
            let explicit = cves
                .query_map([id], |r| r.get::<_, String>(0))?
                .map(|c| parse::<CveId>("device_update_cve", &c?))
                .collect::<Result<BTreeSet<_>, _>>()?;
            let update = DeviceUpdate::new(
                DeviceId::from_slug(&device),
                date("device_update", &release)?,
                date_opt("device_update", spl)?,
                explicit,
            )
            .map_err(|e| corrupt("device_update", e))?;
            kb.updates.insert(update.key(), update);
        }

        let mut stmt = conn.prepare("SELECT spl_date FROM aosp_bulletin")?;
        let mut cves = conn.prepare("SELECT cve FROM aosp_bulletin_cve WHERE spl_date = ?1")?;
        let spls: Vec<String> = stmt
            .query_map([], |r| r.get(0))?
            .collect::<Result<_, _>>()?;
        for spl in spls {
            let listed = cves
                .query_map([&spl], |r| r.get::<_, String>(0))?
                .map(|c| parse::<CveId>("aosp_bulletin_cve", &c?))
                .collect::<Result<BTreeSet<_>, _>>()?;
            let bulletin = AospBulletin::new(date("aosp_bulletin", &spl)?, listed)
                .map_err(|e| corrupt("aosp_bulletin", e))?;
            kb.bulletins.insert(bulletin.spl_date, bulletin);
        }

        let mut stmt = conn.prepare(
            "SELECT cve, manufacturer, model_number, vantage_point, raw FROM vulnerability_chipset",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
            ))
        })?;
        for row in rows {
            let (cve, cm, model, vp, raw) = row?;
            let cve: CveId = parse("vulnerability_chipset", &cve)?;
            let key = chipset_key("vulnerability_chipset", &cm, &model)?;
            if let Some(v) = kb.vulnerabilities.get_mut(&cve) {
                v.affected_chipsets.insert(key.clone());
            }
            kb.vuln_links
                .entry(cve)
                .or_default()
                .entry(key)
                .or_default()
                .insert(LinkSource {
                    vantage_point: parse("vulnerability_chipset", &vp)?,
                    raw,
                });
        }

        let mut stmt =
            conn.prepare("SELECT device, manufacturer, model_number FROM smartphone_chipset")?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
            ))
        })?;
        for row in rows {
            let (device, cm, model) = row?;
            kb.device_links.insert(
                DeviceId::from_slug(&device),
                chipset_key("smartphone_chipset", &cm, &model)?,
            );
        }

        let mut stmt = conn
            .prepare("SELECT subject, vantage_point, raw, reason FROM unresolved_chipset_string")?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, Option<String>>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
            ))
        })?;
        for row in rows {
            let (subject, vp, raw, reason) = row?;
            kb.unresolved.insert(Unresolved {
                subject,
                vantage_point: parse_opt("unresolved_chipset_string", vp)?,
                raw,
                reason,
            });
        }

        kb.reindex();
        kb.check_integrity()?;
        Ok(kb)
    }
}

fn record_from_row(r: &Row<'_>) -> Result<VantagePointRecord, StoreError> {
    const T: &str = "vantage_point_record";
    let strings: String = r.get(10)?;
    let severity: Option<u8> = r.get(6)?;
    Ok(VantagePointRecord {
        cve: parse(T, &r.get::<_, String>(0)?)?,
        vantage_point: parse(T, &r.get::<_, String>(1)?)?,
        publication_date: date(T, &r.get::<_, String>(2)?)?,
        source: parse(T, &r.get::<_, String>(3)?)?,
        manufacturer: parse_opt(T, r.get(4)?)?,
        reported_date: date_opt(T, r.get(5)?)?,
        severity: severity
            .map(CvssScore::from_tenths)
            .transpose()
            .map_err(|e| corrupt(T, e))?,
        cvss_version: r.get(7)?,
        severity_label: r.get(8)?,
        description: r.get(9)?,
        affected_chipset_strings: serde_json::from_str(&strings).map_err(|e| corrupt(T, e))?,
        component_raw: r.get(11)?,
        credit: r.get(12)?,
        internal_flag: r.get(13)?,
    })
}

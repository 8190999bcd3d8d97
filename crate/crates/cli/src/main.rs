//! `chipkb`: ingest recorded documents, build the knowledge base, emit
//! reports and serve the API.
//!
//! Exit codes: 0 on success, 1 when validation rejected entries or an
//! operation failed, 2 on usage errors.

mod config;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use chipkb_core::analytics::{self, text, ReportSection};
use chipkb_core::domain::{ChipsetManufacturer, CveId, DeviceId, VantagePoint};
use chipkb_core::ingest::{
    document_files, parse_document, read_document, render_golden, CorpusError, Ingested,
    SourceDocument, ValidationIssue,
};
use chipkb_core::kb::KnowledgeBase;
use chipkb_core::machine::to_machine;
use chipkb_core::picker::{pick_devices, PickFilters, PickRequest, PickResult};

use config::{CliConfig, GlobalArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("validation rejected {0} entries or documents")]
    Rejected(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) | CliError::Rejected(_) => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "chipkb",
    version,
    about = "Android chipset vulnerability knowledge base"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Text,
    Machine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse documents and store the accepted entries.
    Ingest {
        /// Vantage point of every path; inferred from directory names when
        /// absent.
        #[arg(long)]
        source: Option<VantagePoint>,
        /// Documents, vantage-point directories or corpus roots. Defaults to
        /// the data directory.
        paths: Vec<PathBuf>,
        /// Date the documents were retrieved; defaults to today.
        #[arg(long, value_name = "YYYY-MM-DD")]
        retrieved_at: Option<NaiveDate>,
    },
    /// Recompute component, location, attribution and patch date.
    Augment,
    /// Rebuild vulnerability-chipset and device-chipset links.
    Link,
    /// Print a report.
    Report {
        /// rq1, rq2, rq3, rq4 or all.
        section: ReportSection,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Chipsets and smartphones affected by one vulnerability.
    Impact {
        cve: CveId,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Greedily select devices covering the most distinct vulnerabilities.
    Pick {
        /// Number of devices to select, locked ones included.
        #[arg(long)]
        k: usize,
        /// Allowed OEM; repeatable.
        #[arg(long = "oem", value_name = "OEM")]
        oems: Vec<String>,
        /// Allowed chipset manufacturer; repeatable.
        #[arg(long = "manufacturer", value_name = "CM")]
        manufacturers: Vec<ChipsetManufacturer>,
        /// Earliest device release date.
        #[arg(long, value_name = "YYYY-MM-DD")]
        released_from: Option<NaiveDate>,
        /// Latest device release date.
        #[arg(long, value_name = "YYYY-MM-DD")]
        released_to: Option<NaiveDate>,
        /// Device id that must be selected; repeatable.
        #[arg(long = "lock", value_name = "DEVICE")]
        locked: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Write every table as line-delimited JSON into a directory.
    Export { dir: PathBuf },
    /// Replace the store with tables exported by `export`.
    Import { dir: PathBuf },
    /// Serve the HTTP API. SIGHUP reloads the store.
    Serve {
        /// Listen address.
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Parse documents without storing them and list validation issues.
    Validate {
        /// Vantage point of every path; inferred from directory names otherwise.
        #[arg(long)]
        source: Option<VantagePoint>,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_name = "YYYY-MM-DD")]
        retrieved_at: Option<NaiveDate>,
        /// `machine` prints the canonical golden lines.
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("CHIPKB_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(filter)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chipkb: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = CliConfig::from_args(&cli.global)?;
    match cli.command {
        Command::Ingest {
            source,
            paths,
            retrieved_at,
        } => ingest(&cfg, source, &paths, retrieved_at.unwrap_or_else(today)),
        Command::Augment => augment(&cfg),
        Command::Link => link(&cfg),
        Command::Report { section, format } => report(&cfg, section, format),
        Command::Impact { cve, format } => impact(&cfg, &cve, format),
        Command::Pick {
            k,
            oems,
            manufacturers,
            released_from,
            released_to,
            locked,
            format,
        } => {
            let req = PickRequest {
                k,
                filters: PickFilters {
                    oems,
                    manufacturers,
                    released_from,
                    released_to,
                },
                locked: locked.iter().map(|s| DeviceId::from_slug(s)).collect(),
            };
            pick(&cfg, &req, format)
        }
        Command::Export { dir } => {
            let kb = load(&cfg)?;
            kb.export_dir(&dir).map_err(failed)?;
            println!("exported to {}", dir.display());
            Ok(())
        }
        Command::Import { dir } => {
            let kb = KnowledgeBase::import_dir(&dir).map_err(failed)?;
            save(&cfg, &kb)?;
            println!(
                "imported {} into {}",
                dir.display(),
                cfg.store_path.display()
            );
            Ok(())
        }
        Command::Serve { bind } => serve(&cfg, bind),
        Command::Validate {
            source,
            paths,
            retrieved_at,
            format,
        } => validate(source, &paths, retrieved_at.unwrap_or_else(today), format),
    }
}

fn today() -> NaiveDate {
    chrono::Local::now().date_naive()
}

fn load(cfg: &CliConfig) -> Result<KnowledgeBase, CliError> {
    if !cfg.store_path.exists() {
        return Err(CliError::Usage(format!(
            "store {} does not exist; run `chipkb ingest` first",
            cfg.store_path.display()
        )));
    }
    KnowledgeBase::load(&cfg.store_path)
        .map_err(|e| failed(format!("{}: {e}", cfg.store_path.display())))
}

fn load_or_new(cfg: &CliConfig) -> Result<KnowledgeBase, CliError> {
    if cfg.store_path.exists() {
        load(cfg)
    } else {
        Ok(KnowledgeBase::new())
    }
}

fn save(cfg: &CliConfig, kb: &KnowledgeBase) -> Result<(), CliError> {
    kb.save(&cfg.store_path)
        .map_err(|e| failed(format!("{}: {e}", cfg.store_path.display())))
}

fn dir_vantage_point(dir: &Path) -> Option<VantagePoint> {
    dir.file_name()?.to_str()?.parse().ok()
}

fn files_of(vp: VantagePoint, dir: &Path) -> Result<Vec<(VantagePoint, PathBuf)>, CliError> {
    Ok(document_files(dir)
        .map_err(failed)?
        .into_iter()
        .map(|p| (vp, p))
        .collect())
}

fn corpus_files(root: &Path) -> Result<Vec<(VantagePoint, PathBuf)>, CliError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| failed(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::new();
    for dir in dirs {
        let vp = dir_vantage_point(&dir).ok_or_else(|| {
            CliError::Usage(format!(
                "{}: directory name is not a vantage point",
                dir.display()
            ))
        })?;
        out.extend(files_of(vp, &dir)?);
    }
    Ok(out)
}

/// Resolve command-line paths to documents and their vantage points.
fn collect_files(
    source: Option<VantagePoint>,
    paths: &[PathBuf],
) -> Result<Vec<(VantagePoint, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for path in paths {
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "{}: no such file or directory",
                path.display()
            )));
        }
        match (source, path.is_dir()) {
            (Some(vp), true) => out.extend(files_of(vp, path)?),
            (Some(vp), false) => out.push((vp, path.clone())),
            (None, true) => match dir_vantage_point(path) {
                Some(vp) => out.extend(files_of(vp, path)?),
                None => out.extend(corpus_files(path)?),
            },
            (None, false) => {
                let vp = path.parent().and_then(dir_vantage_point).ok_or_else(|| {
                    CliError::Usage(format!(
                        "cannot infer the source of {}; pass --source",
                        path.display()
                    ))
                })?;
                out.push((vp, path.clone()));
            }
        }
    }
    Ok(out)
}

fn read(
    vp: VantagePoint,
    path: &Path,
    retrieved_at: NaiveDate,
) -> Result<Result<SourceDocument, String>, CliError> {
    match read_document(vp, path, retrieved_at) {
        Ok(doc) => Ok(Ok(doc)),
        Err(CorpusError::Document { source, .. }) => Ok(Err(source.to_string())),
        Err(e) => Err(failed(e)),
    }
}

fn issue_line(path: &Path, issue: &ValidationIssue) -> String {
    let entry = issue
        .entry
        .map_or_else(|| "document".to_string(), |e| format!("entry {e}"));
    let severity = if issue.is_reject() { "reject" } else { "warn" };
    format!(
        "{}: {severity} {entry}: {} fails {}: `{}`",
        path.display(),
        issue.field,
        issue.rule,
        issue.raw_value
    )
}

fn kind(parsed: &Ingested) -> &'static str {
    match parsed {
        Ingested::Records(_) => "records",
        Ingested::Chipsets(_) => "chipsets",
        Ingested::Smartphones(_) => "smartphones",
        Ingested::Updates(_) => "updates",
        Ingested::Bulletins(_) => "bulletins",
    }
}

fn print_findings(path: &Path, parsed: &Ingested) -> usize {
    let excluded = match parsed {
        Ingested::Records(p) => &p.excluded,
        Ingested::Chipsets(p) => &p.excluded,
        Ingested::Smartphones(p) => &p.excluded,
        Ingested::Updates(p) => &p.excluded,
        Ingested::Bulletins(p) => &p.excluded,
    };
    for ex in excluded {
        println!(
            "{}: excluded entry {} {}: {}",
            path.display(),
            ex.entry,
            ex.subject,
            ex.reason
        );
    }
    for issue in parsed.issues() {
        println!("{}", issue_line(path, issue));
    }
    parsed.issues().iter().filter(|i| i.is_reject()).count()
}

fn ingest(
    cfg: &CliConfig,
    source: Option<VantagePoint>,
    paths: &[PathBuf],
    retrieved_at: NaiveDate,
) -> Result<(), CliError> {
    if source.is_some() && paths.is_empty() {
        return Err(CliError::Usage("--source needs at least one path".into()));
    }
    let files = if paths.is_empty() {
        collect_files(None, std::slice::from_ref(&cfg.data_dir))?
    } else {
        collect_files(source, paths)?
    };
    let table = cfg.key_terms()?;
    let mut kb = load_or_new(cfg)?;
    let mut rejected = 0;
    for (vp, path) in files {
        let doc = match read(vp, &path, retrieved_at)? {
            Ok(doc) => doc,
            Err(e) => {
                println!("{}: error: {e}", path.display());
                rejected += 1;
                continue;
            }
        };
        match parse_document(&doc) {
            Ok(parsed) => {
                rejected += print_findings(&path, &parsed);
                println!(
                    "{}: {} {}",
                    path.display(),
                    parsed.item_count(),
                    kind(&parsed)
                );
                let (_, problems) = kb.ingest(parsed, &table);
                for p in problems {
                    tracing::warn!("{}: {p}", path.display());
                }
            }
            Err(e) => {
                println!("{}: error: {e}", path.display());
                rejected += 1;
            }
        }
    }
    save(cfg, &kb)?;
    if rejected > 0 {
        Err(CliError::Rejected(rejected))
    } else {
        Ok(())
    }
}

fn validate(
    source: Option<VantagePoint>,
    paths: &[PathBuf],
    retrieved_at: NaiveDate,
    format: Format,
) -> Result<(), CliError> {
    let mut rejected = 0;
    for (vp, path) in collect_files(source, paths)? {
        let result = match read(vp, &path, retrieved_at)? {
            Ok(doc) => parse_document(&doc),
            Err(e) => {
                println!("{}: error: {e}", path.display());
                rejected += 1;
                continue;
            }
        };
        match format {
            Format::Machine => print!("{}", render_golden(&result)),
            Format::Text => match &result {
                Ok(parsed) => {
                    print_findings(&path, parsed);
                    println!(
                        "{}: {} {}",
                        path.display(),
                        parsed.item_count(),
                        kind(parsed)
                    );
                }
                Err(e) => println!("{}: error: {e}", path.display()),
            },
        }
        rejected += match &result {
            Ok(parsed) => parsed.issues().iter().filter(|i| i.is_reject()).count(),
            Err(_) => 1,
        };
    }
    if rejected > 0 {
        Err(CliError::Rejected(rejected))
    } else {
        Ok(())
    }
}

fn augment(cfg: &CliConfig) -> Result<(), CliError> {
    let table = cfg.key_terms()?;
    let mut kb = load(cfg)?;
    let problems = kb.augment_all(&table);
    for p in &problems {
        println!("warning: {p}");
    }
    save(cfg, &kb)?;
    println!("augmented {} vulnerabilities", kb.vulnerabilities().count());
    Ok(())
}

fn link(cfg: &CliConfig) -> Result<(), CliError> {
    let mut kb = load(cfg)?;
    let summary = kb.link_all();
    for u in kb.unresolved() {
        println!("unresolved {} `{}`: {}", u.subject, u.raw, u.reason);
    }
    save(cfg, &kb)?;
    println!(
        "linked: {} vulnerability links, {} device links, {} unresolved chipset strings",
        summary.vulnerability_links, summary.device_links, summary.unresolved
    );
    Ok(())
}

fn machine<T: Serialize>(value: &T) -> Result<(), CliError> {
    print!("{}", to_machine(value).map_err(failed)?);
    Ok(())
}

fn report(cfg: &CliConfig, section: ReportSection, format: Format) -> Result<(), CliError> {
    let kb = load(cfg)?;
    let report = analytics::full_report(&kb, &cfg.analytics, section);
    if format == Format::Text {
        print!("{}", text::render(&report));
        return Ok(());
    }
    let missing = || failed("requested section missing from report");
    match section {
        ReportSection::All => machine(&report),
        ReportSection::Rq1 => machine(report.rq1.as_ref().ok_or_else(missing)?),
        ReportSection::Rq2 => machine(report.rq2.as_ref().ok_or_else(missing)?),
        ReportSection::Rq3 => machine(report.rq3.as_ref().ok_or_else(missing)?),
        ReportSection::Rq4 => machine(report.rq4.as_ref().ok_or_else(missing)?),
    }
}

fn impact(cfg: &CliConfig, cve: &CveId, format: Format) -> Result<(), CliError> {
    let kb = load(cfg)?;
    let r = analytics::impact_report(&kb, cve).map_err(failed)?;
    match format {
        Format::Text => {
            print!("{}", text::render_impact(&r));
            Ok(())
        }
        Format::Machine => machine(&r),
    }
}

fn render_pick(r: &PickResult) -> String {
    let mut out = String::new();
    for (i, d) in r.selection.iter().enumerate() {
        out.push_str(&format!(
            "{:>2}. {} ({} {}, {}, released {}) +{} of {}{}\n",
            i + 1,
            d.device,
            d.oem,
            d.device_name,
            d.chipset,
            d.release_date,
            d.marginal_gain,
            d.vulnerabilities,
            if d.locked { " [locked]" } else { "" }
        ));
    }
    out.push_str(&format!(
        "covered {} distinct vulnerabilities with {} of {} candidates\n",
        r.total_covered,
        r.selection.len(),
        r.candidates
    ));
    if let Some(t) = &r.truncated {
        out.push_str(&format!("note: {t}\n"));
    }
    out
}

fn pick(cfg: &CliConfig, req: &PickRequest, format: Format) -> Result<(), CliError> {
    let kb = load(cfg)?;
    let r = pick_devices(&kb, req).map_err(failed)?;
    match format {
        Format::Text => {
            print!("{}", render_pick(&r));
            Ok(())
        }
        Format::Machine => machine(&r),
    }
}

fn serve(cfg: &CliConfig, bind: SocketAddr) -> Result<(), CliError> {
    use chipkb_api::{AppState, Snapshot};

    let kb = load(cfg)?;
    let state = AppState::new(Snapshot {
        kb,
        config: cfg.analytics,
    });
    let runtime = tokio::runtime::Runtime::new().map_err(failed)?;
    runtime.block_on(async {
        #[cfg(unix)]
        {
            use tokio::signal::unix::{signal, SignalKind};
            let mut hangup = signal(SignalKind::hangup()).map_err(failed)?;
            let state = state.clone();
            let store = cfg.store_path.clone();
            let config = cfg.analytics;
            tokio::spawn(async move {
                while hangup.recv().await.is_some() {
                    match KnowledgeBase::load(&store) {
                        Ok(kb) => {
                            state.swap(Snapshot { kb, config });
                            tracing::info!(store = %store.display(), "reloaded");
                        }
                        Err(e) => tracing::error!(store = %store.display(), "reload failed: {e}"),
                    }
                }
            });
        }
        eprintln!("serving on http://{bind}");
        chipkb_api::serve(bind, state).await.map_err(failed)
    })
}

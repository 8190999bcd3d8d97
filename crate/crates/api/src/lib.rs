//! Read-only HTTP API over a knowledge-base snapshot.
//!
//! Every JSON body is rendered with [`chipkb_core::machine::to_machine`],
//! so metric endpoints return exactly the machine report format. The
//! snapshot can be replaced atomically while the server runs.

mod error;

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, Method};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use chipkb_core::analytics::{self, AnalyticsConfig, ImpactReport};
use chipkb_core::augment::AttributionMode;
use chipkb_core::domain::{
    ChipsetKey, ChipsetManufacturer, ChipsetModel, CveId, DeviceId, DeviceUpdate, ModelNumber,
    SmartphoneModel, Vulnerability,
};
use chipkb_core::kb::KnowledgeBase;
use chipkb_core::machine::to_machine;
use chipkb_core::picker::{coverage_delta, pick_devices, PickRequest};

pub use error::ApiError;

pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const MAX_PAGE_SIZE: usize = 1000;

/// An immutable knowledge base and the metric defaults served with it.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub kb: KnowledgeBase,
    pub config: AnalyticsConfig,
}

/// Shared server state. Requests take a reference-counted snapshot, so a
/// swap never affects a request already in flight.
#[derive(Clone, Default)]
pub struct AppState {
    current: Arc<RwLock<Arc<Snapshot>>>,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        AppState {
            current: Arc::new(RwLock::new(Arc::new(snapshot))),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Replaces the served snapshot and returns the previous one.
    pub fn swap(&self, snapshot: Snapshot) -> Arc<Snapshot> {
        let mut guard = self.current.write().expect("snapshot lock poisoned");
        std::mem::replace(&mut *guard, Arc::new(snapshot))
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(health))
        .route("/chipsets", get(list_chipsets))
        .route("/chipsets/:cm/:model", get(chipset_detail))
        .route("/devices", get(list_devices))
        .route("/devices/:id", get(device_detail))
        .route("/vulnerabilities", get(list_vulnerabilities))
        .route("/vulnerabilities/:cve", get(vulnerability_detail))
        .route("/metrics/introduction", get(metric_introduction))
        .route("/metrics/discovery", get(metric_discovery))
        .route("/metrics/severity", get(metric_severity))
        .route("/metrics/patch-latency", get(metric_patch_latency))
        .route("/metrics/availability", get(metric_availability))
        .route("/metrics/consistency", get(metric_consistency))
        .route("/metrics/unmitigated", get(metric_unmitigated))
        .route("/metrics/update-timeline", get(metric_update_timeline))
        .route(
            "/metrics/affected-distribution",
            get(metric_affected_distribution),
        )
        .route("/pick", post(pick))
        .route("/pick/delta", post(pick_delta))
        .fallback(|| async { ApiError::NotFound("no such route".into()) })
        .layer(cors)
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn machine<T: Serialize>(value: &T) -> Result<Response, ApiError> {
    let body = to_machine(value).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn json<T>(j: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    j.map(|Json(t)| t)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    offset: Option<usize>,
    limit: Option<usize>,
    manufacturer: Option<String>,
    oem: Option<String>,
}

impl PageQuery {
    fn manufacturer(&self) -> Result<Option<ChipsetManufacturer>, ApiError> {
        self.manufacturer
            .as_deref()
            .map(|m| {
                m.parse().map_err(|e: chipkb_core::domain::UnknownValue| {
                    ApiError::BadRequest(e.to_string())
                })
            })
            .transpose()
    }
}

#[derive(Debug, Serialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

fn paginate<T>(items: impl Iterator<Item = T>, q: &PageQuery) -> Result<Page<T>, ApiError> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_SIZE);
    if limit == 0 || limit > MAX_PAGE_SIZE {
        return Err(ApiError::BadRequest(format!(
            "limit must be between 1 and {MAX_PAGE_SIZE}"
        )));
    }
    let offset = q.offset.unwrap_or(0);
    let all: Vec<T> = items.collect();
    let total = all.len();
    Ok(Page {
        items: all.into_iter().skip(offset).take(limit).collect(),
        total,
        offset,
        limit,
    })
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    chipsets: usize,
    smartphones: usize,
    vulnerabilities: usize,
}

async fn health(State(state): State<AppState>) -> Result<Response, ApiError> {
    let s = state.snapshot();
    machine(&Health {
        status: "ok",
        chipsets: s.kb.chipsets().count(),
        smartphones: s.kb.smartphones().count(),
        vulnerabilities: s.kb.vulnerabilities().count(),
    })
}

#[derive(Serialize)]
struct ChipsetSummary<'a> {
    chipset: &'a ChipsetModel,
    vulnerabilities: usize,
    devices: usize,
}

async fn list_chipsets(
    State(state): State<AppState>,
    q: Result<Query<PageQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let cm = q.manufacturer()?;
    let s = state.snapshot();
    let items =
        s.kb.chipsets()
            .filter(|c| cm.is_none_or(|m| c.manufacturer == m))
            .map(|c| {
                let key = c.key();
                ChipsetSummary {
                    chipset: c,
                    vulnerabilities: s.kb.vulnerability_count(&key),
                    devices: s.kb.devices_on(&key).count(),
                }
            });
    machine(&paginate(items, &q)?)
}

#[derive(Serialize)]
struct ChipsetDetail<'a> {
    chipset: &'a ChipsetModel,
    vulnerabilities: Vec<CveId>,
    devices: Vec<&'a DeviceId>,
}

async fn chipset_detail(
    State(state): State<AppState>,
    Path((cm, model)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let manufacturer: ChipsetManufacturer = cm
        .parse()
        .map_err(|e: chipkb_core::domain::UnknownValue| ApiError::NotFound(e.to_string()))?;
    let model_number = ModelNumber::parse(&model).map_err(|e| ApiError::NotFound(e.to_string()))?;
    let key = ChipsetKey {
        manufacturer,
        model_number,
    };
    let s = state.snapshot();
    let chipset =
        s.kb.chipset(&key)
            .ok_or_else(|| ApiError::NotFound(format!("unknown chipset {key}")))?;
    machine(&ChipsetDetail {
        chipset,
        vulnerabilities: s.kb.vulnerabilities_of(&key).into_iter().collect(),
        devices: s.kb.devices_on(&key).collect(),
    })
}

#[derive(Serialize)]
struct DeviceSummary<'a> {
    device: &'a SmartphoneModel,
    chipset: Option<&'a ChipsetKey>,
    vulnerabilities: usize,
}

async fn list_devices(
    State(state): State<AppState>,
    q: Result<Query<PageQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let cm = q.manufacturer()?;
    let s = state.snapshot();
    let items =
        s.kb.smartphones()
            .map(|p| (p, s.kb.chipset_of(&p.id)))
            .filter(|(p, _)| {
                q.oem
                    .as_deref()
                    .is_none_or(|o| o.eq_ignore_ascii_case(&p.oem))
            })
            .filter(|(_, c)| cm.is_none_or(|m| c.is_some_and(|c| c.manufacturer == m)))
            .map(|(p, c)| DeviceSummary {
                device: p,
                chipset: c,
                vulnerabilities: c.map_or(0, |c| s.kb.vulnerability_count(c)),
            });
    machine(&paginate(items, &q)?)
}

#[derive(Serialize)]
struct DeviceDetail<'a> {
    device: &'a SmartphoneModel,
    chipset: Option<&'a ChipsetKey>,
    vulnerabilities: Vec<CveId>,
    updates: Vec<&'a DeviceUpdate>,
}

async fn device_detail(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let s = state.snapshot();
    let id = DeviceId::from_slug(&id);
    let device =
        s.kb.smartphone(&id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown device {id}")))?;
    let chipset = s.kb.chipset_of(&id);
    machine(&DeviceDetail {
        device,
        chipset,
        vulnerabilities: chipset
            .map(|c| s.kb.vulnerabilities_of(c).into_iter().collect())
            .unwrap_or_default(),
        updates: s.kb.updates_for(&id).collect(),
    })
}

#[derive(Serialize)]
struct VulnerabilitySummary<'a> {
    cve: &'a CveId,
    manufacturers: Vec<ChipsetManufacturer>,
    patch_date: Option<NaiveDate>,
    chipsets: usize,
}

async fn list_vulnerabilities(
    State(state): State<AppState>,
    q: Result<Query<PageQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let cm = q.manufacturer()?;
    let s = state.snapshot();
    let items =
        s.kb.vulnerabilities()
            .filter(|v| cm.is_none_or(|m| v.manufacturers().contains(&m)))
            .map(|v| VulnerabilitySummary {
                cve: &v.cve,
                manufacturers: v.manufacturers().into_iter().collect(),
                patch_date: v.patch_date,
                chipsets: v.affected_chipsets.len(),
            });
    machine(&paginate(items, &q)?)
}

#[derive(Serialize)]
struct DeviceTimeline {
    device: DeviceId,
    has_update_info: bool,
    first_mitigating_update: Option<NaiveDate>,
}

#[derive(Serialize)]
struct VulnerabilityDetail<'a> {
    impact: ImpactReport,
    vulnerability: &'a Vulnerability,
    timeline: Vec<DeviceTimeline>,
}

async fn vulnerability_detail(
    State(state): State<AppState>,
    Path(cve): Path<String>,
) -> Result<Response, ApiError> {
    let cve: CveId = cve
        .parse()
        .map_err(|e: chipkb_core::domain::CveError| ApiError::NotFound(e.to_string()))?;
    let s = state.snapshot();
    let impact = analytics::impact_report(&s.kb, &cve)?;
    let vulnerability = s.kb.vulnerability(&cve).expect("impact report found it");
    let timeline = impact
        .smartphones
        .iter()
        .map(|d| DeviceTimeline {
            device: d.clone(),
            has_update_info: s.kb.has_update_info(d),
            first_mitigating_update: s
                .kb
                .mitigating_updates(&cve, d)
                .first()
                .map(|u| u.release_date),
        })
        .collect();
    machine(&VulnerabilityDetail {
        impact,
        vulnerability,
        timeline,
    })
}

async fn metric_introduction(State(state): State<AppState>) -> Result<Response, ApiError> {
    machine(&analytics::introduction_report(&state.snapshot().kb))
}

#[derive(Debug, Deserialize)]
struct DiscoveryQuery {
    mode: Option<AttributionMode>,
}

async fn metric_discovery(
    State(state): State<AppState>,
    q: Result<Query<DiscoveryQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let s = state.snapshot();
    machine(&analytics::discovery_report(
        &s.kb,
        q.mode.unwrap_or(s.config.attribution_mode),
    ))
}

async fn metric_severity(State(state): State<AppState>) -> Result<Response, ApiError> {
    machine(&analytics::severity_by_location(&state.snapshot().kb))
}

#[derive(Debug, Deserialize)]
struct LatencyQuery {
    threshold_days: Option<i64>,
}

async fn metric_patch_latency(
    State(state): State<AppState>,
    q: Result<Query<LatencyQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let s = state.snapshot();
    machine(&analytics::patch_latency_report(
        &s.kb,
        q.threshold_days.unwrap_or(s.config.threshold_days),
    ))
}

#[derive(Debug, Deserialize)]
struct AvailabilityQuery {
    window_days: Option<i64>,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
}

async fn metric_availability(
    State(state): State<AppState>,
    q: Result<Query<AvailabilityQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let s = state.snapshot();
    let config = AnalyticsConfig {
        window_days: q.window_days.unwrap_or(s.config.window_days),
        availability_from: q.from.or(s.config.availability_from),
        availability_to: q.to.or(s.config.availability_to),
        ..s.config
    };
    machine(&analytics::availability_matrix(&s.kb, &config))
}

async fn metric_consistency(State(state): State<AppState>) -> Result<Response, ApiError> {
    machine(&analytics::severity_consistency(&state.snapshot().kb))
}

#[derive(Debug, Deserialize)]
struct CutoffQuery {
    cutoff: Option<NaiveDate>,
}

async fn metric_unmitigated(
    State(state): State<AppState>,
    q: Result<Query<CutoffQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let s = state.snapshot();
    machine(&analytics::unmitigated_vulnerabilities(
        &s.kb,
        q.cutoff.unwrap_or(s.config.cutoff),
    ))
}

async fn metric_update_timeline(State(state): State<AppState>) -> Result<Response, ApiError> {
    machine(&analytics::update_timeline_report(&state.snapshot().kb))
}

async fn metric_affected_distribution(State(state): State<AppState>) -> Result<Response, ApiError> {
    machine(&analytics::affected_count_distribution(
        &state.snapshot().kb,
    ))
}

async fn pick(
    State(state): State<AppState>,
    body: Result<Json<PickRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json(body)?;
    machine(&pick_devices(&state.snapshot().kb, &req)?)
}

/// Body of `POST /pick/delta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaRequest {
    #[serde(default)]
    pub selection: Vec<DeviceId>,
    pub candidate: DeviceId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaResponse {
    pub candidate: DeviceId,
    pub delta: usize,
}

async fn pick_delta(
    State(state): State<AppState>,
    body: Result<Json<DeltaRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json(body)?;
    let delta = coverage_delta(&state.snapshot().kb, &req.selection, &req.candidate)?;
    machine(&DeltaResponse {
        candidate: req.candidate,
        delta,
    })
}

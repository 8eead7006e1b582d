//! REST surface.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/geocoding` | `address`, `date`, `precision`, `maxresults`, `maxdist`, `scoring`, `persist` |
//! | POST | `/batch` | CSV body; `address_column`, `date_column`, `delimiter` plus the geocoding parameters |
//! | GET | `/results/{ruid}` | a persisted result set |
//! | POST | `/results/{ruid}/{id}/edit` | JSON edit payload |
//! | GET | `/health` | |

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use histgeo::fuzzy_time::parse_fuzzy_date;
use histgeo::geocoder::BatchRowResult;
use histgeo::scoring::ScoringExpression;
use histgeo::GeocodeQuery;
use serde_json::json;
use thiserror::Error;
use tower_http::services::ServeDir;

use crate::api::{parse_edit_payload, ApiResult, EditResponse, ErrorBody, GeocodeResponse, ResultSetResponse};
use crate::batch_csv::{merge_outcomes, parse_batch_csv, BatchCsvOptions};
use crate::config::{parse_bool, Config, ConfigError};
use crate::engine::{status_of, Engine, EngineError, PersistRow, QueryEcho, SetKind};

pub const RUID_HEADER: &str = "x-ruid";
const BATCH_BODY_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryDefaults {
    pub max_results: usize,
    pub max_string_distance: f64,
}

impl Default for QueryDefaults {
    fn default() -> Self {
        Self { max_results: 1, max_string_distance: histgeo::geocoder::DEFAULT_MAX_STRING_DISTANCE }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<RwLock<Engine>>,
    pub defaults: QueryDefaults,
}

impl AppState {
    pub fn new(engine: Engine, defaults: QueryDefaults) -> Self {
        Self { engine: Arc::new(RwLock::new(engine)), defaults }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: message.into(), position: None } }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownResult(_) => StatusCode::NOT_FOUND,
            EngineError::RuidMismatch { .. } => StatusCode::FORBIDDEN,
            EngineError::NoResultToEdit(_) => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::EmptyEdit | EngineError::Registry(_) | EngineError::Geocode(_) | EngineError::Ingest(_) => {
                StatusCode::BAD_REQUEST
            }
            EngineError::Poisoned(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

type Params = HashMap<String, String>;

fn param<'a>(p: &'a Params, key: &str) -> Option<&'a str> {
    p.get(key).map(String::as_str).filter(|v| !v.trim().is_empty())
}

/// Geocoding parameters shared by `/geocoding` and `/batch`.
pub struct QueryParams {
    pub template: GeocodeQuery,
    pub date: Option<String>,
    pub persist: bool,
}

pub fn parse_query_params(p: &Params, defaults: QueryDefaults, address: &str) -> Result<QueryParams, ApiError> {
    let mut q = GeocodeQuery::new(address)
        .with_max_results(defaults.max_results)
        .with_max_string_distance(defaults.max_string_distance);
    let date = param(p, "date").map(str::to_string);
    if let Some(d) = &date {
        q.period = Some(parse_fuzzy_date(d).map_err(|e| ApiError::bad(format!("date: {e}")))?);
    }
    if let Some(v) = param(p, "precision") {
        q.allow_rough_fallback = !parse_bool(v).map_err(|e| ApiError::bad(format!("precision: {e}")))?;
    }
    if let Some(v) = param(p, "maxresults") {
        q.max_results = v
            .trim()
            .parse()
            .ok()
            .filter(|k| *k >= 1)
            .ok_or_else(|| ApiError::bad(format!("maxresults: expected a positive integer, got {v:?}")))?;
    }
    if let Some(v) = param(p, "maxdist") {
        q.max_string_distance = v
            .trim()
            .parse()
            .ok()
            .filter(|t: &f64| (0.0..=1.0).contains(t))
            .ok_or_else(|| ApiError::bad(format!("maxdist: expected a number in [0, 1], got {v:?}")))?;
    }
    if let Some(v) = p.get("scoring").filter(|v| !v.trim().is_empty()) {
        let expr: ScoringExpression = v.parse().map_err(|e: histgeo::scoring::ExpressionError| ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody { error: format!("scoring: {e}"), position: e.position() },
        })?;
        q.scoring = Some(expr);
    }
    let persist = match param(p, "persist") {
        Some(v) => parse_bool(v).map_err(|e| ApiError::bad(format!("persist: {e}")))?,
        None => false,
    };
    Ok(QueryParams { template: q, date, persist })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(internal)?
}

async fn geocoding(State(st): State<AppState>, Query(p): Query<Params>) -> Result<Json<GeocodeResponse>, ApiError> {
    let address = param(&p, "address").ok_or_else(|| ApiError::bad("address is required"))?.to_string();
    let QueryParams { template: q, date, persist } = parse_query_params(&p, st.defaults, &address)?;
    blocking(move || {
        let results = st.engine.read().map_err(internal)?.geocode(&q).map_err(EngineError::from)?;
        if !persist {
            let results = results.iter().map(|r| ApiResult::new(r, None)).collect();
            return Ok(Json(GeocodeResponse { ruid: None, results }));
        }
        let mut engine = st.engine.write().map_err(internal)?;
        let query = QueryEcho::new(&q, date.as_deref(), engine.config());
        let outcome = BatchRowResult { status: status_of(&results), results, error: None };
        let ruid = engine.persist(SetKind::Single, vec![PersistRow { query, outcome }])?;
        let set = engine.result_set(&ruid).expect("just persisted");
        let results = set
            .records
            .iter()
            .filter_map(|r| r.result.as_ref().map(|x| ApiResult::new(x, Some(r.id))))
            .collect();
        Ok(Json(GeocodeResponse { ruid: Some(ruid), results }))
    })
    .await
}

async fn batch(State(st): State<AppState>, Query(p): Query<Params>, body: Bytes) -> Result<Response, ApiError> {
    let delimiter = match param(&p, "delimiter") {
        None => b',',
        Some("tab") | Some("\\t") => b'\t',
        Some(d) if d.len() == 1 => d.as_bytes()[0],
        Some(d) => return Err(ApiError::bad(format!("delimiter must be one byte, got {d:?}"))),
    };
    let options = BatchCsvOptions {
        address_column: param(&p, "address_column").unwrap_or("address").to_string(),
        date_column: param(&p, "date_column").map(str::to_string),
        delimiter,
    };
    let QueryParams { template, .. } = parse_query_params(&p, st.defaults, "-")?;
    blocking(move || {
        let csv = parse_batch_csv(&body, &options).map_err(|e| ApiError::bad(e.to_string()))?;
        let readable: Vec<_> = csv.inputs.iter().filter_map(|i| i.as_ref().ok().cloned()).collect();
        let output = st.engine.read().map_err(internal)?.batch(&readable, &template);
        let outcomes = merge_outcomes(&csv.inputs, output.rows);
        let bytes = csv.write(&outcomes);
        let mut engine = st.engine.write().map_err(internal)?;
        let rows = csv
            .inputs
            .iter()
            .zip(outcomes)
            .map(|(input, outcome)| {
                let (address, date) = match input {
                    Ok(i) => (i.address.as_str(), i.date.as_deref()),
                    Err(_) => ("", None),
                };
                PersistRow { query: QueryEcho::new(&template.for_address(address), date, engine.config()), outcome }
            })
            .collect();
        let ruid = engine.persist(SetKind::Batch, rows)?;
        let mut response = (StatusCode::OK, [(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response();
        response.headers_mut().insert(RUID_HEADER, HeaderValue::from_str(&ruid).map_err(internal)?);
        Ok(response)
    })
    .await
}

async fn results(State(st): State<AppState>, Path(ruid): Path<String>) -> Result<Json<ResultSetResponse>, ApiError> {
    let engine = st.engine.read().map_err(internal)?;
    let set = engine
        .result_set(&ruid)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown ruid {ruid}")))?;
    Ok(Json(ResultSetResponse::new(set, engine.edits_for(&ruid))))
}

async fn edit(
    State(st): State<AppState>,
    Path((ruid, id)): Path<(String, String)>,
    body: Bytes,
) -> Result<(StatusCode, Json<EditResponse>), ApiError> {
    let result_id: u64 = id
        .parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("unknown result {id}")))?;
    let payload: serde_json::Value =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad(format!("edit payload: {e}")))?;
    blocking(move || {
        let mut engine = st.engine.write().map_err(internal)?;
        let req = parse_edit_payload(&payload, engine.registry().crs()).map_err(ApiError::bad)?;
        let object = engine.edit(&ruid, result_id, &req)?;
        Ok((StatusCode::CREATED, Json(EditResponse { ruid, result_id, object_id: object.0 })))
    })
    .await
}

async fn health(State(st): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let engine = st.engine.read().map_err(internal)?;
    Ok(Json(json!({
        "status": "ok",
        "objects": engine.registry().len(),
        "gazetteers": engine.registry().gazetteers().len(),
        "result_sets": engine.result_sets().len(),
        "edits": engine.edits().len(),
    })))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/geocoding", get(geocoding))
        .route("/batch", post(batch).layer(DefaultBodyLimit::max(BATCH_BODY_LIMIT)))
        .route("/results/{ruid}", get(results))
        .route("/results/{ruid}/{id}/edit", post(edit))
        .route("/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("abbreviations: {0}")]
    Abbreviations(String),
    #[error("bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Server(std::io::Error),
}

/// Installs the configured abbreviation table, if any.
pub fn install_abbreviations(config: &Config) -> Result<(), ServeError> {
    if let Some(path) = &config.abbreviations {
        let n = histgeo::text::Normalizer::load(path).map_err(|e| ServeError::Abbreviations(e.to_string()))?;
        histgeo::text::install_normalizer(n).map_err(|_| ServeError::Abbreviations("table already installed".into()))?;
    }
    Ok(())
}

/// Loads state from the data directory and serves until Ctrl-C, then
/// flushes the journal.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    install_abbreviations(&config)?;
    let (engine, report) = Engine::open(&config.data_dir, config.engine_options()?)?;
    if let Some(stop) = &report.stop {
        eprintln!("journal: recovered after {stop:?}");
    }
    eprintln!("loaded {} objects, {} journal entries", engine.registry().len(), report.applied);
    let defaults = QueryDefaults {
        max_results: config.geocoder.max_results,
        max_string_distance: config.geocoder.max_string_distance,
    };
    let state = AppState::new(engine, defaults);
    let app = router(state.clone(), config.static_dir.clone());
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|source| ServeError::Bind { addr: config.listen.clone(), source })?;
    eprintln!("listening on {}", config.listen);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Server)?;
    state.engine.write().unwrap_or_else(|e| e.into_inner()).flush()?;
    Ok(())
}

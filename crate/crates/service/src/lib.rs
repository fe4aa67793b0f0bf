//! HTTP facade over the pipeline, the conformance checker and the trial matcher.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{ConnectInfo, Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use onco_core::catalog::Catalog;
use onco_core::extraction::{BaselineExtractor, ClinicalVariables, ExtractError, Extractor, ExtractorDescriptor, RawNote};
use onco_core::fhir::Bundle;
use onco_core::matching::{external_match, facts_from_bundle, match_all, to_searchset, MatchError, MatcherClient};
use onco_core::pipeline::{self, PipelineError};
use onco_core::registry::{paginate, Phase, Recruitment, Registry, StudyType, TrialFilter};

pub const FHIR_JSON: &str = "application/fhir+json";
pub const OPENAPI: &str = include_str!("../openapi.json");
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_CORS_ORIGIN: &str = "http://localhost:5173";
pub const DEFAULT_EXTRACTOR_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{name}: {value:?} is not a valid value")]
    Invalid { name: &'static str, value: String },
    #[error("cannot load data directory: {0}")]
    Catalog(String),
    #[error("cannot load registry: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    pub registry_path: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub extractor_url: Option<String>,
    pub extractor_timeout: Duration,
    pub matcher_url: Option<String>,
    pub cors_allowed_origin: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            registry_path: None,
            data_dir: None,
            extractor_url: None,
            extractor_timeout: Duration::from_millis(DEFAULT_EXTRACTOR_TIMEOUT_MS),
            matcher_url: None,
            cors_allowed_origin: DEFAULT_CORS_ORIGIN.to_string(),
        }
    }
}

fn env_nonempty(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

impl ServiceConfig {
    /// Reads ONCO_* variables over the defaults.
    pub fn from_env() -> Result<ServiceConfig, ConfigError> {
        let mut c = ServiceConfig::default();
        if let Some(p) = env_nonempty("ONCO_PORT") {
            c.port = parse_port(&p)?;
        }
        if let Some(h) = env_nonempty("ONCO_HOST") {
            c.host = h.parse().map_err(|_| ConfigError::Invalid { name: "ONCO_HOST", value: h })?;
        }
        c.registry_path = env_nonempty("ONCO_REGISTRY").map(PathBuf::from);
        c.data_dir = env_nonempty("ONCO_DATA_DIR").map(PathBuf::from);
        c.extractor_url = env_nonempty("ONCO_EXTRACTOR_URL");
        c.matcher_url = env_nonempty("ONCO_MATCHER_URL");
        if let Some(ms) = env_nonempty("ONCO_EXTRACTOR_TIMEOUT_MS") {
            let ms: u64 = ms
                .parse()
                .map_err(|_| ConfigError::Invalid { name: "ONCO_EXTRACTOR_TIMEOUT_MS", value: ms })?;
            c.extractor_timeout = Duration::from_millis(ms);
        }
        if let Some(o) = env_nonempty("ONCO_CORS_ORIGIN") {
            c.cors_allowed_origin = o;
        }
        Ok(c)
    }
}

pub fn parse_port(s: &str) -> Result<u16, ConfigError> {
    match s.trim().parse::<u16>() {
        Ok(p) if p >= 1 => Ok(p),
        _ => Err(ConfigError::Invalid { name: "port", value: s.to_string() }),
    }
}

fn http_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into()
}

/// Remote extraction backend: note text in, ClinicalVariables JSON out.
pub struct HttpExtractor {
    pub url: String,
    agent: ureq::Agent,
}

impl HttpExtractor {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpExtractor { url: url.into(), agent: http_agent(timeout) }
    }
}

impl Extractor for HttpExtractor {
    fn descriptor(&self) -> ExtractorDescriptor {
        ExtractorDescriptor { name: format!("http:{}", self.url), version: "remote".into(), deterministic: false }
    }

    fn extract(&self, note: &RawNote) -> Result<ClinicalVariables, ExtractError> {
        let fail = |e: String| ExtractError::BackendFailure(e);
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "text/plain; charset=utf-8")
            .send(note.text.as_str())
            .map_err(|e| fail(e.to_string()))?;
        let body = resp.body_mut().read_to_string().map_err(|e| fail(e.to_string()))?;
        ClinicalVariables::from_json(&body).map_err(fail)
    }
}

/// External matcher over HTTP.
pub struct HttpMatcherClient {
    pub url: String,
    agent: ureq::Agent,
}

impl HttpMatcherClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpMatcherClient { url: url.into(), agent: http_agent(timeout) }
    }
}

impl MatcherClient for HttpMatcherClient {
    fn post_bundle(&self, body: &str) -> Result<String, MatchError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", FHIR_JSON)
            .send(body)
            .map_err(|e| MatchError::Transport(e.to_string()))?;
        resp.body_mut().read_to_string().map_err(|e| MatchError::Transport(e.to_string()))
    }
}

pub struct AppState {
    pub catalog: &'static Catalog,
    pub registry: RwLock<Arc<Registry>>,
    pub registry_path: PathBuf,
    pub extractor: Arc<dyn Extractor>,
    pub matcher: Option<Arc<dyn MatcherClient>>,
}

impl AppState {
    pub fn from_config(c: &ServiceConfig) -> Result<AppState, ConfigError> {
        let catalog: &'static Catalog = match &c.data_dir {
            Some(dir) => Box::leak(Box::new(
                Catalog::load(dir).map_err(|e| ConfigError::Catalog(e.to_string()))?,
            )),
            None => Catalog::try_global().map_err(|e| ConfigError::Catalog(e.to_string()))?,
        };
        let registry_path = c.registry_path.clone().unwrap_or_else(|| catalog.dir.join("trials.ndjson"));
        let registry = Registry::load(&registry_path).map_err(|e| ConfigError::Registry(e.to_string()))?;
        let extractor: Arc<dyn Extractor> = match &c.extractor_url {
            Some(url) => Arc::new(HttpExtractor::new(url, c.extractor_timeout)),
            None => Arc::new(BaselineExtractor::new(catalog)),
        };
        let matcher = c
            .matcher_url
            .as_ref()
            .map(|u| Arc::new(HttpMatcherClient::new(u, c.extractor_timeout)) as Arc<dyn MatcherClient>);
        Ok(AppState {
            catalog,
            registry: RwLock::new(Arc::new(registry)),
            registry_path,
            extractor,
            matcher,
        })
    }

    pub fn registry(&self) -> Arc<Registry> {
        self.registry.read().expect("registry lock").clone()
    }
}

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.into(), message: message.into(), path: None }
    }

    pub fn at(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match e.code() {
            "BackendFailure" => StatusCode::BAD_GATEWAY,
            "CorpusError" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let mut out = ApiError::new(status, e.code(), e.to_string());
        out.path = e.path().map(str::to_string);
        out
    }
}

fn fhir_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, FHIR_JSON)], body).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))
}

async fn convert(State(s): State<Arc<AppState>>, body: String) -> Result<Response, ApiError> {
    if body.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "EmptyNote", "request body is empty"));
    }
    let out = blocking(move || pipeline::convert_text(s.catalog, s.extractor.as_ref(), &body)).await??;
    Ok(fhir_response(out))
}

async fn mcode(State(s): State<Arc<AppState>>, body: String) -> Result<Response, ApiError> {
    Ok(fhir_response(pipeline::mcode_text(s.catalog, &body)?))
}

async fn validate(State(s): State<Arc<AppState>>, body: String) -> Result<Response, ApiError> {
    let report = pipeline::validate(s.catalog, &body)?;
    Ok(Json(report).into_response())
}

async fn metrics(State(s): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let report = blocking(move || {
        pipeline::score_corpus(s.catalog, s.extractor.as_ref(), &pipeline::default_corpus_dir(s.catalog))
    })
    .await??;
    Ok(Json(report.to_value()).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ListQuery {
    pub page: Option<String>,
    pub page_size: Option<String>,
    pub recruitment: Option<String>,
    pub phase: Option<String>,
    pub study_type: Option<String>,
    pub condition: Option<String>,
    /// Re-includes NoMatch trials after the matches.
    pub diagnostics: Option<String>,
    /// "local" (default) or "external".
    pub engine: Option<String>,
}

fn bad_filter(name: &str, value: &str) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "InvalidFilter", format!("{value:?} is not a valid {name}"))
        .at(format!("query.{name}"))
}

fn parse_opt<T>(name: &str, raw: &Option<String>, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>, ApiError> {
    match raw.as_deref().filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => parse(v).map(Some).ok_or_else(|| bad_filter(name, v)),
    }
}

impl ListQuery {
    pub fn filter(&self) -> Result<TrialFilter, ApiError> {
        Ok(TrialFilter {
            recruitment: parse_opt("recruitment", &self.recruitment, Recruitment::parse)?,
            phase: parse_opt("phase", &self.phase, Phase::parse)?,
            study_type: parse_opt("studyType", &self.study_type, StudyType::parse)?,
            condition_term: self.condition.clone().filter(|c| !c.trim().is_empty()),
        })
    }

    pub fn paging(&self) -> Result<(usize, usize), ApiError> {
        let num = |name: &str, raw: &Option<String>, default: usize| {
            parse_opt(name, raw, |v| v.parse::<usize>().ok().filter(|n| *n >= 1)).map(|n| n.unwrap_or(default))
        };
        Ok((num("page", &self.page, 1)?, num("pageSize", &self.page_size, 10)?))
    }

    fn flag(raw: &Option<String>) -> bool {
        matches!(raw.as_deref(), Some("1" | "true" | "yes"))
    }
}

fn bad_query(e: axum::extract::rejection::QueryRejection) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "InvalidFilter", e.body_text()).at("query")
}

const RANGE_LABEL: HeaderName = HeaderName::from_static("x-range-label");
const TOTAL_COUNT: HeaderName = HeaderName::from_static("x-total-count");
const PAGE_COUNT: HeaderName = HeaderName::from_static("x-page-count");

fn page_headers(resp: &mut Response, label: &str, total: usize, pages: usize) {
    let h = resp.headers_mut();
    if let Ok(v) = HeaderValue::from_str(label) {
        h.insert(RANGE_LABEL, v);
    }
    h.insert(TOTAL_COUNT, HeaderValue::from(total));
    h.insert(PAGE_COUNT, HeaderValue::from(pages));
}

async fn match_trials(
    State(s): State<Arc<AppState>>,
    query: Result<Query<ListQuery>, axum::extract::rejection::QueryRejection>,
    body: String,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(bad_query)?;
    let filter = q.filter()?;
    let (page, size) = q.paging()?;
    let bundle = Bundle::parse(&body).map_err(|e| ApiError::from(PipelineError::from(e)))?;
    let reg = s.registry();
    let results = match q.engine.as_deref().unwrap_or("local") {
        "local" => {
            let facts = facts_from_bundle(s.catalog, &bundle)
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "NoPatient", e.to_string()).at("entry"))?;
            let set = match_all(&reg, &facts, &filter);
            let mut results = set.results;
            if ListQuery::flag(&q.diagnostics) {
                results.extend(set.no_match);
            }
            results
        }
        "external" => {
            let client = s.matcher.clone().ok_or_else(|| {
                ApiError::new(StatusCode::BAD_REQUEST, "NoExternalMatcher", "ONCO_MATCHER_URL is not configured")
                    .at("query.engine")
            })?;
            let results = blocking(move || external_match(client.as_ref(), &bundle)).await?;
            let results = results.map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "BackendFailure", e.to_string()))?;
            results
                .into_iter()
                .filter(|r| reg.get(&r.trial_id).is_some_and(|t| filter.accepts(t)))
                .collect()
        }
        other => return Err(bad_filter("engine", other)),
    };
    let b = to_searchset(&reg, &results, page, size)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidFilter", e.to_string()))?;
    let p = paginate(&results, page, size).expect("paging checked above");
    let mut resp = fhir_response(b.serialize());
    page_headers(&mut resp, &p.range_label, p.total, p.pages);
    Ok(resp)
}

async fn list_trials(
    State(s): State<Arc<AppState>>,
    query: Result<Query<ListQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(bad_query)?;
    let filter = q.filter()?;
    let (page, size) = q.paging()?;
    let reg = s.registry();
    let rows: Vec<_> = reg.filter(&filter).into_iter().cloned().collect();
    let p = paginate(&rows, page, size).expect("paging checked above");
    let (label, total, pages) = (p.range_label.clone(), p.total, p.pages);
    let mut resp = Json(p).into_response();
    page_headers(&mut resp, &label, total, pages);
    Ok(resp)
}

async fn trial_detail(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let reg = s.registry();
    match reg.get(&id) {
        Some(t) => Ok(Json(t).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("no trial {id}")).at("trialId")),
    }
}

/// Re-reads the registry file and swaps it in; loopback callers only.
async fn reload(
    State(s): State<Arc<AppState>>,
    peer: Result<ConnectInfo<SocketAddr>, axum::extract::rejection::ExtensionRejection>,
) -> Result<Response, ApiError> {
    if !peer.is_ok_and(|ConnectInfo(addr)| addr.ip().is_loopback()) {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "Forbidden", "reload is restricted to loopback clients"));
    }
    let path = s.registry_path.clone();
    let reg = blocking(move || Registry::load(&path)).await?;
    let reg = reg.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "RegistryError", e.to_string()))?;
    let n = reg.len();
    *s.registry.write().expect("registry lock") = Arc::new(reg);
    Ok(Json(json!({"trials": n})).into_response())
}

async fn openapi() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI).into_response()
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub fn router(state: Arc<AppState>, cors_origin: &str) -> Router {
    let mut app = Router::new()
        .route("/api/convert", post(convert))
        .route("/api/mcode", post(mcode))
        .route("/api/validate", post(validate))
        .route("/api/metrics", get(metrics))
        .route("/api/match", post(match_trials))
        .route("/api/trials", get(list_trials))
        .route("/api/trials/{id}", get(trial_detail))
        .route("/api/reload", post(reload))
        .route("/api/openapi.json", get(openapi))
        .fallback(not_found)
        .with_state(state);
    if let Ok(origin) = HeaderValue::from_str(cors_origin) {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE])
                .expose_headers([RANGE_LABEL, TOTAL_COUNT, PAGE_COUNT]),
        );
    }
    app
}

/// Binds and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = Arc::new(AppState::from_config(&config)?);
    let app = router(state, &config.cors_allowed_origin);
    let listener = tokio::net::TcpListener::bind(SocketAddr::new(config.host, config.port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

//! JSON-over-HTTP query API for a semantic space.
//!
//! Each request reads one immutable [`Snapshot`]. `POST /cliques` applies
//! the update to a private copy of the space and swaps it in when done, so
//! readers never observe a half-updated store. Only one update may be in
//! flight; a second one gets `409 Conflict`.
//!
//! Every response, errors included, carries the checksum of the snapshot
//! it was computed from, both in the body and in the `x-store-checksum`
//! header.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, MutexGuard};
use tower_http::cors::CorsLayer;

use semspace::noise::theoretical_pmf;
use semspace::query::{self, ClusterOptions};
use semspace::{Error, OverlapLaw, SemanticSpace, TermId};

pub const CHECKSUM_HEADER: &str = "x-store-checksum";
pub const DEFAULT_TERM_LIMIT: usize = 100;
pub const MAX_TERM_LIMIT: usize = 1000;
pub const DEFAULT_K: usize = 10;
pub const MAX_K: usize = 1000;
pub const MAX_PMF_M: usize = 2000;
pub const MAX_PMF_DIM: usize = 1_000_000;

/// An immutable view of the space plus derived lookup tables.
pub struct Snapshot {
    pub space: SemanticSpace,
    pub checksum: String,
    by_name: Vec<TermId>,
}

impl Snapshot {
    pub fn new(space: SemanticSpace) -> Self {
        let checksum = space.checksum();
        let terms = space.lexicon().terms();
        let mut by_name: Vec<TermId> = (0..terms.len() as TermId).collect();
        by_name.sort_by(|&a, &b| terms[a as usize].cmp(&terms[b as usize]));
        Snapshot { space, checksum, by_name }
    }

    /// Terms starting with `prefix` in lexicographic order.
    pub fn terms_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let terms = self.space.lexicon().terms();
        let start = self.by_name.partition_point(|&t| terms[t as usize].as_str() < prefix);
        self.by_name[start..]
            .iter()
            .map(move |&t| terms[t as usize].as_str())
            .take_while(move |t| t.starts_with(prefix))
    }
}

pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    store_path: Option<PathBuf>,
}

impl AppState {
    /// `store_path`, when set, receives the updated store after every
    /// successful `POST /cliques`.
    pub fn new(space: SemanticSpace, store_path: Option<PathBuf>) -> Self {
        AppState {
            current: RwLock::new(Arc::new(Snapshot::new(space))),
            writer: Mutex::new(()),
            store_path,
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Claims the single writer slot. While the guard lives, updates are
    /// rejected with 409.
    pub fn try_begin_update(&self) -> Option<MutexGuard<'_, ()>> {
        self.writer.try_lock().ok()
    }

    fn publish(&self, snapshot: Snapshot) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/info", get(info))
        .route("/terms", get(terms))
        .route("/neighbors", get(neighbors))
        .route("/clusters", get(clusters))
        .route("/similarity", get(similarity))
        .route("/noise/pmf", get(noise_pmf))
        .route("/cliques", post(add_clique))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    serve_on(tokio::net::TcpListener::bind(addr).await?, state).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    checksum: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>, checksum: &str) -> Self {
        ApiError { status, message: message.into(), checksum: checksum.to_string() }
    }

    fn from_core(err: Error, checksum: &str) -> Self {
        let status = match &err {
            Error::TermNotFound(_) | Error::UnknownTermId(_) | Error::UnknownCliqueId(_) => {
                StatusCode::NOT_FOUND
            }
            Error::DegenerateTerm(_) | Error::DependentSubtrahend(_) | Error::Domain(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Error::InvalidConfig(_) | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            Error::Version { .. } | Error::Corrupt(_) | Error::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        ApiError::new(status, err.to_string(), checksum)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "checksum": self.checksum });
        with_checksum(self.status, body, &self.checksum)
    }
}

fn with_checksum(status: StatusCode, body: Value, checksum: &str) -> Response {
    let mut resp = (status, Json(body)).into_response();
    if let Ok(v) = HeaderValue::from_str(checksum) {
        resp.headers_mut().insert(CHECKSUM_HEADER, v);
    }
    resp
}

/// Serializes `payload` and adds the checksum field.
fn respond<T: Serialize>(payload: &T, checksum: &str) -> Result<Response, ApiError> {
    let mut body = serde_json::to_value(payload)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), checksum))?;
    if let Value::Object(map) = &mut body {
        map.insert("checksum".into(), Value::String(checksum.to_string()));
    }
    Ok(with_checksum(StatusCode::OK, body, checksum))
}

fn params<T>(q: Result<Query<T>, QueryRejection>, checksum: &str) -> Result<T, ApiError> {
    q.map(|Query(p)| p)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text(), checksum))
}

/// `minus` is a comma-separated, ordered list.
fn split_minus(minus: &Option<String>) -> Vec<&str> {
    minus
        .as_deref()
        .map(|m| m.split(',').map(str::trim).filter(|t| !t.is_empty()).collect())
        .unwrap_or_default()
}

async fn not_found(State(state): State<Arc<AppState>>) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such endpoint", &state.snapshot().checksum)
}

async fn info(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let cfg = snap.space.config();
    let body = json!({
        "n_terms": snap.space.n_terms(),
        "n_cliques": snap.space.lexicon().n_cliques(),
        "dim": cfg.dim,
        "m": cfg.m,
        "global_seed": cfg.global_seed,
        "weighting": cfg.weighting,
        "degenerate_terms": snap.space.degenerate_terms().count(),
    });
    respond(&body, &snap.checksum)
}

#[derive(Deserialize)]
struct TermsParams {
    #[serde(default)]
    prefix: String,
    limit: Option<usize>,
}

async fn terms(
    State(state): State<Arc<AppState>>,
    q: Result<Query<TermsParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let p = params(q, &snap.checksum)?;
    let limit = p.limit.unwrap_or(DEFAULT_TERM_LIMIT);
    if limit == 0 || limit > MAX_TERM_LIMIT {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("limit must be in 1..={MAX_TERM_LIMIT}"),
            &snap.checksum,
        ));
    }
    let mut found: Vec<&str> = snap.terms_with_prefix(&p.prefix).take(limit + 1).collect();
    let truncated = found.len() > limit;
    found.truncate(limit);
    respond(&json!({ "prefix": p.prefix, "terms": found, "truncated": truncated }), &snap.checksum)
}

#[derive(Deserialize)]
struct NeighborsParams {
    term: String,
    k: Option<usize>,
    minus: Option<String>,
    #[serde(default)]
    renormalize: bool,
}

async fn neighbors(
    State(state): State<Arc<AppState>>,
    q: Result<Query<NeighborsParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let p = params(q, &snap.checksum)?;
    let k = p.k.unwrap_or(DEFAULT_K);
    if k == 0 || k > MAX_K {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("k must be in 1..={MAX_K}"),
            &snap.checksum,
        ));
    }
    let minus = split_minus(&p.minus);
    let list = query::neighbors(&snap.space, &p.term, k, &minus, p.renormalize)
        .map_err(|e| ApiError::from_core(e, &snap.checksum))?;
    respond(&list, &snap.checksum)
}

#[derive(Deserialize)]
struct ClustersParams {
    term: String,
    minus: Option<String>,
    merge_threshold: Option<f64>,
    members: Option<usize>,
}

async fn clusters(
    State(state): State<Arc<AppState>>,
    q: Result<Query<ClustersParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let p = params(q, &snap.checksum)?;
    let defaults = ClusterOptions::default();
    let options = ClusterOptions {
        merge_threshold: p.merge_threshold.unwrap_or(defaults.merge_threshold),
        members: p.members.unwrap_or(defaults.members).min(MAX_K),
    };
    let minus = split_minus(&p.minus);
    let set = query::clusters(&snap.space, &p.term, &minus, options)
        .map_err(|e| ApiError::from_core(e, &snap.checksum))?;
    respond(&set, &snap.checksum)
}

#[derive(Deserialize)]
struct SimilarityParams {
    a: String,
    b: String,
}

async fn similarity(
    State(state): State<Arc<AppState>>,
    q: Result<Query<SimilarityParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let p = params(q, &snap.checksum)?;
    let core = |e| ApiError::from_core(e, &snap.checksum);
    let sigma = query::similarity(&snap.space, &p.a, &p.b).map_err(core)?;
    let distance = query::distance(sigma).map_err(core)?;
    respond(&json!({ "a": p.a, "b": p.b, "similarity": sigma, "distance": distance }), &snap.checksum)
}

#[derive(Deserialize)]
struct PmfParams {
    d: usize,
    m: usize,
    law: Option<String>,
}

async fn noise_pmf(
    State(state): State<Arc<AppState>>,
    q: Result<Query<PmfParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let snap = state.snapshot();
    let p = params(q, &snap.checksum)?;
    let bad = |msg: String| ApiError::new(StatusCode::BAD_REQUEST, msg, &snap.checksum);
    if p.m > MAX_PMF_M || p.d > MAX_PMF_DIM {
        return Err(bad(format!("d must be at most {MAX_PMF_DIM} and m at most {MAX_PMF_M}")));
    }
    let law = match &p.law {
        Some(l) => l.parse::<OverlapLaw>().map_err(|e| bad(e.to_string()))?,
        None => OverlapLaw::Hypergeometric,
    };
    let pmf = theoretical_pmf(p.d, p.m, law).map_err(|e| bad(e.to_string()))?;
    let points: Vec<Value> = pmf
        .support()
        .map(|(x, prob)| json!({ "value": x, "probability": prob }))
        .collect();
    let body = json!({
        "dim": p.d,
        "m": p.m,
        "law": law,
        "mean": pmf.mean(),
        "std": pmf.std(),
        "pmf": points,
    });
    respond(&body, &snap.checksum)
}

#[derive(Deserialize)]
struct CliqueBody {
    terms: Vec<String>,
}

async fn add_clique(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CliqueBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let before = state.snapshot();
    let Json(body) =
        body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text(), &before.checksum))?;
    let Some(guard) = state.try_begin_update() else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "another update is in flight",
            &before.checksum,
        ));
    };
    // Re-read under the writer lock so the copy starts from the latest store.
    let base = state.snapshot();
    let store_path = state.store_path.clone();
    let previous = base.checksum.clone();
    let outcome = tokio::task::spawn_blocking(move || -> Result<(Snapshot, Value), ApiError> {
        let mut space = base.space.clone();
        let refs: Vec<&str> = body.terms.iter().map(String::as_str).collect();
        let report = space
            .add_clique(&refs)
            .map_err(|e| ApiError::from_core(e, &base.checksum))?;
        if let Some(path) = &store_path {
            persist(&space, path).map_err(|e| ApiError::from_core(e, &base.checksum))?;
        }
        let names = |ids: &[TermId]| -> Vec<String> {
            ids.iter().map(|&t| space.lexicon().terms()[t as usize].clone()).collect()
        };
        let summary = json!({
            "clique": report.clique,
            "new_terms": names(&report.new_terms),
            "touched_terms": names(&report.touched),
            "degenerate": names(&report.degenerate),
            "resalted": names(&report.resalted),
        });
        Ok((Snapshot::new(space), summary))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), &previous))??;

    let (snapshot, mut summary) = outcome;
    let checksum = snapshot.checksum.clone();
    summary["previous_checksum"] = Value::String(previous);
    state.publish(snapshot);
    drop(guard);
    respond(&summary, &checksum)
}

/// Writes next to the target and renames, so a crash never leaves a
/// truncated store behind.
fn persist(space: &SemanticSpace, path: &std::path::Path) -> semspace::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    space.save_to_path(&tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

//! Read-only HTTP service over a [`GridArtifact`].
//!
//! `GET /meta`, `GET /cell?l1=&l2=` and `GET /curve?l1=` return JSON. Request
//! values snap to the nearest grid point; values outside the grid range are
//! rejected with 400. An optional static directory is served for every
//! other path.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::grid::GridArtifact;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub status: u16,
    pub message: String,
}

impl ServiceError {
    fn bad_request(message: impl Into<String>) -> Self {
        ServiceError {
            status: 400,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResponse {
    pub variable_names: Vec<String>,
    pub condition_labels: Vec<String>,
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    pub n_cells: usize,
    pub config_hash: String,
    pub has_fdr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeView {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkView {
    pub condition: String,
    pub n_edges: usize,
    pub edges: Vec<EdgeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEdgeView {
    pub source: String,
    pub target: String,
    /// Condition whose network holds the edge.
    pub present_in: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceView {
    pub conditions: [String; 2],
    pub n_edges: usize,
    pub edges: Vec<DiffEdgeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResponse {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_discoveries: usize,
    pub fdr_hat: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
    pub networks: Vec<NetworkView>,
    pub differences: Vec<DifferenceView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub lambda2: f64,
    pub n_discoveries: usize,
    pub fdr_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResponse {
    pub lambda1: f64,
    pub rows: Vec<CurveRow>,
}

/// Index of the grid point nearest to the requested value.
fn snap(grid: &[f64], raw: Option<&String>, name: &str) -> Result<usize, ServiceError> {
    let raw = raw.ok_or_else(|| ServiceError::bad_request(format!("missing query parameter `{name}`")))?;
    let v: f64 = raw
        .trim()
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| ServiceError::bad_request(format!("`{name}` must be a number, got `{raw}`")))?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    if v < lo - slack || v > hi + slack {
        return Err(ServiceError::bad_request(format!("`{name}` = {v} is outside the grid [{lo}, {hi}]")));
    }
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if (g - v).abs() < (grid[best] - v).abs() {
            best = i;
        }
    }
    Ok(best)
}

/// Query logic, independent of the transport.
#[derive(Debug, Clone)]
pub struct GridService {
    artifact: GridArtifact,
}

impl GridService {
    pub fn new(artifact: GridArtifact) -> Result<Self> {
        artifact.validate()?;
        Ok(GridService { artifact })
    }

    pub fn artifact(&self) -> &GridArtifact {
        &self.artifact
    }

    pub fn meta(&self) -> MetaResponse {
        let a = &self.artifact;
        MetaResponse {
            variable_names: a.variable_names.clone(),
            condition_labels: a.condition_labels.clone(),
            lambda1_grid: a.lambda1_grid.clone(),
            lambda2_grid: a.lambda2_grid.clone(),
            n_cells: a.cells.len(),
            config_hash: a.config_hash.clone(),
            has_fdr: a.cells.iter().any(|c| c.fdr_hat.is_some()),
        }
    }

    pub fn cell(&self, query: &HashMap<String, String>) -> Result<CellResponse, ServiceError> {
        let a = &self.artifact;
        let i1 = snap(&a.lambda1_grid, query.get("l1"), "l1")?;
        let i2 = snap(&a.lambda2_grid, query.get("l2"), "l2")?;
        let cell = a.cell(i1, i2);
        let name = |i: usize| a.variable_names[i].clone();
        let networks = cell
            .networks
            .iter()
            .zip(&a.condition_labels)
            .map(|(edges, label)| NetworkView {
                condition: label.clone(),
                n_edges: edges.len(),
                edges: edges
                    .iter()
                    .map(|&[i, j]| EdgeView {
                        source: name(i),
                        target: name(j),
                    })
                    .collect(),
            })
            .collect();
        let differences = cell
            .differences
            .iter()
            .map(|d| {
                let [ca, cb] = d.conditions;
                DifferenceView {
                    conditions: [a.condition_labels[ca].clone(), a.condition_labels[cb].clone()],
                    n_edges: d.edges.len(),
                    edges: d
                        .edges
                        .iter()
                        .map(|e| {
                            let holder = if cell.networks[ca].binary_search(e).is_ok() { ca } else { cb };
                            DiffEdgeView {
                                source: name(e[0]),
                                target: name(e[1]),
                                present_in: a.condition_labels[holder].clone(),
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        Ok(CellResponse {
            lambda1: cell.lambda1,
            lambda2: cell.lambda2,
            n_discoveries: cell.n_discoveries,
            fdr_hat: cell.fdr_hat,
            converged: cell.converged,
            error: cell.error.clone(),
            networks,
            differences,
        })
    }

    pub fn curve(&self, query: &HashMap<String, String>) -> Result<CurveResponse, ServiceError> {
        let a = &self.artifact;
        let i1 = snap(&a.lambda1_grid, query.get("l1"), "l1")?;
        Ok(CurveResponse {
            lambda1: a.lambda1_grid[i1],
            rows: (0..a.lambda2_grid.len())
                .map(|i2| {
                    let c = a.cell(i1, i2);
                    CurveRow {
                        lambda2: c.lambda2,
                        n_discoveries: c.n_discoveries,
                        fdr_hat: c.fdr_hat,
                    }
                })
                .collect(),
        })
    }
}

struct AppState {
    service: GridService,
    static_dir: Option<PathBuf>,
}

fn error_response(status: u16, message: &str) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(serde_json::json!({ "error": message }))).into_response()
}

fn respond<T: Serialize>(r: Result<T, ServiceError>) -> Response {
    match r {
        Ok(body) => Json(body).into_response(),
        Err(e) => error_response(e.status, &e.message),
    }
}

async fn meta(State(s): State<Arc<AppState>>) -> Response {
    Json(s.service.meta()).into_response()
}

async fn cell(State(s): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    respond(s.service.cell(&q))
}

async fn curve(State(s): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    respond(s.service.curve(&q))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

/// Resolves a request path inside `root`, refusing anything that could
/// leave it.
fn static_path(root: &Path, uri_path: &str) -> Option<PathBuf> {
    let rel = uri_path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = root.join(rel);
    full.is_file().then_some(full)
}

async fn fallback(State(s): State<Arc<AppState>>, uri: Uri) -> Response {
    if let Some(path) = s.static_dir.as_deref().and_then(|root| static_path(root, uri.path())) {
        if let Ok(bytes) = std::fs::read(&path) {
            return ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response();
        }
    }
    error_response(404, &format!("no route for {}", uri.path()))
}

pub fn router(service: GridService, static_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/meta", get(meta))
        .route("/cell", get(cell))
        .route("/curve", get(curve))
        .fallback(fallback)
        .with_state(Arc::new(AppState { service, static_dir }))
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    service: GridService,
    static_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let addr = listener.local_addr().ok();
    axum::serve(listener, router(service, static_dir))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| Error::io(addr.map(|a| a.to_string()).unwrap_or_default(), e))
}

/// Binds `bind_address` and serves until interrupted.
pub fn serve_grid(artifact: GridArtifact, bind_address: &str, static_dir: Option<PathBuf>) -> Result<()> {
    let service = GridService::new(artifact)?;
    let addr: SocketAddr = bind_address
        .parse()
        .map_err(|e| Error::Config(format!("bind address `{bind_address}`: {e}")))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io(bind_address, e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(bind_address, e))?;
        log::info!("serving grid on http://{}", listener.local_addr().map_err(|e| Error::io(bind_address, e))?);
        serve_on(listener, service, static_dir, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}

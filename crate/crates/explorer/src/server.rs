use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use urbanfuse_core::dataset::NodeId;
use urbanfuse_core::pipeline::Session;
use urbanfuse_core::Error;

use crate::api::{Explorer, SelectionRequest};

/// Error payload; carries the session hash like every other response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub config_hash: String,
}

type Shared = Arc<Explorer>;

fn failure(state: &Explorer, err: Error) -> Response {
    let status = match err {
        Error::UnknownNode(_) => StatusCode::NOT_FOUND,
        _ => StatusCode::BAD_REQUEST,
    };
    let body = ErrorBody {
        error: err.to_string(),
        config_hash: state.config_hash().to_string(),
    };
    (status, Json(body)).into_response()
}

async fn meta(State(s): State<Shared>) -> Response {
    Json(s.meta()).into_response()
}

async fn projections(State(s): State<Shared>) -> Response {
    Json(s.projections()).into_response()
}

async fn map(State(s): State<Shared>) -> Response {
    Json(s.map()).into_response()
}

async fn stats(State(s): State<Shared>, Json(req): Json<SelectionRequest>) -> Response {
    match s.linked_stats(&req) {
        Ok(v) => Json(v).into_response(),
        Err(e) => failure(&s, e),
    }
}

async fn node(State(s): State<Shared>, UrlPath(id): UrlPath<NodeId>) -> Response {
    match s.feature_values(id) {
        Ok(v) => Json(v).into_response(),
        Err(e) => failure(&s, e),
    }
}

pub fn router(explorer: Explorer) -> Router {
    Router::new()
        .route("/session/meta", get(meta))
        .route("/projections", get(projections))
        .route("/map", get(map))
        .route("/stats", post(stats))
        .route("/node/{id}", get(node))
        .layer(CorsLayer::permissive())
        .with_state(Arc::new(explorer))
}

/// Loads the session at `session_dir` and serves it until the task is dropped.
pub async fn serve(session_dir: &Path, addr: SocketAddr) -> urbanfuse_core::Result<()> {
    let explorer = Explorer::new(Session::load(session_dir)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(session_dir, e))?;
    log::info!("serving {} on {}", session_dir.display(), addr);
    axum::serve(listener, router(explorer))
        .await
        .map_err(|e| Error::io(session_dir, e))
}

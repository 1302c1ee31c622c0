//! axum routes over [`predtext::service`].

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use predtext::service::{parse_body, ModelRegistry, ServiceError};

use crate::RunConfig;

type Shared = Arc<ModelRegistry>;

struct ApiError(ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0.body())).into_response()
    }
}

/// Parses the body, runs `handler` and serializes its result. Handlers are
/// CPU-bound but short, so they run inline.
fn respond<Req, Resp>(body: &[u8], handler: impl FnOnce(&Req) -> Result<Resp, ServiceError>) -> Response
where
    Req: DeserializeOwned,
    Resp: Serialize,
{
    match parse_body::<Req>(body).and_then(|req| handler(&req)) {
        Ok(resp) => Json(resp).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn predict(State(models): State<Shared>, body: Bytes) -> Response {
    respond(&body, |req| models.predict(req))
}

async fn complete(State(models): State<Shared>, body: Bytes) -> Response {
    respond(&body, |req| models.complete(req))
}

async fn substitution(State(models): State<Shared>, body: Bytes) -> Response {
    respond(&body, |req| models.substitution(req))
}

async fn list_models(State(models): State<Shared>) -> Response {
    Json(models.models()).into_response()
}

pub fn router(models: ModelRegistry) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/complete", post(complete))
        .route("/v1/substitution", post(substitution))
        .route("/v1/models", get(list_models))
        .with_state(Arc::new(models))
}

pub fn serve(config: &RunConfig, models_dir: &Path) -> Result<()> {
    let models =
        ModelRegistry::load_dir(models_dir).with_context(|| format!("loading models from {}", models_dir.display()))?;
    let addr: SocketAddr =
        config.listen.parse().with_context(|| format!("invalid listen address {:?}", config.listen))?;
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        log::info!("serving {} models on http://{}", models.len(), listener.local_addr()?);
        axum::serve(listener, router(models)).await?;
        Ok(())
    })
}

//! JSON/HTTP front end: `POST /<endpoint>` with one JSON object per request.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::api::{endpoint, NotaryError};
use crate::service::Notary;

fn status_of(e: &NotaryError) -> StatusCode {
    match e {
        NotaryError::UnknownDevice(_) | NotaryError::UnknownEpoch(_) | NotaryError::UnknownLog(_) => {
            StatusCode::NOT_FOUND
        }
        NotaryError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        NotaryError::MalformedBatch(_) | NotaryError::WrongLength { .. } => StatusCode::BAD_REQUEST,
        NotaryError::TreePruned(_) | NotaryError::ParityPruned(_) => StatusCode::GONE,
        _ => StatusCode::CONFLICT,
    }
}

fn respond<T: Serialize>(r: Result<T, NotaryError>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => (status_of(&e), Json(e)).into_response(),
    }
}

async fn run<Req, Resp, F>(notary: Arc<Notary>, req: Req, f: F) -> Response
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
    F: FnOnce(&Notary, &Req) -> Result<Resp, NotaryError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&notary, &req)).await {
        Ok(r) => respond(r),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

macro_rules! handler {
    ($method:ident) => {
        |State(n): State<Arc<Notary>>, Json(req)| run(n, req, |n, r| n.$method(r))
    };
}

pub fn router(notary: Arc<Notary>) -> Router {
    Router::new()
        .route(&format!("/{}", endpoint::SUBMIT_BATCH), post(handler!(submit_batch)))
        .route(&format!("/{}", endpoint::START_EPOCH), post(handler!(start_epoch)))
        .route(&format!("/{}", endpoint::GET_RECEIPT), post(handler!(get_receipt)))
        .route(&format!("/{}", endpoint::GET_UPDATE), post(handler!(get_update)))
        .route(&format!("/{}", endpoint::GET_ROOT), post(handler!(get_root)))
        .route(&format!("/{}", endpoint::AUDIT), post(handler!(audit)))
        .route(
            &format!("/{}", endpoint::GET_INCONSISTENCIES),
            post(handler!(get_inconsistencies)),
        )
        .route(
            &format!("/{}", endpoint::GET_PARAMS),
            post(|State(n): State<Arc<Notary>>| async move { Json(*n.params()) }),
        )
        .with_state(notary)
}

/// Runs finalization and retention once per `period` until the task is dropped.
pub async fn tick_loop(notary: Arc<Notary>, period: Duration) {
    let mut interval = tokio::time::interval(period);
    loop {
        interval.tick().await;
        let n = notary.clone();
        let _ = tokio::task::spawn_blocking(move || n.tick()).await;
    }
}

/// Serves on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    notary: Arc<Notary>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let ticker = tokio::spawn(tick_loop(notary.clone(), Duration::from_secs(1)));
    let result = axum::serve(listener, router(notary))
        .with_graceful_shutdown(shutdown)
        .await;
    ticker.abort();
    result
}

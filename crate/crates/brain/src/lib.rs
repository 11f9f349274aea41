//! HTTP front end for the brain: `POST /query[?algo=cnn|rnn|knn|fuzzy]`
//! and `GET /health`, plus a blocking client that plugs into the simulator.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kasper_core::brain::{Brain, BrainError, QueryRequest, QueryResponse};
use kasper_core::intent::{Algorithm, IntentError};
use kasper_core::sim::BrainClient;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:7431";

/// The currently served brain. Swapping is atomic: a request holds its own
/// `Arc` for its whole lifetime, so a reload never disturbs it.
#[derive(Debug, Clone, Default)]
pub struct BrainHandle {
    slot: Arc<RwLock<Option<Arc<Brain>>>>,
}

impl BrainHandle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn loaded(brain: Brain) -> Self {
        let handle = Self::new();
        handle.load(brain);
        handle
    }

    pub fn load(&self, brain: Brain) {
        *self.slot.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(brain));
    }

    pub fn current(&self) -> Option<Arc<Brain>> {
        self.slot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Deserialize)]
struct AlgoParam {
    algo: Option<String>,
}

async fn health(State(handle): State<BrainHandle>) -> Response {
    match handle.current() {
        Some(_) => Json(json!({ "status": "ok" })).into_response(),
        None => error(StatusCode::SERVICE_UNAVAILABLE, "no checkpoint loaded"),
    }
}

async fn query(
    State(handle): State<BrainHandle>,
    Query(params): Query<AlgoParam>,
    body: Bytes,
) -> Response {
    let Some(brain) = handle.current() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no checkpoint loaded");
    };
    let algorithm = match params
        .algo
        .as_deref()
        .map(str::parse::<Algorithm>)
        .transpose()
    {
        Ok(a) => a,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let request: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    match brain.handle_query(&request, algorithm) {
        Ok(response) => Json(response).into_response(),
        Err(
            e @ (BrainError::EmptyText | BrainError::Intent(IntentError::AlgorithmUnavailable(_))),
        ) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => {
            log::error!("query failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

pub fn router(handle: BrainHandle) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/query", post(query))
        .with_state(handle)
}

pub async fn serve(listener: tokio::net::TcpListener, handle: BrainHandle) -> std::io::Result<()> {
    axum::serve(listener, router(handle)).await
}

/// A server running on its own runtime thread; dropping it shuts it down.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    pub fn start(bind: &str, handle: BrainHandle) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_io()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(bind))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                axum::serve(listener, router(handle))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("bad response body: {0}")]
    Body(#[from] serde_json::Error),
}

/// Blocking client for a running brain service.
#[derive(Debug, Clone)]
pub struct HttpBrain {
    base_url: String,
    algorithm: Option<Algorithm>,
    client: reqwest::blocking::Client,
}

impl HttpBrain {
    pub fn new(
        base_url: impl Into<String>,
        algorithm: Option<Algorithm>,
    ) -> Result<Self, ClientError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            algorithm,
            client,
        })
    }

    fn read(response: reqwest::blocking::Response) -> Result<(u16, Bytes), ClientError> {
        let status = response.status().as_u16();
        Ok((status, response.bytes()?))
    }

    fn fail(status: u16, body: &[u8]) -> ClientError {
        let message = serde_json::from_slice::<serde_json::Value>(body)
            .ok()
            .and_then(|v| v.get("error").and_then(|e| e.as_str()).map(str::to_owned))
            .unwrap_or_else(|| String::from_utf8_lossy(body).into_owned());
        ClientError::Status { status, message }
    }

    pub fn health(&self) -> Result<(), ClientError> {
        let (status, body) = Self::read(
            self.client
                .get(format!("{}/health", self.base_url))
                .send()?,
        )?;
        if status == 200 {
            Ok(())
        } else {
            Err(Self::fail(status, &body))
        }
    }

    pub fn query_with(
        &self,
        text: &str,
        algorithm: Option<Algorithm>,
    ) -> Result<QueryResponse, ClientError> {
        let mut url = format!("{}/query", self.base_url);
        if let Some(a) = algorithm.or(self.algorithm) {
            url.push_str("?algo=");
            url.push_str(a.name());
        }
        let body = serde_json::to_vec(&QueryRequest {
            text: text.to_owned(),
        })?;
        let (status, bytes) = Self::read(
            self.client
                .post(url)
                .header("content-type", "application/json")
                .body(body)
                .send()?,
        )?;
        if status != 200 {
            return Err(Self::fail(status, &bytes));
        }
        Ok(serde_json::from_slice(&bytes)?)
    }
}

impl BrainClient for HttpBrain {
    fn query(&self, text: &str) -> Result<QueryResponse, String> {
        self.query_with(text, None).map_err(|e| e.to_string())
    }
}

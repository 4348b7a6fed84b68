//! Protocol-v1 server backed by the closed-form [`MockBackend`].

use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use conner_core::{Backend, Endpoint, Error, MockBackend, Passage};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use tokio::sync::oneshot;

use crate::protocol::*;

/// Reads a JSON-lines corpus of `{"source_id", "text"}` records.
pub fn load_corpus(path: &Path) -> Result<Vec<Passage>, String> {
    let raw = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut seen = std::collections::HashSet::new();
    let mut corpus = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Passage = serde_json::from_str(line)
            .map_err(|e| format!("{} line {}: {e}", path.display(), n + 1))?;
        if p.text.trim().is_empty() {
            return Err(format!("{} line {}: empty passage text", path.display(), n + 1));
        }
        if !seen.insert(p.source_id.clone()) {
            return Err(format!("{} line {}: duplicate source_id {}", path.display(), n + 1, p.source_id));
        }
        corpus.push(p);
    }
    Ok(corpus)
}

type Shared = Arc<MockBackend>;

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

fn core_error(e: Error) -> Response {
    match e {
        Error::InvalidArgument(m) => error(StatusCode::BAD_REQUEST, m),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    }
}

fn check_proto(headers: &HeaderMap) -> Result<(), Response> {
    match headers.get(PROTO_HEADER) {
        Some(v) if v.to_str().ok() != Some("1") => Err(error(
            StatusCode::BAD_REQUEST,
            format!("unsupported protocol version {v:?}"),
        )),
        _ => Ok(()),
    }
}

fn decode<T: DeserializeOwned>(v: Value) -> Result<T, Error> {
    serde_json::from_value(v).map_err(|e| Error::invalid(format!("malformed request: {e}")))
}

fn encode<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("protocol types serialize")
}

/// Answers one request body for `endpoint`.
pub fn dispatch<B: Backend + ?Sized>(backend: &B, endpoint: Endpoint, body: Value) -> Result<Value, Error> {
    Ok(match endpoint {
        Endpoint::Nli => {
            let r: NliRequest = decode(body)?;
            encode(NliResponse::from(backend.nli(&r.premise, &r.hypothesis)?))
        }
        Endpoint::Rank => {
            let r: RankRequest = decode(body)?;
            encode(RankResponse {
                score: backend.rank(&r.query, &r.passage)?,
            })
        }
        Endpoint::Logprob => {
            let r: LogprobRequest = decode(body)?;
            encode(LogprobResponse::from(backend.token_logprobs(&r.context, &r.continuation)?))
        }
        Endpoint::Retrieve => {
            let r: RetrieveRequest = decode(body)?;
            encode(RetrieveResponse::from(backend.retrieve(&r.query, r.l)?))
        }
        Endpoint::Discourse => {
            let r: DiscourseRequest = decode(body)?;
            encode(DiscourseResponse {
                raw: backend.discourse_raw(&r.sentences)?,
            })
        }
    })
}

fn parse_body(body: &Bytes) -> Result<Value, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}")))
}

async fn single(
    State(backend): State<Shared>,
    UrlPath(name): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if let Err(r) = check_proto(&headers) {
        return r;
    }
    let Some(endpoint) = Endpoint::parse(&name) else {
        return error(StatusCode::NOT_FOUND, format!("unknown endpoint {name}"));
    };
    let body = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match dispatch(backend.as_ref(), endpoint, body) {
        Ok(v) => Json(v).into_response(),
        Err(e) => core_error(e),
    }
}

async fn batch(
    State(backend): State<Shared>,
    UrlPath(name): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if let Err(r) = check_proto(&headers) {
        return r;
    }
    let Some(endpoint) = Endpoint::parse(&name) else {
        return error(StatusCode::NOT_FOUND, format!("unknown endpoint {name}"));
    };
    let req: BatchRequest<Value> = match parse_body(&body).and_then(|v| {
        serde_json::from_value(v).map_err(|e| error(StatusCode::BAD_REQUEST, e.to_string()))
    }) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let responses: Result<Vec<Value>, Error> = req
        .requests
        .into_iter()
        .map(|r| dispatch(backend.as_ref(), endpoint, r))
        .collect();
    match responses {
        Ok(responses) => Json(BatchResponse { responses }).into_response(),
        Err(e) => core_error(e),
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        backend_id: MockBackend::BACKEND_ID.to_string(),
        proto: PROTO_VERSION,
        endpoints: Endpoint::ALL.iter().map(|e| e.as_str().to_string()).collect(),
    })
}

pub fn router(backend: MockBackend) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/batch/{endpoint}", post(batch))
        .route("/v1/{endpoint}", post(single))
        .with_state(Arc::new(backend))
}

/// A mock server running on a background thread; stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(backend: MockBackend, addr: SocketAddr) -> io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = router(backend);
        let thread = thread::Builder::new().name("mock-server".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        })?;
        Ok(MockServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Runs in the foreground until interrupted. Prints the bound address first.
pub fn serve_forever(backend: MockBackend, addr: SocketAddr) -> io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        use std::io::Write;
        io::stdout().flush()?;
        axum::serve(listener, router(backend))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}

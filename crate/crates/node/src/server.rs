//! HTTP/1.1 server exposing a node's registry to light clients and remote
//! operators. Read endpoints take a shared lock and never mutate state;
//! `POST /operations` serializes through the writer.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/did/{id}[?at=t]` | resolution |
//! | GET | `/bundle/{id}` | verification bundle |
//! | GET | `/aliases/{id}` | DIDs listing `id` under `alsoKnownAs` |
//! | GET | `/chain/{id}` | every candidate chain |
//! | GET | `/headers?from=h` | concatenated 80-byte headers |
//! | GET | `/root/candidates?date=d` | root candidates on that date |
//! | POST | `/operations` | `{operations, timestamp?}`, answered with the anchoring point |
//!
//! JSON bodies are canonical text. Errors are `{code, step?, message}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use trustchain_core::anchor::Ledger;
use trustchain_core::attestation::build_chains;
use trustchain_core::canonical::to_canonical;
use trustchain_core::didcore::DidOperation;
use trustchain_core::hash::Hash256;
use trustchain_core::roottrust::scan_date_window;
use trustchain_core::Did;

use crate::error::WireError;
use crate::next_block_time;

pub type SharedLedger = Arc<RwLock<Ledger>>;

/// Body of `POST /operations`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationBatch {
    pub operations: Vec<DidOperation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u32>,
}

/// Answer to `POST /operations`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnchoredBatch {
    pub txid: Hash256,
    pub height: u64,
    pub dids: Vec<Did>,
}

pub struct ApiError(StatusCode, WireError);

impl From<WireError> for ApiError {
    fn from(e: WireError) -> Self {
        let status = match e.code.as_str() {
            "not-found" => StatusCode::NOT_FOUND,
            "bad-request" | "invalid-operation" | "conflicting-operations" | "empty-batch" => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, [(header::CONTENT_TYPE, "application/json")], self.1.to_json()).into_response()
    }
}

fn bad_request(message: impl ToString) -> ApiError {
    WireError::new("bad-request", message).into()
}

fn canonical<T: Serialize>(value: &T) -> Response {
    let body = to_canonical(value).expect("response types are canonicalizable");
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse_did(id: &str) -> Result<Did, ApiError> {
    id.parse().map_err(bad_request)
}

pub fn router(ledger: SharedLedger) -> Router {
    Router::new()
        .route("/did/:id", get(resolve))
        .route("/bundle/:id", get(bundle))
        .route("/aliases/:id", get(aliases))
        .route("/chain/:id", get(chain))
        .route("/headers", get(headers))
        .route("/root/candidates", get(candidates))
        .route("/operations", post(operations))
        .with_state(ledger)
}

type Params = Query<HashMap<String, String>>;

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    q.get(name).map(|v| v.parse::<T>().map_err(|e| bad_request(format!("{name}: {e}")))).transpose()
}

async fn resolve(State(ledger): State<SharedLedger>, Path(id): Path<String>, Query(q): Params) -> Result<Response, ApiError> {
    let did = parse_did(&id)?;
    let at = param::<u32>(&q, "at")?;
    let ledger = ledger.read().expect("lock");
    let resolution = match at {
        Some(t) => ledger.state().resolve_at(&did, t),
        None => ledger.resolve(&did),
    }
    .map_err(WireError::from)?;
    Ok(canonical(&resolution))
}

async fn bundle(State(ledger): State<SharedLedger>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let did = parse_did(&id)?;
    let ledger = ledger.read().expect("lock");
    Ok(canonical(&ledger.verification_data(&did).map_err(WireError::from)?))
}

async fn aliases(State(ledger): State<SharedLedger>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let did = parse_did(&id)?;
    let ledger = ledger.read().expect("lock");
    let aliases: Vec<Did> =
        ledger.state().aliases_of(&did).into_iter().filter(|a| ledger.resolve(a).is_ok_and(|r| r.is_active())).collect();
    Ok(canonical(&aliases))
}

async fn chain(State(ledger): State<SharedLedger>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let did = parse_did(&id)?;
    let ledger = ledger.read().expect("lock");
    match build_chains(&ledger.source(), &did) {
        Ok(chains) => Ok(canonical(&chains)),
        Err(e) => {
            let code = serde_json::to_value(&e).ok().and_then(|v| v["reason"].as_str().map(str::to_owned)).unwrap_or_default();
            Err(WireError::new(code, &e).into())
        }
    }
}

async fn headers(State(ledger): State<SharedLedger>, Query(q): Params) -> Result<Response, ApiError> {
    let from = param::<u64>(&q, "from")?.unwrap_or(0);
    let ledger = ledger.read().expect("lock");
    let bytes: Vec<u8> = ledger.registry().headers_from(from).iter().flat_map(|h| h.to_bytes()).collect();
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

async fn candidates(State(ledger): State<SharedLedger>, Query(q): Params) -> Result<Response, ApiError> {
    let date = param::<NaiveDate>(&q, "date")?.ok_or_else(|| bad_request("date is required"))?;
    let ledger = ledger.read().expect("lock");
    Ok(canonical(&scan_date_window(ledger.state(), date)))
}

async fn operations(State(ledger): State<SharedLedger>, body: Bytes) -> Result<Response, ApiError> {
    let batch: OperationBatch = serde_json::from_slice(&body).map_err(bad_request)?;
    let mut ledger = ledger.write().expect("lock");
    let timestamp = batch.timestamp.unwrap_or_else(|| next_block_time(&ledger));
    let anchored = ledger.anchor(batch.operations, timestamp).map_err(WireError::from)?;
    Ok(canonical(&AnchoredBatch { txid: anchored.txid, height: anchored.height, dids: anchored.dids }))
}

fn bind(addr: &str) -> Result<std::net::TcpListener, WireError> {
    std::net::TcpListener::bind(addr).map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => WireError::new("address-in-use", format!("{addr}: {e}")),
        _ => WireError::new("io", format!("{addr}: {e}")),
    })
}

/// Serves until the process exits, calling `ready` once bound.
pub fn serve(ledger: SharedLedger, addr: &str, ready: impl FnOnce(SocketAddr)) -> Result<(), WireError> {
    let listener = bind(addr)?;
    listener.set_nonblocking(true)?;
    ready(listener.local_addr()?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        axum::serve(listener, router(ledger)).await
    })?;
    Ok(())
}

/// Starts a server on a background thread and returns its address.
pub fn spawn(ledger: SharedLedger, addr: &str) -> Result<SocketAddr, WireError> {
    let listener = bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            axum::serve(listener, router(ledger)).await.expect("server")
        })
    });
    Ok(local)
}

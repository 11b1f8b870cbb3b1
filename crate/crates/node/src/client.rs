//! Blocking HTTP client for a remote node; what a light client talks to.

use std::time::Duration;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use trustchain_core::anchor::{Resolution, VerificationBundle};
use trustchain_core::didcore::DidOperation;
use trustchain_core::registry::block::HEADER_LEN;
use trustchain_core::registry::BlockHeader;
use trustchain_core::roottrust::RootCandidate;
use trustchain_core::source::{DidSource, NodeApi, SourceError};
use trustchain_core::Did;

use crate::error::WireError;
use crate::server::{AnchoredBatch, OperationBatch};

/// A remote node address with its reliability policy.
#[derive(Debug, Clone)]
pub struct HttpNode {
    base: String,
    retries: u32,
    client: reqwest::blocking::Client,
}

enum Failure {
    NotFound,
    Rejected(WireError),
    Unreachable(String),
}

impl HttpNode {
    pub fn new(base: &str) -> Result<Self, SourceError> {
        HttpNode::with_policy(base, Duration::from_secs(10), 2)
    }

    pub fn with_policy(base: &str, timeout: Duration, retries: u32) -> Result<Self, SourceError> {
        let client =
            reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| SourceError::Unreachable(e.to_string()))?;
        let base = if base.contains("://") { base.to_owned() } else { format!("http://{base}") };
        Ok(HttpNode { base: base.trim_end_matches('/').to_owned(), retries, client })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn send(&self, request: impl Fn() -> reqwest::blocking::RequestBuilder) -> Result<Vec<u8>, Failure> {
        let mut last = String::new();
        for _ in 0..=self.retries {
            match request().send() {
                Ok(resp) => {
                    let status = resp.status();
                    let body = resp.bytes().map_err(|e| Failure::Unreachable(e.to_string()))?.to_vec();
                    if status.is_success() {
                        return Ok(body);
                    }
                    if status == reqwest::StatusCode::NOT_FOUND {
                        return Err(Failure::NotFound);
                    }
                    let err = serde_json::from_slice(&body)
                        .unwrap_or_else(|_| WireError::new("http", format!("{status}: {}", String::from_utf8_lossy(&body))));
                    return Err(Failure::Rejected(err));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(Failure::Unreachable(last))
    }

    fn get(&self, path: &str, did: Option<&Did>) -> Result<Vec<u8>, SourceError> {
        let url = format!("{}{path}", self.base);
        self.send(|| self.client.get(&url)).map_err(|f| match f {
            Failure::NotFound => match did {
                Some(d) => SourceError::NotFound(d.clone()),
                None => SourceError::Malformed(format!("{path}: not found")),
            },
            Failure::Rejected(e) => SourceError::Malformed(e.to_string()),
            Failure::Unreachable(e) => SourceError::Unreachable(e),
        })
    }

    fn get_json<T: DeserializeOwned>(&self, path: &str, did: Option<&Did>) -> Result<T, SourceError> {
        let body = self.get(path, did)?;
        serde_json::from_slice(&body).map_err(|e| SourceError::Malformed(format!("{path}: {e}")))
    }

    /// Anchors `operations` on the remote node.
    pub fn post_operations(&self, operations: Vec<DidOperation>, timestamp: Option<u32>) -> Result<AnchoredBatch, WireError> {
        let body = serde_json::to_vec(&OperationBatch { operations, timestamp }).expect("operations serialize");
        let url = format!("{}/operations", self.base);
        let resp = self.send(|| self.client.post(&url).header("content-type", "application/json").body(body.clone()));
        match resp {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| WireError::new("malformed", e)),
            Err(Failure::Rejected(e)) => Err(e),
            Err(Failure::NotFound) => Err(WireError::new("not-found", "no operations endpoint")),
            Err(Failure::Unreachable(e)) => Err(WireError::new("server-unreachable", e)),
        }
    }
}

impl DidSource for HttpNode {
    fn resolve(&self, did: &Did) -> Result<Resolution, SourceError> {
        self.get_json(&format!("/did/{did}"), Some(did))
    }

    fn resolve_at(&self, did: &Did, time: u32) -> Result<Resolution, SourceError> {
        self.get_json(&format!("/did/{did}?at={time}"), Some(did))
    }

    fn bundle(&self, did: &Did) -> Result<VerificationBundle, SourceError> {
        self.get_json(&format!("/bundle/{did}"), Some(did))
    }

    fn root_candidates(&self, date: NaiveDate) -> Result<Vec<RootCandidate>, SourceError> {
        self.get_json(&format!("/root/candidates?date={date}"), None)
    }

    fn aliases(&self, did: &Did) -> Result<Vec<Did>, SourceError> {
        self.get_json(&format!("/aliases/{did}"), Some(did))
    }
}

impl NodeApi for HttpNode {
    fn headers(&self, from_height: u64) -> Result<Vec<BlockHeader>, SourceError> {
        let bytes = self.get(&format!("/headers?from={from_height}"), None)?;
        if bytes.len() % HEADER_LEN != 0 {
            return Err(SourceError::Malformed(format!("{} bytes is not a whole number of headers", bytes.len())));
        }
        bytes.chunks(HEADER_LEN).map(|c| BlockHeader::from_bytes(c).map_err(|e| SourceError::Malformed(e.to_string()))).collect()
    }
}

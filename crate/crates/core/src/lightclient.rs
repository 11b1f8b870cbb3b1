//! Simplified timestamp verification: a client that keeps only the 80-byte
//! header chain and checks everything else a server sends against it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchor::Resolution;
use crate::attestation::{
    build_chains, check_link_timestamp, verify_did, ChainFailure, TimestampScope, VerifiedDid,
};
use crate::didcore::{Did, DidStatus};
use crate::hash::Hash256;
use crate::registry::block::HEADER_LEN;
use crate::registry::{validate_extension, BlockHeader, TrustedHeaders};
use crate::roottrust::{RootParameters, TimestampFailure};
use crate::source::{NodeApi, SourceError};

#[derive(Debug, thiserror::Error)]
pub enum LightClientError {
    #[error("server unreachable: {0}")]
    ServerUnreachable(String),
    #[error("server sent invalid headers: {0}")]
    InvalidHeaders(String),
    #[error("header chain ends at {have:?}; height {needed} required")]
    HeaderGap { needed: u64, have: Option<u64> },
    #[error("only {responses} of the required {quorum} servers returned verifiable data")]
    QuorumUnreachable { responses: usize, quorum: usize },
    #[error(transparent)]
    Chain(#[from] ChainFailure),
    #[error("corrupt header file: {0}")]
    CorruptStore(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SourceError> for LightClientError {
    fn from(e: SourceError) -> Self {
        LightClientError::ServerUnreachable(e.to_string())
    }
}

/// A validated chain of block headers, stored as concatenated 80-byte records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeaderChain {
    headers: Vec<BlockHeader>,
    genesis: Option<Hash256>,
}

impl HeaderChain {
    /// An empty chain; with `genesis`, the first synced header must hash to it.
    pub fn new(genesis: Option<Hash256>) -> Self {
        HeaderChain {
            headers: Vec::new(),
            genesis,
        }
    }

    pub fn headers(&self) -> &[BlockHeader] {
        &self.headers
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }

    pub fn tip(&self) -> Option<&BlockHeader> {
        self.headers.last()
    }

    /// Appends `headers` after validating proof of work, links and timestamps.
    /// Nothing is appended if any header fails.
    pub fn extend(&mut self, headers: &[BlockHeader]) -> Result<usize, LightClientError> {
        if headers.is_empty() {
            return Ok(0);
        }
        if self.headers.is_empty() {
            if let Some(pin) = self.genesis {
                if headers[0].hash() != pin {
                    return Err(LightClientError::InvalidHeaders(
                        "genesis differs from the pinned hash".into(),
                    ));
                }
            }
        }
        if !validate_extension(self.tip(), headers) {
            return Err(LightClientError::InvalidHeaders(
                "proof of work, link or timestamp check failed".into(),
            ));
        }
        self.headers.extend_from_slice(headers);
        Ok(headers.len())
    }

    /// Fetches and appends every header above the local tip.
    pub fn sync(&mut self, server: &dyn NodeApi) -> Result<usize, LightClientError> {
        let fetched = server.headers(self.headers.len() as u64)?;
        self.extend(&fetched)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.headers.iter().flat_map(|h| h.to_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8], genesis: Option<Hash256>) -> Result<Self, LightClientError> {
        if !bytes.len().is_multiple_of(HEADER_LEN) {
            return Err(LightClientError::CorruptStore(format!(
                "{} bytes is not a whole number of headers",
                bytes.len()
            )));
        }
        let headers = bytes
            .chunks(HEADER_LEN)
            .map(BlockHeader::from_bytes)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| LightClientError::CorruptStore(e.to_string()))?;
        let mut chain = HeaderChain::new(genesis);
        chain
            .extend(&headers)
            .map_err(|e| LightClientError::CorruptStore(e.to_string()))?;
        Ok(chain)
    }

    pub fn save(&self, path: &Path) -> Result<(), LightClientError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, genesis: Option<Hash256>) -> Result<Self, LightClientError> {
        match std::fs::read(path) {
            Ok(bytes) => Self::from_bytes(&bytes, genesis),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HeaderChain::new(genesis)),
            Err(e) => Err(e.into()),
        }
    }
}

impl TrustedHeaders for HeaderChain {
    fn header_at(&self, height: u64) -> Option<BlockHeader> {
        self.headers.header_at(height)
    }

    fn tip_height(&self) -> Option<u64> {
        self.headers.tip_height()
    }
}

/// Verifies `did` and its chain from server-supplied data, checking every
/// link against the local header chain.
pub fn stv_verify(
    server: &dyn NodeApi,
    headers: &HeaderChain,
    did: &Did,
    params: &RootParameters,
) -> Result<VerifiedDid, LightClientError> {
    if let Ok(chains) = build_chains(server, did) {
        let mut needed = None;
        for link in chains.iter().flat_map(|c| c.links.iter()) {
            let height = server.bundle(&link.did)?.height;
            needed = needed.max(Some(height));
        }
        if let Some(needed) = needed {
            if headers.tip_height().is_none_or(|tip| needed > tip) {
                return Err(LightClientError::HeaderGap {
                    needed,
                    have: headers.tip_height(),
                });
            }
        }
    }
    Ok(verify_did(
        server,
        did,
        params,
        headers,
        TimestampScope::AllLinks,
    )?)
}

/// One server's answer after checking it against the header chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServerReport {
    pub server: usize,
    /// `None` when the server failed or sent data that did not verify.
    pub height: Option<u64>,
    pub status: Option<DidStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiResolution {
    pub resolution: Resolution,
    /// Verified servers disagreed on the latest operation.
    pub omission_suspected: bool,
    pub reports: Vec<ServerReport>,
}

fn verified_resolution(
    server: &dyn NodeApi,
    did: &Did,
    headers: &HeaderChain,
) -> Result<(Resolution, u64), String> {
    let resolution = server.resolve(did).map_err(|e| e.to_string())?;
    let bundle = server.bundle(did).map_err(|e| e.to_string())?;
    check_link_timestamp(server, &resolution, headers)
        .map_err(|e: TimestampFailure| e.to_string())?;
    Ok((resolution, bundle.height))
}

/// Asks every server for `did`, keeps the answers that verify against the
/// header chain, and returns the latest. A deactivation reported by any
/// verified server wins.
pub fn multi_server_resolve(
    servers: &[&dyn NodeApi],
    headers: &HeaderChain,
    did: &Did,
    quorum: usize,
) -> Result<MultiResolution, LightClientError> {
    let mut reports = Vec::with_capacity(servers.len());
    let mut best: Option<(bool, u64, Resolution)> = None;
    for (i, server) in servers.iter().enumerate() {
        match verified_resolution(*server, did, headers) {
            Ok((resolution, height)) => {
                reports.push(ServerReport {
                    server: i,
                    height: Some(height),
                    status: Some(resolution.status),
                    error: None,
                });
                let key = (resolution.status == DidStatus::Deactivated, height);
                if best.as_ref().is_none_or(|(d, h, _)| key > (*d, *h)) {
                    best = Some((key.0, key.1, resolution));
                }
            }
            Err(error) => reports.push(ServerReport {
                server: i,
                height: None,
                status: None,
                error: Some(error),
            }),
        }
    }
    let verified: Vec<&ServerReport> = reports.iter().filter(|r| r.height.is_some()).collect();
    if verified.len() < quorum.max(1) {
        return Err(LightClientError::QuorumUnreachable {
            responses: verified.len(),
            quorum,
        });
    }
    let omission_suspected = verified
        .windows(2)
        .any(|w| (w[0].height, w[0].status) != (w[1].height, w[1].status));
    let (_, _, resolution) = best.expect("at least one verified report");
    Ok(MultiResolution {
        resolution,
        omission_suspected,
        reports,
    })
}

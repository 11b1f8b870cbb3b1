//! Where verifiers get DID data from: a local registry, or a remote node.
//!
//! Nothing returned by a source is trusted; verification re-derives every
//! claim from bundles checked against a header chain the verifier holds.

use chrono::NaiveDate;

use crate::anchor::{
    verification_data, AnchorError, RegistryState, Resolution, VerificationBundle,
};
use crate::didcore::Did;
use crate::registry::{BlockHeader, Registry};
use crate::roottrust::{scan_date_window, RootCandidate};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("{0} not found")]
    NotFound(Did),
    #[error("source unreachable: {0}")]
    Unreachable(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl From<AnchorError> for SourceError {
    fn from(e: AnchorError) -> Self {
        match e {
            AnchorError::NotFound(did) => SourceError::NotFound(did),
            other => SourceError::Malformed(other.to_string()),
        }
    }
}

pub trait DidSource {
    fn resolve(&self, did: &Did) -> Result<Resolution, SourceError>;
    /// Resolution as of block time `time`.
    fn resolve_at(&self, did: &Did, time: u32) -> Result<Resolution, SourceError>;
    /// Verification bundle for the latest operation on `did`.
    fn bundle(&self, did: &Did) -> Result<VerificationBundle, SourceError>;
    fn root_candidates(&self, date: NaiveDate) -> Result<Vec<RootCandidate>, SourceError>;
    /// Active DIDs that list `did` under `alsoKnownAs`.
    fn aliases(&self, did: &Did) -> Result<Vec<Did>, SourceError>;
}

/// A full node's API as seen by a light client.
pub trait NodeApi: DidSource {
    fn headers(&self, from_height: u64) -> Result<Vec<BlockHeader>, SourceError>;
}

/// Reads straight from a registry and its scanned state.
#[derive(Debug, Clone, Copy)]
pub struct LocalSource<'a> {
    pub registry: &'a Registry,
    pub state: &'a RegistryState,
}

impl<'a> LocalSource<'a> {
    pub fn new(registry: &'a Registry, state: &'a RegistryState) -> Self {
        LocalSource { registry, state }
    }
}

impl DidSource for LocalSource<'_> {
    fn resolve(&self, did: &Did) -> Result<Resolution, SourceError> {
        Ok(self.state.resolve(did)?)
    }

    fn resolve_at(&self, did: &Did, time: u32) -> Result<Resolution, SourceError> {
        Ok(self.state.resolve_at(did, time)?)
    }

    fn bundle(&self, did: &Did) -> Result<VerificationBundle, SourceError> {
        Ok(verification_data(self.registry, self.state, did)?)
    }

    fn root_candidates(&self, date: NaiveDate) -> Result<Vec<RootCandidate>, SourceError> {
        Ok(scan_date_window(self.state, date))
    }

    fn aliases(&self, did: &Did) -> Result<Vec<Did>, SourceError> {
        Ok(self.state.aliases_of(did))
    }
}

impl NodeApi for LocalSource<'_> {
    fn headers(&self, from_height: u64) -> Result<Vec<BlockHeader>, SourceError> {
        Ok(self.registry.headers_from(from_height))
    }
}

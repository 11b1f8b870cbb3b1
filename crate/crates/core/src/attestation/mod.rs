//! Downstream DIDs: challenge-response, issuance and its lifecycle, and
//! chains of attestations back to a root.

pub mod chain;
pub mod challenge;
pub mod lifecycle;

pub use chain::{
    build_chains, check_link_timestamp, verify_chain, verify_did, verify_links, ChainError,
    ChainFailure, DidChain, TimestampScope, VerifiedDid,
};
pub use challenge::{
    issue_challenge, respond, verify_response, Challenge, ChallengeError, ChallengeResponse,
};
pub use lifecycle::{
    anchor_interop, check_depth, create_did, deactivate_did, interop_document, issue_ddid,
    issue_interop_ddid, rebase, rebase_candidate, recover_did, renew_ddid, revoke_ddid, update_did,
    Enrollment, Identity, IssueRequest, RenewRequest,
};

use crate::anchor::{AnchorError, Ledger};
use crate::didcore::{Did, DidError, Service};
use crate::source::SourceError;

#[derive(Debug, thiserror::Error)]
pub enum AttestationError {
    #[error("challenge failed: {0}")]
    ChallengeFailed(String),
    #[error("subject identity was not verified out of band")]
    IdentityNotVerified,
    #[error("upstream {0} is deactivated")]
    UpstreamDeactivated(Did),
    #[error("upstream {0} not found")]
    UpstreamNotFound(Did),
    #[error("new DID at depth {depth} would exceed the chain-length limit {limit}")]
    ConstraintViolation { depth: u32, limit: u32 },
    #[error("{0} holds no key listed in its own document")]
    NoSigningKey(Did),
    #[error("no update secret held for {0}")]
    NotUpstream(Did),
    #[error("secret does not match the current commitment of {0}")]
    InvalidReveal(Did),
    #[error("{0} not found")]
    NotFound(Did),
    #[error("{0} is deactivated")]
    AlreadyDeactivated(Did),
    #[error("rebased document lacks keys {missing:?}")]
    KeyMismatch { missing: Vec<String> },
    #[error("combined document lacks keys of provider {0}")]
    MissingProviderKeys(Did),
    #[error("invalid attestation proof from {0}")]
    InvalidProof(String),
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error(transparent)]
    Did(#[from] DidError),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Runs the honest issuance flow end to end: challenge, response, attest.
pub fn issue_to(
    ledger: &mut Ledger,
    upstream: &mut Identity,
    enrollment: Enrollment,
    max_chain_length: Option<u32>,
    timestamp: u32,
) -> Result<Identity, AttestationError> {
    let challenge = issue_challenge(&enrollment.document, timestamp)?;
    let response = enrollment.respond(&challenge);
    let mut request = enrollment.request(challenge, response, timestamp);
    request.max_chain_length = max_chain_length;
    let did = issue_ddid(ledger, upstream, request, timestamp)?;
    Ok(enrollment.into_identity(did))
}

/// A fresh enrollment with one generated key and no services.
pub fn fresh_enrollment() -> Enrollment {
    Enrollment::new(
        vec![crate::didcore::KeyPair::generate("key-1")],
        Vec::<Service>::new(),
    )
}

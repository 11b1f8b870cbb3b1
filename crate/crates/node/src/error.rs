//! The structured error shared by the CLI and the wire protocol:
//! `{code, step, message}`, where `step` names the verification step that
//! failed when there is one.

use serde::{Deserialize, Serialize};
use trustchain_core::anchor::AnchorError;
use trustchain_core::attestation::{AttestationError, ChainFailure};
use trustchain_core::credential::{CredentialFailure, CredentialStep, IssueError};
use trustchain_core::lightclient::LightClientError;
use trustchain_core::registry::RegistryError;
use trustchain_core::roottrust::{RootError, RootFailure, TimestampFailure};
use trustchain_core::source::SourceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct WireError {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    pub message: String,
}

impl WireError {
    pub fn new(code: impl Into<String>, message: impl ToString) -> Self {
        WireError { code: code.into(), step: None, message: message.to_string() }
    }

    pub fn at(mut self, step: impl Into<String>) -> Self {
        self.step = Some(step.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

/// The serde tag of an internally tagged enum value, used as the error code.
fn tag<T: Serialize>(value: &T, field: &str) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.get(field).and_then(|t| t.as_str()).map(str::to_owned))
        .unwrap_or_else(|| "error".into())
}

fn timestamp_step(f: &TimestampFailure) -> String {
    f.step.number().to_string()
}

impl From<TimestampFailure> for WireError {
    fn from(f: TimestampFailure) -> Self {
        WireError::new("timestamp", &f).at(timestamp_step(&f))
    }
}

impl From<RootFailure> for WireError {
    fn from(f: RootFailure) -> Self {
        let e = WireError::new(tag(&f, "reason"), &f);
        match &f {
            RootFailure::Timestamp(t) => e.at(timestamp_step(t)),
            _ => e,
        }
    }
}

impl From<ChainFailure> for WireError {
    fn from(f: ChainFailure) -> Self {
        match f {
            ChainFailure::Root(root) => {
                let mut e = WireError::from(root);
                e.code = format!("root-{}", e.code);
                e
            }
            ChainFailure::LinkTimestamp { ref failure, .. } => {
                WireError::new("link-timestamp", &f).at(timestamp_step(failure))
            }
            ChainFailure::Build(ref b) => WireError::new(tag(b, "reason"), &f),
            ref other => WireError::new(tag(other, "reason"), other),
        }
    }
}

impl From<CredentialFailure> for WireError {
    fn from(f: CredentialFailure) -> Self {
        let step = match f.step {
            CredentialStep::ResolveIssuer => "i",
            CredentialStep::IssuerChain => "ii",
            CredentialStep::RootTimestamp => "iii",
            CredentialStep::Signature => "iv",
        };
        WireError::new("credential-rejected", &f).at(step)
    }
}

impl From<LightClientError> for WireError {
    fn from(e: LightClientError) -> Self {
        match e {
            LightClientError::Chain(f) => f.into(),
            LightClientError::HeaderGap { .. } => WireError::new("header-gap", &e),
            LightClientError::InvalidHeaders(_) => WireError::new("invalid-headers", &e),
            LightClientError::QuorumUnreachable { .. } => WireError::new("quorum-unreachable", &e),
            LightClientError::ServerUnreachable(_) => WireError::new("server-unreachable", &e),
            LightClientError::CorruptStore(_) => WireError::new("corrupt-store", &e),
            LightClientError::Io(_) => WireError::new("io", &e),
        }
    }
}

impl From<SourceError> for WireError {
    fn from(e: SourceError) -> Self {
        let code = match e {
            SourceError::NotFound(_) => "not-found",
            SourceError::Unreachable(_) => "server-unreachable",
            SourceError::Malformed(_) => "malformed",
        };
        WireError::new(code, &e)
    }
}

impl From<AnchorError> for WireError {
    fn from(e: AnchorError) -> Self {
        let code = match e {
            AnchorError::NotFound(_) => "not-found",
            AnchorError::InvalidOperation { .. } => "invalid-operation",
            AnchorError::ConflictingOperations(_) => "conflicting-operations",
            AnchorError::EmptyBatch => "empty-batch",
            _ => "anchor",
        };
        WireError::new(code, &e)
    }
}

impl From<AttestationError> for WireError {
    fn from(e: AttestationError) -> Self {
        let code = match e {
            AttestationError::ChallengeFailed(_) => "challenge-failed",
            AttestationError::IdentityNotVerified => "identity-not-verified",
            AttestationError::UpstreamDeactivated(_) => "upstream-deactivated",
            AttestationError::UpstreamNotFound(_) => "upstream-not-found",
            AttestationError::ConstraintViolation { .. } => "constraint-violation",
            AttestationError::NoSigningKey(_) => "no-signing-key",
            AttestationError::NotUpstream(_) => "not-upstream",
            AttestationError::InvalidReveal(_) => "invalid-reveal",
            AttestationError::NotFound(_) => "not-found",
            AttestationError::AlreadyDeactivated(_) => "already-deactivated",
            AttestationError::KeyMismatch { .. } => "key-mismatch",
            AttestationError::MissingProviderKeys(_) => "missing-provider-keys",
            AttestationError::InvalidProof(_) => "invalid-proof",
            AttestationError::InvalidCandidate(_) => "invalid-candidate",
            AttestationError::Did(_) => "invalid-document",
            AttestationError::Anchor(_) => "anchor",
            AttestationError::Source(_) => "source",
        };
        WireError::new(code, &e)
    }
}

impl From<RootError> for WireError {
    fn from(e: RootError) -> Self {
        WireError::new("root-publish", &e)
    }
}

impl From<IssueError> for WireError {
    fn from(e: IssueError) -> Self {
        WireError::new("credential-issue", &e)
    }
}

impl From<RegistryError> for WireError {
    fn from(e: RegistryError) -> Self {
        WireError::new("registry", &e)
    }
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        WireError::new("io", &e)
    }
}

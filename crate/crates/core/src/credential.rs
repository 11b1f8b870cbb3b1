//! Signed claims bound to an issuer DID and verified against the trust chain
//! in four steps: resolve the issuer, verify its chain, verify the root, and
//! check the signature.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::anchor::{Resolution, VerificationBundle};
use crate::attestation::{
    build_chains, verify_links, ChainFailure, DidChain, Identity, TimestampScope,
};
use crate::canonical::to_canonical;
use crate::didcore::{verify_signature, Did, SignatureBytes};
use crate::registry::TrustedHeaders;
use crate::roottrust::{verify_root, RootAccepted, RootCandidate, RootFailure, RootParameters};
use crate::source::{DidSource, SourceError};
use crate::strategy::{Named, Strategies};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Credential {
    pub issuer: Did,
    pub claims: BTreeMap<String, String>,
    pub issued_at: u32,
    pub key_id: String,
    pub signature: SignatureBytes,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CredentialBody<'a> {
    issuer: &'a Did,
    claims: &'a BTreeMap<String, String>,
    issued_at: u32,
    key_id: &'a str,
}

impl Credential {
    /// Canonical bytes covered by the signature.
    pub fn body(&self) -> Vec<u8> {
        signing_body(&self.issuer, &self.claims, self.issued_at, &self.key_id)
    }
}

fn signing_body(
    issuer: &Did,
    claims: &BTreeMap<String, String>,
    issued_at: u32,
    key_id: &str,
) -> Vec<u8> {
    to_canonical(&CredentialBody {
        issuer,
        claims,
        issued_at,
        key_id,
    })
    .expect("credential body is canonicalizable")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IssueError {
    #[error("issuer {0} is deactivated")]
    IssuerDeactivated(Did),
    #[error("issuer holds no key listed in its resolved document")]
    UnknownKey,
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Signs `claims` with the first of the issuer's keys present in its resolved document.
pub fn issue_credential(
    source: &dyn DidSource,
    issuer: &Identity,
    claims: BTreeMap<String, String>,
    issued_at: u32,
) -> Result<Credential, IssueError> {
    let resolved = source.resolve(&issuer.did)?;
    let document = resolved
        .document
        .as_ref()
        .filter(|_| resolved.is_active())
        .ok_or_else(|| IssueError::IssuerDeactivated(issuer.did.clone()))?;
    let key = issuer
        .signing_key_for(document)
        .ok_or(IssueError::UnknownKey)?;
    let signature = key.sign(&signing_body(&issuer.did, &claims, issued_at, &key.id));
    Ok(Credential {
        issuer: issuer.did.clone(),
        claims,
        issued_at,
        key_id: key.id.clone(),
        signature,
    })
}

/// Whether revoking an issuer (or an attestor above it) also invalidates
/// credentials issued before the revocation.
pub trait RevocationPolicy: Named + Send + Sync {
    /// Block time at which the issuer's chain is evaluated; `None` for the current state.
    fn evaluation_time(&self, credential: &Credential) -> Option<u32>;
}

/// Evaluate against current state: revocation is retroactive. The default.
pub struct CurrentState;

impl Named for CurrentState {
    fn name(&self) -> &'static str {
        "current"
    }
}

impl RevocationPolicy for CurrentState {
    fn evaluation_time(&self, _: &Credential) -> Option<u32> {
        None
    }
}

/// Evaluate against the state at issuance: later revocations do not affect
/// credentials already issued.
pub struct AtIssuance;

impl Named for AtIssuance {
    fn name(&self) -> &'static str {
        "at-issuance"
    }
}

impl RevocationPolicy for AtIssuance {
    fn evaluation_time(&self, credential: &Credential) -> Option<u32> {
        Some(credential.issued_at)
    }
}

pub const DEFAULT_POLICY: &str = "current";

pub fn policies() -> &'static Strategies<dyn RevocationPolicy> {
    static GLOBAL: OnceLock<Strategies<dyn RevocationPolicy>> = OnceLock::new();
    GLOBAL.get_or_init(|| {
        let mut s: Strategies<dyn RevocationPolicy> = Strategies::new();
        s.register(Arc::new(CurrentState));
        s.register(Arc::new(AtIssuance));
        s
    })
}

/// Resolves every DID as of a fixed block time.
struct AsOf<'a> {
    inner: &'a dyn DidSource,
    time: u32,
}

impl DidSource for AsOf<'_> {
    fn resolve(&self, did: &Did) -> Result<Resolution, SourceError> {
        self.inner.resolve_at(did, self.time)
    }
    fn resolve_at(&self, did: &Did, time: u32) -> Result<Resolution, SourceError> {
        self.inner.resolve_at(did, time.min(self.time))
    }
    fn bundle(&self, did: &Did) -> Result<VerificationBundle, SourceError> {
        self.inner.bundle(did)
    }
    fn root_candidates(&self, date: NaiveDate) -> Result<Vec<RootCandidate>, SourceError> {
        self.inner.root_candidates(date)
    }
    fn aliases(&self, did: &Did) -> Result<Vec<Did>, SourceError> {
        let aliases = self.inner.aliases(did)?;
        Ok(aliases
            .into_iter()
            .filter(|a| self.resolve(a).is_ok_and(|r| r.is_active()))
            .collect())
    }
}

/// The four verification steps, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CredentialStep {
    ResolveIssuer,
    IssuerChain,
    RootTimestamp,
    Signature,
}

impl fmt::Display for CredentialStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CredentialStep::ResolveIssuer => "i (resolve issuer)",
            CredentialStep::IssuerChain => "ii (issuer chain)",
            CredentialStep::RootTimestamp => "iii (root timestamp)",
            CredentialStep::Signature => "iv (signature)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "camelCase")]
#[error("credential rejected at step {step}: {message}")]
pub struct CredentialFailure {
    pub step: CredentialStep,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialVerified {
    pub chain: DidChain,
    pub root: RootAccepted,
}

fn failed<T>(step: CredentialStep, message: impl Into<String>) -> Result<T, CredentialFailure> {
    Err(CredentialFailure {
        step,
        message: message.into(),
    })
}

/// Runs steps i to iv and reports the first that fails.
pub fn verify_credential(
    source: &dyn DidSource,
    credential: &Credential,
    params: &RootParameters,
    headers: &dyn TrustedHeaders,
    scope: TimestampScope,
    policy: &dyn RevocationPolicy,
) -> Result<CredentialVerified, CredentialFailure> {
    use CredentialStep::*;
    let as_of;
    let view: &dyn DidSource = match policy.evaluation_time(credential) {
        Some(time) => {
            as_of = AsOf {
                inner: source,
                time,
            };
            &as_of
        }
        None => source,
    };

    let issuer = match view.resolve(&credential.issuer) {
        Ok(r) => r,
        Err(e) => return failed(ResolveIssuer, e.to_string()),
    };
    let Some(document) = issuer.document.as_ref().filter(|_| issuer.is_active()) else {
        return failed(
            ResolveIssuer,
            format!("issuer {} is deactivated", credential.issuer),
        );
    };

    let chains = match build_chains(view, &credential.issuer) {
        Ok(c) => c,
        Err(e) => return failed(IssuerChain, e.to_string()),
    };
    let mut link_failure: Option<ChainFailure> = None;
    let mut root_failure: Option<RootFailure> = None;
    let mut verified = None;
    for chain in chains {
        if let Err(f) = verify_links(view, &chain, headers, scope) {
            link_failure.get_or_insert(f);
            continue;
        }
        match verify_root(view, &chain.root().did, params, headers) {
            Ok(root) => {
                verified = Some(CredentialVerified { chain, root });
                break;
            }
            Err(f) => {
                root_failure.get_or_insert(f);
            }
        }
    }
    let Some(verified) = verified else {
        return match root_failure {
            Some(f) => failed(RootTimestamp, f.to_string()),
            None => failed(
                IssuerChain,
                link_failure.map(|f| f.to_string()).unwrap_or_default(),
            ),
        };
    };

    let Some(method) = document.key(&credential.key_id) else {
        return failed(
            Signature,
            format!("key {:?} not in the issuer document", credential.key_id),
        );
    };
    if !verify_signature(
        &method.key_type,
        &method.public_key,
        &credential.body(),
        &credential.signature,
    ) {
        return failed(Signature, "signature does not verify under the issuer key");
    }
    Ok(verified)
}

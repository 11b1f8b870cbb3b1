//! Root DIDs: publication, the date-window scan for candidates,
//! confirmation codes, root verification and the attack-cost estimator.

mod cost;
mod timestamp;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

pub use crate::anchor::VerificationBundle;
pub use cost::{attack_cost, waiting_period, AttackCostModel, CostError};
pub use timestamp::{verify_timestamp, TimestampFailure, TimestampStep};

use crate::anchor::{AnchorError, Ledger, RegistryState};
use crate::didcore::document::base32_lower;
use crate::didcore::{
    canonicalize, transform_proof_service, Did, DidDocument, DidError, DidOperation, Secret,
};
use crate::hash::sha256;
use crate::registry::TrustedHeaders;
use crate::source::{DidSource, SourceError};

pub const DEFAULT_CODE_LEN: usize = 6;
pub const MIN_CODE_LEN: usize = 3;
pub const MAX_CODE_LEN: usize = 6;
const CODE_ALPHABET: &str = "0123456789abcdefghjkmnpqrstvwxyz";
const DAY: i64 = 86_400;

/// First `len` characters of base32(sha256(canonical resolved root document)).
pub fn confirmation_code(document: &DidDocument, len: usize) -> String {
    let bytes = canonicalize(document).expect("resolved documents are canonicalizable");
    let mut code = base32_lower(&sha256(&bytes).0);
    code.truncate(len);
    code
}

/// UTC calendar day of a Unix timestamp.
pub fn utc_date(timestamp: u32) -> NaiveDate {
    DateTime::from_timestamp(i64::from(timestamp), 0)
        .expect("u32 seconds are in range")
        .date_naive()
}

/// `[start, end)` Unix seconds covering `date` in UTC.
pub fn day_bounds(date: NaiveDate) -> (i64, i64) {
    let start = date
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
        .timestamp();
    (start, start + DAY)
}

/// What a community shares out of band to identify its root: the UTC date
/// of publication, a short confirmation code, and optionally a pinned DID.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RootParameters {
    pub date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_root: Option<Did>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RootParamsError {
    #[error("expected YYYY-MM-DD[:code], got {0:?}")]
    Syntax(String),
    #[error(
        "confirmation code must be {MIN_CODE_LEN}-{MAX_CODE_LEN} base32 characters, got {0:?}"
    )]
    BadCode(String),
}

impl RootParameters {
    pub fn new(date: NaiveDate, code: Option<String>) -> Result<Self, RootParamsError> {
        if let Some(c) = &code {
            let ok = (MIN_CODE_LEN..=MAX_CODE_LEN).contains(&c.len())
                && c.chars().all(|ch| CODE_ALPHABET.contains(ch));
            if !ok {
                return Err(RootParamsError::BadCode(c.clone()));
            }
        }
        Ok(RootParameters {
            date,
            code,
            expected_root: None,
        })
    }

    pub fn pinned(mut self, root: Did) -> Self {
        self.expected_root = Some(root);
        self
    }

    /// Same date and a shorter code prefix.
    pub fn with_code_len(&self, len: usize) -> Self {
        let mut p = self.clone();
        if let Some(c) = &mut p.code {
            c.truncate(len);
        }
        p
    }
}

impl fmt::Display for RootParameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.date.format("%Y-%m-%d"))?;
        if let Some(c) = &self.code {
            write!(f, ":{c}")?;
        }
        Ok(())
    }
}

impl FromStr for RootParameters {
    type Err = RootParamsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (date, code) = match s.split_once(':') {
            Some((d, c)) => (d, Some(c.to_owned())),
            None => (s, None),
        };
        if date.len() != 10 {
            return Err(RootParamsError::Syntax(s.to_owned()));
        }
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|_| RootParamsError::Syntax(s.to_owned()))?;
        RootParameters::new(date, code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RootCandidate {
    pub did: Did,
    /// Block timestamp of the create operation.
    pub created: u32,
    /// Full-length ([`MAX_CODE_LEN`]) confirmation code of the created document.
    pub code: String,
}

/// Every DID created without attestation during `date` (UTC), in creation order.
pub fn scan_date_window(state: &RegistryState, date: NaiveDate) -> Vec<RootCandidate> {
    let (start, end) = day_bounds(date);
    let mut out: Vec<RootCandidate> = state
        .dids
        .iter()
        .filter_map(|(did, record)| {
            let created = record.created();
            let t = i64::from(created.anchor.timestamp);
            if t < start || t >= end || !created.state.metadata.attestations.is_empty() {
                return None;
            }
            let document = created.state.document.as_ref()?;
            Some(RootCandidate {
                did: did.clone(),
                created: created.anchor.timestamp,
                code: confirmation_code(document, MAX_CODE_LEN),
            })
        })
        .collect();
    out.sort_by(|a, b| (a.created, &a.did).cmp(&(b.created, &b.did)));
    out
}

#[derive(Debug, thiserror::Error)]
pub enum RootError {
    #[error("a root document needs at least one verification method")]
    EmptyKeySet,
    #[error("a root document cannot carry an attestation")]
    Attested,
    #[error(transparent)]
    Did(#[from] DidError),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
}

#[derive(Debug, Clone)]
pub struct PublishedRoot {
    pub did: Did,
    pub params: RootParameters,
    pub update_secret: Secret,
    pub recovery_secret: Secret,
}

/// Anchors `document` as an unattested root DID in its own block at `timestamp`.
pub fn publish_root(
    ledger: &mut Ledger,
    document: DidDocument,
    timestamp: u32,
) -> Result<PublishedRoot, RootError> {
    if document.verification_methods.is_empty() {
        return Err(RootError::EmptyKeySet);
    }
    let (_, proofs) = transform_proof_service(&document)?;
    if !proofs.is_empty() {
        return Err(RootError::Attested);
    }
    let update_secret = Secret::random();
    let recovery_secret = Secret::random();
    let op = DidOperation::Create {
        document: document.without_id(),
        update_commitment: update_secret.commitment(),
        recovery_commitment: recovery_secret.commitment(),
    };
    let did = op.target_did()?;
    ledger.anchor(vec![op], timestamp)?;
    let resolved = ledger.resolve(&did)?;
    let doc = resolved.document.expect("just created");
    let code = confirmation_code(&doc, DEFAULT_CODE_LEN);
    let params = RootParameters::new(utc_date(resolved.anchor.timestamp), Some(code))
        .expect("derived code is valid");
    Ok(PublishedRoot {
        did,
        params,
        update_secret,
        recovery_secret,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum RootFailure {
    #[error("root cannot be resolved: {message}")]
    Unresolvable { message: String },
    #[error("root is not the pinned DID {expected}")]
    PinMismatch { expected: Did },
    #[error("root is deactivated")]
    Deactivated,
    #[error("root carries an attestation")]
    HasUpstream,
    #[error("root was modified after publication")]
    Modified,
    #[error("root timestamp: {0}")]
    Timestamp(TimestampFailure),
    #[error("root published on {actual}, expected {expected}")]
    DateMismatch {
        expected: NaiveDate,
        actual: NaiveDate,
    },
    #[error("confirmation code {actual} does not match {expected}")]
    CodeMismatch { expected: String, actual: String },
    #[error("root is not among the candidates published on its date")]
    NotACandidate,
    #[error("{count} candidate roots match the date and code")]
    AmbiguousRoot { count: usize },
}

/// Outcome of a successful root check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootAccepted {
    pub did: Did,
    pub code: String,
    /// False when the parameters carried no confirmation code; accepted, but
    /// same-day fakes could not have been told apart from a lone honest root
    /// had any existed.
    pub code_checked: bool,
}

impl RootAccepted {
    pub fn warning(&self) -> Option<&'static str> {
        (!self.code_checked)
            .then_some("no confirmation code supplied; root identified by date alone")
    }
}

/// Checks that `root` is the DID identified by `params`: an unattested,
/// unmodified DID whose create operation is timestamped on `params.date`,
/// whose code matches, and which no other candidate on that date shares.
pub fn verify_root(
    source: &dyn DidSource,
    root: &Did,
    params: &RootParameters,
    headers: &dyn TrustedHeaders,
) -> Result<RootAccepted, RootFailure> {
    let unresolvable = |e: SourceError| RootFailure::Unresolvable {
        message: e.to_string(),
    };
    if let Some(expected) = &params.expected_root {
        if expected != root {
            return Err(RootFailure::PinMismatch {
                expected: expected.clone(),
            });
        }
    }
    let resolved = source.resolve(root).map_err(unresolvable)?;
    let Some(document) = resolved.document.as_ref().filter(|_| resolved.is_active()) else {
        return Err(RootFailure::Deactivated);
    };
    if !resolved.metadata.attestations.is_empty() {
        return Err(RootFailure::HasUpstream);
    }
    if resolved.metadata.updated.is_some() {
        return Err(RootFailure::Modified);
    }

    let bundle = source.bundle(root).map_err(unresolvable)?;
    let canonical = canonicalize(document).map_err(|e| RootFailure::Unresolvable {
        message: e.to_string(),
    })?;
    if bundle.did != *root || bundle.document.as_deref() != Some(canonical.as_slice()) {
        return Err(RootFailure::Timestamp(TimestampFailure {
            step: TimestampStep::DocumentInChunk,
            reason: "bundle document differs from the resolved document".into(),
        }));
    }
    let header = verify_timestamp(&bundle, resolved.metadata.created, headers)
        .map_err(RootFailure::Timestamp)?;

    let actual = utc_date(header.timestamp);
    if actual != params.date {
        return Err(RootFailure::DateMismatch {
            expected: params.date,
            actual,
        });
    }
    let code = confirmation_code(document, MAX_CODE_LEN);
    if let Some(expected) = &params.code {
        if !code.starts_with(expected.as_str()) {
            return Err(RootFailure::CodeMismatch {
                expected: expected.clone(),
                actual: code[..expected.len()].to_owned(),
            });
        }
    }

    let candidates = source.root_candidates(params.date).map_err(unresolvable)?;
    if !candidates.iter().any(|c| &c.did == root) {
        return Err(RootFailure::NotACandidate);
    }
    let prefix = params.code.as_deref().unwrap_or("");
    let matching = candidates
        .iter()
        .filter(|c| c.code.starts_with(prefix))
        .count();
    if matching > 1 {
        return Err(RootFailure::AmbiguousRoot { count: matching });
    }
    Ok(RootAccepted {
        did: root.clone(),
        code,
        code_checked: params.code.is_some(),
    })
}

//! Building the upstream path(s) from a DID to a root and verifying them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::anchor::{ChunkFile, Resolution};
use crate::didcore::{
    canonicalize, transform_proof_service, AttestationProof, Did, DidOperation, ProofCheckError,
};
use crate::registry::TrustedHeaders;
use crate::roottrust::{
    verify_root, verify_timestamp, RootAccepted, RootFailure, RootParameters, TimestampFailure,
    TimestampStep,
};
use crate::source::{DidSource, SourceError};

/// Upper bound on candidate paths explored for one DID.
pub const MAX_PATHS: usize = 64;
/// Upper bound on chain length.
pub const MAX_DEPTH: usize = 64;

/// Resolved DIDs from the root (index 0) to the leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidChain {
    pub links: Vec<Resolution>,
}

impl DidChain {
    pub fn root(&self) -> &Resolution {
        &self.links[0]
    }

    pub fn leaf(&self) -> &Resolution {
        self.links.last().expect("chains are non-empty")
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn dids(&self) -> Vec<Did> {
        self.links.iter().map(|l| l.did.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum ChainError {
    #[error("{did} not resolvable: {message}")]
    NotResolvable { did: Did, message: String },
    #[error("upstream {upstream} of {did} is not anchored")]
    BrokenChain { did: Did, upstream: Did },
    #[error("attestation cycle through {did}")]
    CycleDetected { did: Did },
    #[error("{did} has no attestation but is not an unmodified root")]
    NoRoot { did: Did },
    #[error("chain longer than {MAX_DEPTH}")]
    TooDeep,
}

fn resolve(source: &dyn DidSource, did: &Did) -> Result<Resolution, ChainError> {
    source.resolve(did).map_err(|e| ChainError::NotResolvable {
        did: did.clone(),
        message: e.to_string(),
    })
}

/// Every root-terminated upstream path from `did`. Each attestation is a
/// pointer to its upstream; where the upstream is active, any active DID
/// listing it under `alsoKnownAs` (a rebased or interoperability DID) may
/// stand in for it.
pub fn build_chains(source: &dyn DidSource, did: &Did) -> Result<Vec<DidChain>, ChainError> {
    let leaf = resolve(source, did)?;
    let mut out = Vec::new();
    let mut first_error = None;
    let mut path = vec![leaf];
    let mut visited = BTreeSet::from([did.clone()]);
    walk(source, &mut path, &mut visited, &mut out, &mut first_error);
    if out.is_empty() {
        Err(first_error.unwrap_or(ChainError::NoRoot { did: did.clone() }))
    } else {
        Ok(out)
    }
}

fn note(error: &mut Option<ChainError>, e: ChainError) {
    error.get_or_insert(e);
}

fn walk(
    source: &dyn DidSource,
    path: &mut Vec<Resolution>,
    visited: &mut BTreeSet<Did>,
    out: &mut Vec<DidChain>,
    error: &mut Option<ChainError>,
) {
    if out.len() >= MAX_PATHS {
        return;
    }
    let current = path.last().expect("non-empty path").clone();
    if current.metadata.attestations.is_empty() {
        if current.metadata.is_root_shaped() {
            out.push(DidChain {
                links: path.iter().rev().cloned().collect(),
            });
        } else {
            note(
                error,
                ChainError::NoRoot {
                    did: current.did.clone(),
                },
            );
        }
        return;
    }
    if path.len() >= MAX_DEPTH {
        note(error, ChainError::TooDeep);
        return;
    }
    let upstreams: BTreeSet<&Did> = current
        .metadata
        .attestations
        .iter()
        .map(|p| &p.upstream_did)
        .collect();
    for upstream in upstreams {
        let resolved = match source.resolve(upstream) {
            Ok(r) => r,
            Err(SourceError::NotFound(_)) => {
                note(
                    error,
                    ChainError::BrokenChain {
                        did: current.did.clone(),
                        upstream: upstream.clone(),
                    },
                );
                continue;
            }
            Err(e) => {
                note(
                    error,
                    ChainError::NotResolvable {
                        did: upstream.clone(),
                        message: e.to_string(),
                    },
                );
                continue;
            }
        };
        let mut next = vec![resolved.clone()];
        if resolved.is_active() {
            match source.aliases(upstream) {
                Ok(aliases) => {
                    for alias in aliases.iter().filter(|a| *a != upstream) {
                        match resolve(source, alias) {
                            Ok(r) => next.push(r),
                            Err(e) => note(error, e),
                        }
                    }
                }
                Err(e) => note(
                    error,
                    ChainError::NotResolvable {
                        did: upstream.clone(),
                        message: e.to_string(),
                    },
                ),
            }
        }
        for candidate in next {
            if !visited.insert(candidate.did.clone()) {
                note(
                    error,
                    ChainError::CycleDetected {
                        did: candidate.did.clone(),
                    },
                );
                continue;
            }
            let did = candidate.did.clone();
            path.push(candidate);
            walk(source, path, visited, out, error);
            path.pop();
            visited.remove(&did);
        }
    }
}

/// Whether link documents other than the root are checked against the
/// header chain too. A full node trusts its own scanned state and needs only
/// the root check; a client reading from an untrusted server checks all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimestampScope {
    RootOnly,
    AllLinks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum ChainFailure {
    #[error(transparent)]
    Build(ChainError),
    #[error("link {link} ({did}) is deactivated")]
    Deactivated { link: usize, did: Did },
    #[error("link {link} ({did}) is not attested by the preceding DID")]
    UpstreamMismatch { link: usize, did: Did },
    #[error("link {link} ({did}): key {key_id:?} not in the upstream document")]
    KeyMismatch {
        link: usize,
        did: Did,
        key_id: String,
    },
    #[error("link {link} ({did}): attestation signature invalid")]
    BadSignature { link: usize, did: Did },
    #[error("link {link} ({did}) exceeds the chain-length limit {limit}")]
    ConstraintViolation { link: usize, did: Did, limit: u32 },
    #[error("link {link} ({did}): {failure}")]
    LinkTimestamp {
        link: usize,
        did: Did,
        failure: TimestampFailure,
    },
    #[error("root: {0}")]
    Root(RootFailure),
}

impl ChainFailure {
    /// Index of the failing link (0 = root), when the failure is tied to one.
    pub fn link(&self) -> Option<usize> {
        match self {
            ChainFailure::Deactivated { link, .. }
            | ChainFailure::UpstreamMismatch { link, .. }
            | ChainFailure::KeyMismatch { link, .. }
            | ChainFailure::BadSignature { link, .. }
            | ChainFailure::ConstraintViolation { link, .. }
            | ChainFailure::LinkTimestamp { link, .. } => Some(*link),
            ChainFailure::Root(_) => Some(0),
            ChainFailure::Build(_) => None,
        }
    }
}

/// The proof on `child` that names `parent` directly or through an alias.
fn proof_for<'a>(child: &'a Resolution, parent: &Resolution) -> Option<&'a AttestationProof> {
    let aliases = parent
        .document
        .as_ref()
        .map(|d| d.also_known_as.as_slice())
        .unwrap_or_default();
    child
        .metadata
        .attestations
        .iter()
        .find(|p| p.upstream_did == parent.did)
        .or_else(|| {
            child
                .metadata
                .attestations
                .iter()
                .find(|p| aliases.contains(&p.upstream_did))
        })
}

/// Checks every link root to leaf, then the root itself.
pub fn verify_chain(
    source: &dyn DidSource,
    chain: &DidChain,
    params: &RootParameters,
    headers: &dyn TrustedHeaders,
    scope: TimestampScope,
) -> Result<RootAccepted, ChainFailure> {
    verify_links(source, chain, headers, scope)?;
    verify_root(source, &chain.root().did, params, headers).map_err(ChainFailure::Root)
}

/// Deactivation, attestation signatures and chain-length limits on every
/// link, plus link timestamps under [`TimestampScope::AllLinks`].
pub fn verify_links(
    source: &dyn DidSource,
    chain: &DidChain,
    headers: &dyn TrustedHeaders,
    scope: TimestampScope,
) -> Result<(), ChainFailure> {
    if chain.is_empty() {
        return Err(ChainFailure::Build(ChainError::TooDeep));
    }
    for (i, link) in chain.links.iter().enumerate() {
        if !link.is_active() || link.document.is_none() {
            return Err(ChainFailure::Deactivated {
                link: i,
                did: link.did.clone(),
            });
        }
    }
    let mut limit: Option<u32> = None;
    for i in 1..chain.len() {
        let (parent, child) = (&chain.links[i - 1], &chain.links[i]);
        let did = child.did.clone();
        let proof = proof_for(child, parent).ok_or_else(|| ChainFailure::UpstreamMismatch {
            link: i,
            did: did.clone(),
        })?;
        let parent_doc = parent.document.as_ref().expect("active");
        let child_doc = child.document.as_ref().expect("active");
        match proof.verify(child_doc, parent_doc) {
            Ok(()) => {}
            Err(ProofCheckError::UnknownKey) => {
                return Err(ChainFailure::KeyMismatch {
                    link: i,
                    did,
                    key_id: proof.key_id.clone(),
                })
            }
            Err(ProofCheckError::BadSignature) => {
                return Err(ChainFailure::BadSignature { link: i, did })
            }
        }
        if let Some(m) = proof.max_chain_length {
            limit = Some(limit.map_or(m, |l| l.min(m)));
        }
        if let Some(l) = limit {
            if i as u64 > u64::from(l) {
                return Err(ChainFailure::ConstraintViolation {
                    link: i,
                    did,
                    limit: l,
                });
            }
        }
    }
    if scope == TimestampScope::AllLinks {
        for (i, link) in chain.links.iter().enumerate().skip(1) {
            check_link_timestamp(source, link, headers).map_err(|failure| {
                ChainFailure::LinkTimestamp {
                    link: i,
                    did: link.did.clone(),
                    failure,
                }
            })?;
        }
    }
    Ok(())
}

/// Ties a resolved link (document and attestations) to its anchoring header.
pub fn check_link_timestamp(
    source: &dyn DidSource,
    link: &Resolution,
    headers: &dyn TrustedHeaders,
) -> Result<(), TimestampFailure> {
    let step1 = |reason: &str| TimestampFailure {
        step: TimestampStep::DocumentInChunk,
        reason: reason.to_owned(),
    };
    let bundle = source
        .bundle(&link.did)
        .map_err(|e| step1(&format!("bundle unavailable: {e}")))?;
    let expected = link
        .document
        .as_ref()
        .map(|d| canonicalize(d).expect("resolved documents are canonicalizable"));
    if bundle.did != link.did || bundle.document != expected {
        return Err(step1("bundle document differs from the resolved document"));
    }
    verify_timestamp(&bundle, link.metadata.timestamp(), headers)?;

    let chunk =
        ChunkFile::from_bytes(&bundle.chunk).map_err(|_| step1("chunk file is not canonical"))?;
    let anchored = chunk.operations.iter().find_map(|op| {
        if op.target_did().ok()? != link.did || op.resulting_document().ok()? != link.document {
            return None;
        }
        match op {
            DidOperation::Deactivate { .. } => Some(None),
            DidOperation::Recover { .. } => Some(Some(Vec::new())),
            _ => transform_proof_service(op.document()?)
                .ok()
                .map(|(_, proofs)| Some(proofs)),
        }
    });
    match anchored {
        Some(None) => Ok(()),
        Some(Some(proofs)) if proofs == link.metadata.attestations => Ok(()),
        _ => Err(step1("attestations differ from the anchored operation")),
    }
}

/// A DID that verified, and the chain that carried it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedDid {
    pub chain: DidChain,
    pub root: RootAccepted,
}

/// Valid if any candidate chain verifies. Otherwise reports the failure of
/// the first chain whose root verifies (the failure lies in its links), or
/// failing that, of the first chain.
pub fn verify_did(
    source: &dyn DidSource,
    did: &Did,
    params: &RootParameters,
    headers: &dyn TrustedHeaders,
    scope: TimestampScope,
) -> Result<VerifiedDid, ChainFailure> {
    let chains = build_chains(source, did).map_err(ChainFailure::Build)?;
    let mut failures = Vec::with_capacity(chains.len());
    for chain in chains {
        match verify_chain(source, &chain, params, headers, scope) {
            Ok(root) => return Ok(VerifiedDid { chain, root }),
            Err(f) => failures.push((chain, f)),
        }
    }
    let pick = failures
        .iter()
        .position(|(chain, f)| {
            !matches!(f, ChainFailure::Root(_))
                && verify_root(source, &chain.root().did, params, headers).is_ok()
        })
        .unwrap_or(0);
    Err(failures.swap_remove(pick).1)
}

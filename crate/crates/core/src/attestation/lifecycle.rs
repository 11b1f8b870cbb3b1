//! Issuance, renewal, revocation and recovery of downstream DIDs, plus
//! rebasing and jointly attested interoperability DIDs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::chain::build_chains;
use super::challenge::{verify_response, Challenge, ChallengeResponse};
use super::AttestationError;
use crate::anchor::{Ledger, Resolution};
use crate::didcore::{
    derive_did, proof_service, transform_proof_service, AttestationProof, Did, DidDocument,
    DidOperation, KeyPair, Secret, Service,
};
use crate::hash::Hash256;
use crate::roottrust::PublishedRoot;
use crate::source::DidSource;

/// An operator's DID together with its private keys and the secrets it holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Identity {
    pub did: Did,
    pub keys: Vec<KeyPair>,
    /// Authorizes updates; held by the attestor for attested DIDs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_secret: Option<Secret>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_secret: Option<Secret>,
    /// Update secrets for the downstream DIDs this identity attested.
    #[serde(default)]
    pub issued: BTreeMap<Did, Secret>,
}

impl Identity {
    pub fn from_root(root: &PublishedRoot, keys: Vec<KeyPair>) -> Self {
        Identity {
            did: root.did.clone(),
            keys,
            update_secret: Some(root.update_secret.clone()),
            recovery_secret: Some(root.recovery_secret.clone()),
            issued: BTreeMap::new(),
        }
    }

    /// The first held key whose public half appears in `document`.
    pub fn signing_key_for(&self, document: &DidDocument) -> Option<&KeyPair> {
        self.keys.iter().find(|k| {
            document
                .key(&k.id)
                .is_some_and(|m| m.public_key == k.public)
        })
    }
}

/// A subject's side of issuance: the candidate document, its keys, and the
/// recovery secret the subject keeps.
#[derive(Debug, Clone)]
pub struct Enrollment {
    pub document: DidDocument,
    pub keys: Vec<KeyPair>,
    pub recovery_secret: Secret,
}

impl Enrollment {
    pub fn new(keys: Vec<KeyPair>, services: Vec<Service>) -> Self {
        let document = DidDocument::new(keys.iter().map(Into::into).collect(), services);
        Enrollment {
            document,
            keys,
            recovery_secret: Secret::random(),
        }
    }

    pub fn respond(&self, challenge: &Challenge) -> ChallengeResponse {
        super::challenge::respond(challenge, &self.keys)
    }

    pub fn request(
        &self,
        challenge: Challenge,
        response: ChallengeResponse,
        now: u32,
    ) -> IssueRequest {
        IssueRequest {
            candidate: self.document.clone(),
            recovery_commitment: self.recovery_secret.commitment(),
            challenge,
            response,
            identity_verified: true,
            max_chain_length: None,
            now,
        }
    }

    /// The subject's identity once `did` is anchored.
    pub fn into_identity(self, did: Did) -> Identity {
        Identity {
            did,
            keys: self.keys,
            update_secret: None,
            recovery_secret: Some(self.recovery_secret),
            issued: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IssueRequest {
    pub candidate: DidDocument,
    pub recovery_commitment: Hash256,
    pub challenge: Challenge,
    pub response: ChallengeResponse,
    /// Out-of-band identity check performed by the operator.
    pub identity_verified: bool,
    /// Limit on chain length imposed on the new DID's subtree.
    pub max_chain_length: Option<u32>,
    pub now: u32,
}

fn check_candidate(candidate: &DidDocument) -> Result<(), AttestationError> {
    if !candidate.id.is_empty() {
        return Err(AttestationError::InvalidCandidate(
            "candidate documents carry no id".into(),
        ));
    }
    candidate.validate()?;
    let (_, proofs) = transform_proof_service(candidate)?;
    if !proofs.is_empty() {
        return Err(AttestationError::InvalidCandidate(
            "candidate already carries an attestor proof".into(),
        ));
    }
    if candidate.verification_methods.is_empty() {
        return Err(AttestationError::InvalidCandidate(
            "candidate has no verification methods".into(),
        ));
    }
    Ok(())
}

fn check_challenge(
    challenge: &Challenge,
    response: &ChallengeResponse,
    candidate: &DidDocument,
    now: u32,
) -> Result<(), AttestationError> {
    match verify_response(challenge, response, candidate, now) {
        Ok(true) => Ok(()),
        Ok(false) => Err(AttestationError::ChallengeFailed(
            "a challenged key did not sign its nonce".into(),
        )),
        Err(e) => Err(AttestationError::ChallengeFailed(e.to_string())),
    }
}

fn active_upstream(ledger: &Ledger, did: &Did) -> Result<Resolution, AttestationError> {
    let resolved = ledger
        .resolve(did)
        .map_err(|_| AttestationError::UpstreamNotFound(did.clone()))?;
    if !resolved.is_active() {
        return Err(AttestationError::UpstreamDeactivated(did.clone()));
    }
    Ok(resolved)
}

/// Fails if a DID attested by `upstream` would exceed a chain-length limit on
/// every path from `upstream` to a root.
pub fn check_depth(
    source: &dyn DidSource,
    upstream: &Did,
    own_limit: Option<u32>,
) -> Result<(), AttestationError> {
    let Ok(chains) = build_chains(source, upstream) else {
        return Err(AttestationError::ConstraintViolation { depth: 0, limit: 0 });
    };
    let mut worst = None;
    for chain in &chains {
        let depth = chain.len() as u32;
        let limit = chain
            .links
            .iter()
            .skip(1)
            .filter_map(|l| {
                l.metadata
                    .attestations
                    .iter()
                    .filter_map(|p| p.max_chain_length)
                    .min()
            })
            .chain(own_limit)
            .min();
        match limit {
            Some(l) if depth > l => worst = Some((depth, l)),
            _ => return Ok(()),
        }
    }
    let (depth, limit) = worst.expect("at least one chain");
    Err(AttestationError::ConstraintViolation { depth, limit })
}

fn signing_key<'a>(
    upstream: &'a Identity,
    resolved: &Resolution,
) -> Result<&'a KeyPair, AttestationError> {
    resolved
        .document
        .as_ref()
        .and_then(|d| upstream.signing_key_for(d))
        .ok_or_else(|| AttestationError::NoSigningKey(upstream.did.clone()))
}

/// Attests and anchors a subject's candidate document as a downstream DID of
/// `upstream`, which keeps the new DID's update secret.
pub fn issue_ddid(
    ledger: &mut Ledger,
    upstream: &mut Identity,
    request: IssueRequest,
    timestamp: u32,
) -> Result<Did, AttestationError> {
    check_candidate(&request.candidate)?;
    check_challenge(
        &request.challenge,
        &request.response,
        &request.candidate,
        request.now,
    )?;
    if !request.identity_verified {
        return Err(AttestationError::IdentityNotVerified);
    }
    let resolved = active_upstream(ledger, &upstream.did)?;
    check_depth(&ledger.source(), &upstream.did, request.max_chain_length)?;
    let key = signing_key(upstream, &resolved)?;

    let update_secret = Secret::random();
    let update_commitment = update_secret.commitment();
    let did = derive_did(
        &request.candidate,
        &update_commitment,
        &request.recovery_commitment,
    )?;
    let proof = AttestationProof::sign(
        &request.candidate.with_id(&did),
        &upstream.did,
        key,
        request.max_chain_length,
    )?;
    anchor_attested(
        ledger,
        &request.candidate,
        vec![proof],
        update_commitment,
        request.recovery_commitment,
        timestamp,
    )?;
    upstream.issued.insert(did.clone(), update_secret);
    Ok(did)
}

fn with_proofs(candidate: &DidDocument, proofs: &[AttestationProof]) -> DidDocument {
    let mut document = candidate.clone();
    document.services.push(proof_service(proofs));
    document
}

fn anchor_attested(
    ledger: &mut Ledger,
    candidate: &DidDocument,
    proofs: Vec<AttestationProof>,
    update_commitment: Hash256,
    recovery_commitment: Hash256,
    timestamp: u32,
) -> Result<Did, AttestationError> {
    let op = DidOperation::Create {
        document: with_proofs(candidate, &proofs),
        update_commitment,
        recovery_commitment,
    };
    let did = op.target_did()?;
    ledger.anchor(vec![op], timestamp)?;
    Ok(did)
}

/// Deactivates `did` using the update secret `upstream` holds for it.
pub fn revoke_ddid(
    ledger: &mut Ledger,
    upstream: &mut Identity,
    did: &Did,
    timestamp: u32,
) -> Result<(), AttestationError> {
    let secret = upstream
        .issued
        .get(did)
        .ok_or_else(|| AttestationError::NotUpstream(did.clone()))?
        .clone();
    let current = active_subject(ledger, did)?;
    if secret.commitment() != current.metadata.update_commitment {
        return Err(AttestationError::InvalidReveal(did.clone()));
    }
    ledger.anchor(
        vec![DidOperation::Deactivate {
            did: did.clone(),
            reveal: secret,
        }],
        timestamp,
    )?;
    upstream.issued.remove(did);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RenewRequest {
    pub did: Did,
    /// Replacement document, without id or proof service.
    pub document: DidDocument,
    /// Required when the verification keys change.
    pub challenge: Option<(Challenge, ChallengeResponse)>,
    pub now: u32,
}

fn key_set(document: &DidDocument) -> Vec<(String, String, Vec<u8>)> {
    let mut keys: Vec<_> = document
        .verification_methods
        .iter()
        .map(|m| (m.id.clone(), m.key_type.clone(), m.public_key.clone()))
        .collect();
    keys.sort();
    keys
}

/// Replaces the document of a DID `upstream` attested, with a fresh
/// signature, the same chain-length limit, and a rotated update secret.
pub fn renew_ddid(
    ledger: &mut Ledger,
    upstream: &mut Identity,
    request: RenewRequest,
    timestamp: u32,
) -> Result<(), AttestationError> {
    let did = request.did.clone();
    let secret = upstream
        .issued
        .get(&did)
        .ok_or_else(|| AttestationError::InvalidReveal(did.clone()))?
        .clone();
    let current = active_subject(ledger, &did)?;
    if secret.commitment() != current.metadata.update_commitment {
        return Err(AttestationError::InvalidReveal(did.clone()));
    }
    check_candidate(&request.document)?;
    let old_doc = current.document.as_ref().expect("active");
    if key_set(old_doc) != key_set(&request.document) {
        let (challenge, response) = request.challenge.as_ref().ok_or_else(|| {
            AttestationError::ChallengeFailed("keys changed without a challenge".into())
        })?;
        check_challenge(challenge, response, &request.document, request.now)?;
    }
    let upstream_resolved = active_upstream(ledger, &upstream.did)?;
    let key = signing_key(upstream, &upstream_resolved)?;
    let limit = current
        .metadata
        .attestations
        .iter()
        .find(|p| p.upstream_did == upstream.did)
        .and_then(|p| p.max_chain_length);
    let proof = AttestationProof::sign(&request.document.with_id(&did), &upstream.did, key, limit)?;

    let next = Secret::random();
    let op = DidOperation::Update {
        did: did.clone(),
        document: with_proofs(&request.document, &[proof]),
        reveal: secret,
        next_update_commitment: next.commitment(),
    };
    ledger.anchor(vec![op], timestamp)?;
    upstream.issued.insert(did, next);
    Ok(())
}

/// The subject takes sole control with its recovery secret. The attestation
/// is dropped, so the DID no longer chains to any root.
pub fn recover_did(
    ledger: &mut Ledger,
    subject: &mut Identity,
    document: DidDocument,
    timestamp: u32,
) -> Result<(), AttestationError> {
    let reveal = subject
        .recovery_secret
        .clone()
        .ok_or_else(|| AttestationError::InvalidReveal(subject.did.clone()))?;
    check_candidate(&document)?;
    let current = active_subject(ledger, &subject.did)?;
    if reveal.commitment() != current.metadata.recovery_commitment {
        return Err(AttestationError::InvalidReveal(subject.did.clone()));
    }
    let (update, recovery) = (Secret::random(), Secret::random());
    let op = DidOperation::Recover {
        did: subject.did.clone(),
        document,
        reveal,
        next_update_commitment: update.commitment(),
        next_recovery_commitment: recovery.commitment(),
    };
    ledger.anchor(vec![op], timestamp)?;
    subject.update_secret = Some(update);
    subject.recovery_secret = Some(recovery);
    Ok(())
}

/// Anchors an unattested DID controlled entirely by its subject.
pub fn create_did(
    ledger: &mut Ledger,
    keys: Vec<KeyPair>,
    services: Vec<Service>,
    timestamp: u32,
) -> Result<Identity, AttestationError> {
    let document = DidDocument::new(keys.iter().map(Into::into).collect(), services);
    check_candidate(&document)?;
    let (update, recovery) = (Secret::random(), Secret::random());
    let op = DidOperation::Create {
        document,
        update_commitment: update.commitment(),
        recovery_commitment: recovery.commitment(),
    };
    let did = op.target_did()?;
    ledger.anchor(vec![op], timestamp)?;
    Ok(Identity {
        did,
        keys,
        update_secret: Some(update),
        recovery_secret: Some(recovery),
        issued: BTreeMap::new(),
    })
}

/// Updates a DID with the identity's own update secret (no attestation).
pub fn update_did(
    ledger: &mut Ledger,
    subject: &mut Identity,
    document: DidDocument,
    timestamp: u32,
) -> Result<(), AttestationError> {
    let reveal = subject
        .update_secret
        .clone()
        .ok_or_else(|| AttestationError::InvalidReveal(subject.did.clone()))?;
    check_candidate(&document)?;
    let current = active_subject(ledger, &subject.did)?;
    if reveal.commitment() != current.metadata.update_commitment {
        return Err(AttestationError::InvalidReveal(subject.did.clone()));
    }
    let next = Secret::random();
    let op = DidOperation::Update {
        did: subject.did.clone(),
        document,
        reveal,
        next_update_commitment: next.commitment(),
    };
    ledger.anchor(vec![op], timestamp)?;
    subject.update_secret = Some(next);
    Ok(())
}

/// Deactivates a DID with the identity's own update secret.
pub fn deactivate_did(
    ledger: &mut Ledger,
    subject: &mut Identity,
    timestamp: u32,
) -> Result<(), AttestationError> {
    let reveal = subject
        .update_secret
        .clone()
        .ok_or_else(|| AttestationError::InvalidReveal(subject.did.clone()))?;
    let current = active_subject(ledger, &subject.did)?;
    if reveal.commitment() != current.metadata.update_commitment {
        return Err(AttestationError::InvalidReveal(subject.did.clone()));
    }
    ledger.anchor(
        vec![DidOperation::Deactivate {
            did: subject.did.clone(),
            reveal,
        }],
        timestamp,
    )?;
    subject.update_secret = None;
    Ok(())
}

fn active_subject(ledger: &Ledger, did: &Did) -> Result<Resolution, AttestationError> {
    let current = ledger
        .resolve(did)
        .map_err(|_| AttestationError::NotFound(did.clone()))?;
    if !current.is_active() {
        return Err(AttestationError::AlreadyDeactivated(did.clone()));
    }
    Ok(current)
}

/// Candidate document for rebasing `did_on_b`: the same keys and services,
/// declared as also known as the original.
pub fn rebase_candidate(original: &DidDocument, did_on_b: &Did) -> DidDocument {
    let mut document = original.without_id();
    document.also_known_as = vec![did_on_b.clone()];
    document
}

/// Issues a DID under `upstream_on_a` that stands in for `did_on_b`, whose
/// current document is `original_doc`, so DIDs downstream of it verify under
/// this tree's root. The request's candidate must carry every key of the
/// original.
pub fn rebase(
    ledger: &mut Ledger,
    upstream_on_a: &mut Identity,
    did_on_b: &Did,
    original_doc: &DidDocument,
    request: IssueRequest,
    timestamp: u32,
) -> Result<Did, AttestationError> {
    let missing: Vec<String> = original_doc
        .verification_methods
        .iter()
        .filter(|m| request.candidate.key(&m.id) != Some(m))
        .map(|m| m.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(AttestationError::KeyMismatch { missing });
    }
    if !request.candidate.also_known_as.contains(did_on_b) {
        return Err(AttestationError::InvalidCandidate(format!(
            "rebased document must list {did_on_b} under alsoKnownAs"
        )));
    }
    issue_ddid(ledger, upstream_on_a, request, timestamp)
}

/// Combined document for an interoperability DID: each provider's keys under
/// ids qualified by the provider DID, plus `extra` keys, and both providers
/// listed under `alsoKnownAs`.
pub fn interop_document(
    providers: &[(&Did, &DidDocument)],
    extra: &[KeyPair],
    services: Vec<Service>,
) -> DidDocument {
    let mut methods = Vec::new();
    for (did, doc) in providers {
        for m in &doc.verification_methods {
            let mut m = m.clone();
            m.id = format!("{did}#{}", m.id);
            methods.push(m);
        }
    }
    methods.extend(extra.iter().map(Into::into));
    let mut document = DidDocument::new(methods, services);
    document.also_known_as = providers.iter().map(|(d, _)| (*d).clone()).collect();
    document
}

/// Jointly attests `request.candidate` by two providers. The candidate must
/// contain every public key of both providers' documents.
pub fn issue_interop_ddid(
    ledger: &mut Ledger,
    provider_a: &mut Identity,
    provider_b: &mut Identity,
    request: IssueRequest,
    timestamp: u32,
) -> Result<Did, AttestationError> {
    check_candidate(&request.candidate)?;
    let mut proofs = Vec::with_capacity(2);
    let update_secret = Secret::random();
    let update_commitment = update_secret.commitment();
    let did = derive_did(
        &request.candidate,
        &update_commitment,
        &request.recovery_commitment,
    )?;
    for provider in [&*provider_a, &*provider_b] {
        let resolved = active_upstream(ledger, &provider.did)?;
        let doc = resolved.document.as_ref().expect("active");
        if !doc
            .verification_methods
            .iter()
            .all(|m| request.candidate.has_public_key(&m.public_key))
        {
            return Err(AttestationError::MissingProviderKeys(provider.did.clone()));
        }
        check_depth(&ledger.source(), &provider.did, None)?;
        let key = signing_key(provider, &resolved)?;
        proofs.push(AttestationProof::sign(
            &request.candidate.with_id(&did),
            &provider.did,
            key,
            request.max_chain_length,
        )?);
    }
    check_challenge(
        &request.challenge,
        &request.response,
        &request.candidate,
        request.now,
    )?;
    if !request.identity_verified {
        return Err(AttestationError::IdentityNotVerified);
    }
    let anchored = anchor_interop(
        ledger,
        &request.candidate,
        proofs,
        update_commitment,
        request.recovery_commitment,
        timestamp,
    )?;
    debug_assert_eq!(anchored, did);
    provider_a.issued.insert(did.clone(), update_secret.clone());
    provider_b.issued.insert(did.clone(), update_secret);
    Ok(did)
}

/// Anchors a candidate with the supplied proofs after checking every proof
/// against its upstream's current document.
pub fn anchor_interop(
    ledger: &mut Ledger,
    candidate: &DidDocument,
    proofs: Vec<AttestationProof>,
    update_commitment: Hash256,
    recovery_commitment: Hash256,
    timestamp: u32,
) -> Result<Did, AttestationError> {
    check_candidate(candidate)?;
    let did = derive_did(candidate, &update_commitment, &recovery_commitment)?;
    let resolved = candidate.with_id(&did);
    for proof in &proofs {
        let upstream = active_upstream(ledger, &proof.upstream_did)?;
        let upstream_doc = upstream.document.as_ref().expect("active");
        proof.verify(&resolved, upstream_doc).map_err(|e| {
            AttestationError::InvalidProof(format!("{}: {e:?}", proof.upstream_did))
        })?;
    }
    anchor_attested(
        ledger,
        candidate,
        proofs,
        update_commitment,
        recovery_commitment,
        timestamp,
    )
}

//! DID documents, metadata and the attestor-proof service transform.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::signature::{verify_signature, KeyPair, SignatureBytes};
use super::DidError;
use crate::canonical::{to_canonical, CanonicalError};
use crate::hash::{hex_bytes, sha256, sha256_concat, Hash256};

pub const DID_PREFIX: &str = "did:tc:";
/// Id (and type) of the service that carries attestation proofs inside an anchored document.
pub const PROOF_SERVICE_ID: &str = "trustchain-attestor-proof";

/// `did:tc:` followed by lowercase unpadded Crockford base32 of a 32-byte hash.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Did(String);

impl Did {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn from_hash(hash: &Hash256) -> Self {
        Did(format!("{DID_PREFIX}{}", base32_lower(&hash.0)))
    }
}

pub(crate) fn base32_lower(bytes: &[u8]) -> String {
    base32::encode(base32::Alphabet::Crockford, bytes).to_ascii_lowercase()
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({})", self.0)
    }
}

impl Borrow<str> for Did {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl FromStr for Did {
    type Err = DidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let suffix = s
            .strip_prefix(DID_PREFIX)
            .ok_or_else(|| DidError::InvalidDid(s.to_owned()))?;
        let valid = suffix.len() == 52
            && suffix.bytes().all(|b| {
                b.is_ascii_digit()
                    || (b.is_ascii_lowercase() && !matches!(b, b'i' | b'l' | b'o' | b'u'))
            });
        if !valid {
            return Err(DidError::InvalidDid(s.to_owned()));
        }
        Ok(Did(s.to_owned()))
    }
}

impl TryFrom<String> for Did {
    type Error = DidError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Did> for String {
    fn from(d: Did) -> String {
        d.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationMethod {
    pub id: String,
    #[serde(rename = "type")]
    pub key_type: String,
    #[serde(rename = "publicKey", with = "hex_bytes")]
    pub public_key: Vec<u8>,
}

impl From<&KeyPair> for VerificationMethod {
    fn from(k: &KeyPair) -> Self {
        VerificationMethod {
            id: k.id.clone(),
            key_type: k.key_type.clone(),
            public_key: k.public.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServiceEndpoint {
    Uri(String),
    Payload(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Service {
    pub id: String,
    #[serde(rename = "type")]
    pub service_type: String,
    #[serde(rename = "serviceEndpoint")]
    pub endpoint: ServiceEndpoint,
}

impl Service {
    pub fn uri(
        id: impl Into<String>,
        service_type: impl Into<String>,
        uri: impl Into<String>,
    ) -> Self {
        Service {
            id: id.into(),
            service_type: service_type.into(),
            endpoint: ServiceEndpoint::Uri(uri.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct DidDocument {
    /// Empty inside anchored operations; filled with the DID on resolution.
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub verification_methods: Vec<VerificationMethod>,
    #[serde(default)]
    pub services: Vec<Service>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub also_known_as: Vec<Did>,
}

impl DidDocument {
    pub fn new(verification_methods: Vec<VerificationMethod>, services: Vec<Service>) -> Self {
        DidDocument {
            id: String::new(),
            verification_methods,
            services,
            also_known_as: Vec::new(),
        }
    }

    pub fn with_keys<'a>(keys: impl IntoIterator<Item = &'a KeyPair>) -> Self {
        DidDocument::new(
            keys.into_iter().map(VerificationMethod::from).collect(),
            Vec::new(),
        )
    }

    pub fn key(&self, id: &str) -> Option<&VerificationMethod> {
        self.verification_methods.iter().find(|k| k.id == id)
    }

    pub fn has_public_key(&self, public_key: &[u8]) -> bool {
        self.verification_methods
            .iter()
            .any(|k| k.public_key == public_key)
    }

    pub fn without_id(&self) -> DidDocument {
        DidDocument {
            id: String::new(),
            ..self.clone()
        }
    }

    pub fn with_id(&self, did: &Did) -> DidDocument {
        DidDocument {
            id: did.to_string(),
            ..self.clone()
        }
    }

    /// Structural checks: unique, non-empty key and service ids.
    pub fn validate(&self) -> Result<(), DidError> {
        let mut keys = BTreeSet::new();
        for k in &self.verification_methods {
            if k.id.is_empty() || !keys.insert(k.id.as_str()) {
                return Err(DidError::NonCanonicalizable(format!(
                    "duplicate or empty key id {:?}",
                    k.id
                )));
            }
        }
        let mut services = BTreeSet::new();
        for s in &self.services {
            if s.id.is_empty() {
                return Err(DidError::NonCanonicalizable("empty service id".into()));
            }
            if !services.insert(s.id.as_str()) {
                if s.id == PROOF_SERVICE_ID {
                    return Err(DidError::DuplicateProofService);
                }
                return Err(DidError::NonCanonicalizable(format!(
                    "duplicate service id {:?}",
                    s.id
                )));
            }
        }
        Ok(())
    }
}

pub fn canonicalize(document: &DidDocument) -> Result<Vec<u8>, DidError> {
    document.validate()?;
    to_canonical(document).map_err(|e: CanonicalError| DidError::NonCanonicalizable(e.to_string()))
}

pub fn document_hash(document: &DidDocument) -> Result<Hash256, DidError> {
    canonicalize(document).map(|b| sha256(&b))
}

/// `did:tc:` + base32(sha256(canonical(document without id) || update_commitment || recovery_commitment)).
pub fn derive_did(
    document: &DidDocument,
    update_commitment: &Hash256,
    recovery_commitment: &Hash256,
) -> Result<Did, DidError> {
    let canonical = canonicalize(&document.without_id())?;
    Ok(Did::from_hash(&sha256_concat(&[
        &canonical,
        &update_commitment.0,
        &recovery_commitment.0,
    ])))
}

/// An upstream entity's signature vouching for a downstream document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AttestationProof {
    pub upstream_did: Did,
    pub key_id: String,
    pub signature: SignatureBytes,
    /// Chain-length limit imposed by the attestor on this subtree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chain_length: Option<u32>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AttestationStatement<'a> {
    document_hash: Hash256,
    upstream_did: &'a Did,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_chain_length: Option<u32>,
}

/// The bytes an attestor signs: the document hash bound to the attestor and any constraint.
pub fn attestation_message(
    document_hash: &Hash256,
    upstream: &Did,
    max_chain_length: Option<u32>,
) -> Vec<u8> {
    to_canonical(&AttestationStatement {
        document_hash: *document_hash,
        upstream_did: upstream,
        max_chain_length,
    })
    .expect("statement is canonicalizable")
}

impl AttestationProof {
    /// Signs `document` (which must carry its final id) as `upstream` using `key`.
    pub fn sign(
        document: &DidDocument,
        upstream: &Did,
        key: &KeyPair,
        max_chain_length: Option<u32>,
    ) -> Result<Self, DidError> {
        let hash = document_hash(document)?;
        let signature = key.sign(&attestation_message(&hash, upstream, max_chain_length));
        Ok(AttestationProof {
            upstream_did: upstream.clone(),
            key_id: key.id.clone(),
            signature,
            max_chain_length,
        })
    }

    /// The signing key as listed in `upstream_document`: either under the
    /// qualified id `<upstream>#<key id>` (documents combining several
    /// providers' keys) or under the plain key id.
    pub fn lookup_key<'a>(
        &self,
        upstream_document: &'a DidDocument,
    ) -> Option<&'a VerificationMethod> {
        upstream_document
            .key(&format!("{}#{}", self.upstream_did, self.key_id))
            .or_else(|| upstream_document.key(&self.key_id))
    }

    /// Checks the signature over `document` against the key `key_id` in `upstream_document`.
    pub fn verify(
        &self,
        document: &DidDocument,
        upstream_document: &DidDocument,
    ) -> Result<(), ProofCheckError> {
        let method = self
            .lookup_key(upstream_document)
            .ok_or(ProofCheckError::UnknownKey)?;
        let hash = document_hash(document).map_err(|_| ProofCheckError::BadSignature)?;
        let message = attestation_message(&hash, &self.upstream_did, self.max_chain_length);
        if verify_signature(
            &method.key_type,
            &method.public_key,
            &message,
            &self.signature,
        ) {
            Ok(())
        } else {
            Err(ProofCheckError::BadSignature)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProofCheckError {
    UnknownKey,
    BadSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProofPayload {
    proofs: Vec<AttestationProof>,
}

/// The service entry embedding `proofs` in an anchored document.
pub fn proof_service(proofs: &[AttestationProof]) -> Service {
    let payload = serde_json::to_value(ProofPayload {
        proofs: proofs.to_vec(),
    })
    .expect("proof payload serializes");
    Service {
        id: PROOF_SERVICE_ID.to_owned(),
        service_type: PROOF_SERVICE_ID.to_owned(),
        endpoint: ServiceEndpoint::Payload(payload),
    }
}

/// Moves the attestor-proof service out of the document body. Documents
/// without the service pass through unchanged with no proofs.
pub fn transform_proof_service(
    document: &DidDocument,
) -> Result<(DidDocument, Vec<AttestationProof>), DidError> {
    let mut found = document
        .services
        .iter()
        .filter(|s| s.id == PROOF_SERVICE_ID);
    let Some(service) = found.next() else {
        return Ok((document.clone(), Vec::new()));
    };
    if found.next().is_some() {
        return Err(DidError::DuplicateProofService);
    }
    let ServiceEndpoint::Payload(payload) = &service.endpoint else {
        return Err(DidError::MalformedProofPayload(
            "endpoint is not an embedded payload".into(),
        ));
    };
    let parsed: ProofPayload = serde_json::from_value(payload.clone())
        .map_err(|e| DidError::MalformedProofPayload(e.to_string()))?;
    if parsed.proofs.is_empty() {
        return Err(DidError::MalformedProofPayload("no proofs".into()));
    }
    let body = DidDocument {
        services: document
            .services
            .iter()
            .filter(|s| s.id != PROOF_SERVICE_ID)
            .cloned()
            .collect(),
        ..document.clone()
    };
    Ok((body, parsed.proofs))
}

/// Metadata returned alongside a resolved document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct DocumentMetadata {
    #[serde(default)]
    pub attestations: Vec<AttestationProof>,
    pub update_commitment: Hash256,
    pub recovery_commitment: Hash256,
    /// Block timestamp of the create operation.
    pub created: u32,
    /// Block timestamp of the latest applied non-create operation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub updated: Option<u32>,
}

impl DocumentMetadata {
    /// Timestamp of the latest applied operation.
    pub fn timestamp(&self) -> u32 {
        self.updated.unwrap_or(self.created)
    }

    pub fn upstream_did(&self) -> Option<&Did> {
        self.attestations.first().map(|p| &p.upstream_did)
    }

    /// No attestation and never modified since creation.
    pub fn is_root_shaped(&self) -> bool {
        self.attestations.is_empty() && self.updated.is_none()
    }
}

//! Challenge-response proof that a subject holds the private key behind
//! every verification method in its candidate document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::didcore::{
    document_hash, verify_signature, DidDocument, DidError, KeyPair, SignatureBytes,
};
use crate::hash::Hash256;

/// Default challenge lifetime in seconds.
pub const CHALLENGE_TTL: u32 = 3600;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Challenge {
    /// One fresh nonce per verification method id.
    pub nonces: BTreeMap<String, Hash256>,
    pub document_hash: Hash256,
    pub expiry: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChallengeResponse {
    pub signatures: BTreeMap<String, SignatureBytes>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChallengeError {
    #[error("challenge expired at {expiry}, now {now}")]
    ExpiredChallenge { expiry: u32, now: u32 },
    #[error("no response for key {0:?}")]
    MissingKeyResponse(String),
    #[error("challenge was issued for a different candidate document")]
    DocumentMismatch,
}

fn challenge_message(nonce: &Hash256, document_hash: &Hash256) -> Vec<u8> {
    [nonce.0, document_hash.0].concat()
}

pub fn issue_challenge(candidate: &DidDocument, now: u32) -> Result<Challenge, DidError> {
    let document_hash = document_hash(candidate)?;
    let nonces = candidate
        .verification_methods
        .iter()
        .map(|m| (m.id.clone(), Hash256(rand::random())))
        .collect();
    Ok(Challenge {
        nonces,
        document_hash,
        expiry: now.saturating_add(CHALLENGE_TTL),
    })
}

/// Signs every nonce for which `keys` holds a key with the challenged id.
pub fn respond(challenge: &Challenge, keys: &[KeyPair]) -> ChallengeResponse {
    let signatures = challenge
        .nonces
        .iter()
        .filter_map(|(id, nonce)| {
            let key = keys.iter().find(|k| &k.id == id)?;
            Some((
                id.clone(),
                key.sign(&challenge_message(nonce, &challenge.document_hash)),
            ))
        })
        .collect();
    ChallengeResponse { signatures }
}

/// `Ok(true)` iff every nonce is signed by the matching key of `candidate`.
pub fn verify_response(
    challenge: &Challenge,
    response: &ChallengeResponse,
    candidate: &DidDocument,
    now: u32,
) -> Result<bool, ChallengeError> {
    if now > challenge.expiry {
        return Err(ChallengeError::ExpiredChallenge {
            expiry: challenge.expiry,
            now,
        });
    }
    if document_hash(candidate).ok() != Some(challenge.document_hash) {
        return Err(ChallengeError::DocumentMismatch);
    }
    for method in &candidate.verification_methods {
        if !challenge.nonces.contains_key(&method.id) {
            return Ok(false);
        }
    }
    for (id, nonce) in &challenge.nonces {
        let signature = response
            .signatures
            .get(id)
            .ok_or_else(|| ChallengeError::MissingKeyResponse(id.clone()))?;
        let Some(method) = candidate.key(id) else {
            return Ok(false);
        };
        let message = challenge_message(nonce, &challenge.document_hash);
        if !verify_signature(&method.key_type, &method.public_key, &message, signature) {
            return Ok(false);
        }
    }
    Ok(true)
}

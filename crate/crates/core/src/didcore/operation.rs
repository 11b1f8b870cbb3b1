//! DID operations and the fold that applies them to per-DID state.

use serde::{Deserialize, Serialize};

use super::commitment::{check_reveal, Secret};
use super::document::{derive_did, transform_proof_service, Did, DidDocument, DocumentMetadata};
use super::DidError;
use crate::hash::Hash256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "lowercase",
    rename_all_fields = "camelCase",
    deny_unknown_fields
)]
pub enum DidOperation {
    Create {
        document: DidDocument,
        update_commitment: Hash256,
        recovery_commitment: Hash256,
    },
    /// Authorized by the update secret; replaces the document (and any attestation).
    Update {
        did: Did,
        document: DidDocument,
        reveal: Secret,
        next_update_commitment: Hash256,
    },
    /// Authorized by the recovery secret; drops attestations and rotates both commitments.
    Recover {
        did: Did,
        document: DidDocument,
        reveal: Secret,
        next_update_commitment: Hash256,
        next_recovery_commitment: Hash256,
    },
    /// Authorized by the update secret; permanent.
    Deactivate { did: Did, reveal: Secret },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperationKind {
    Create,
    Update,
    Recover,
    Deactivate,
}

impl DidOperation {
    pub fn kind(&self) -> OperationKind {
        match self {
            DidOperation::Create { .. } => OperationKind::Create,
            DidOperation::Update { .. } => OperationKind::Update,
            DidOperation::Recover { .. } => OperationKind::Recover,
            DidOperation::Deactivate { .. } => OperationKind::Deactivate,
        }
    }

    /// The DID this operation acts on; derived for creates.
    pub fn target_did(&self) -> Result<Did, DidError> {
        match self {
            DidOperation::Create {
                document,
                update_commitment,
                recovery_commitment,
            } => {
                let (body, _) = transform_proof_service(document)?;
                derive_did(&body, update_commitment, recovery_commitment)
            }
            DidOperation::Update { did, .. }
            | DidOperation::Recover { did, .. }
            | DidOperation::Deactivate { did, .. } => Ok(did.clone()),
        }
    }

    pub fn document(&self) -> Option<&DidDocument> {
        match self {
            DidOperation::Create { document, .. }
            | DidOperation::Update { document, .. }
            | DidOperation::Recover { document, .. } => Some(document),
            DidOperation::Deactivate { .. } => None,
        }
    }

    /// Structural well-formedness, independent of any registry state.
    pub fn validate(&self) -> Result<(), DidError> {
        if let Some(document) = self.document() {
            if !document.id.is_empty() {
                return Err(DidError::InvalidOperation(
                    "anchored documents carry no id".into(),
                ));
            }
            document.validate()?;
            let (body, _) = transform_proof_service(document)?;
            super::document::canonicalize(&body)?;
        }
        self.target_did().map(|_| ())
    }

    /// The resolved document this operation produces (proof service removed, id filled).
    pub fn resulting_document(&self) -> Result<Option<DidDocument>, DidError> {
        let did = self.target_did()?;
        match self.document() {
            None => Ok(None),
            Some(d) => {
                let (body, _) = transform_proof_service(d)?;
                Ok(Some(body.with_id(&did)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DidStatus {
    Active,
    Deactivated,
}

/// Current state of one DID.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidState {
    pub did: Did,
    /// `None` once deactivated.
    pub document: Option<DidDocument>,
    pub metadata: DocumentMetadata,
    pub status: DidStatus,
}

/// Applies `op`, anchored at block time `timestamp`, to the current entry.
pub fn apply_operation(
    current: Option<&DidState>,
    op: &DidOperation,
    timestamp: u32,
) -> Result<DidState, DidError> {
    op.validate()?;
    let did = op.target_did()?;
    let current = match (current, op) {
        (Some(_), DidOperation::Create { .. }) => return Err(DidError::DuplicateCreate(did)),
        (
            None,
            DidOperation::Create {
                document,
                update_commitment,
                recovery_commitment,
            },
        ) => {
            let (body, proofs) = transform_proof_service(document)?;
            return Ok(DidState {
                document: Some(body.with_id(&did)),
                metadata: DocumentMetadata {
                    attestations: proofs,
                    update_commitment: *update_commitment,
                    recovery_commitment: *recovery_commitment,
                    created: timestamp,
                    updated: None,
                },
                did,
                status: DidStatus::Active,
            });
        }
        (None, _) => return Err(DidError::NotFound(did)),
        (Some(c), _) => c,
    };
    if current.status == DidStatus::Deactivated {
        return Err(DidError::AlreadyDeactivated(did));
    }
    let mut next = current.clone();
    next.metadata.updated = Some(timestamp);
    match op {
        DidOperation::Create { .. } => unreachable!(),
        DidOperation::Update {
            document,
            reveal,
            next_update_commitment,
            ..
        } => {
            if !check_reveal(reveal.as_bytes(), &current.metadata.update_commitment) {
                return Err(DidError::InvalidReveal(did));
            }
            let (body, proofs) = transform_proof_service(document)?;
            next.document = Some(body.with_id(&did));
            next.metadata.attestations = proofs;
            next.metadata.update_commitment = *next_update_commitment;
        }
        DidOperation::Recover {
            document,
            reveal,
            next_update_commitment,
            next_recovery_commitment,
            ..
        } => {
            if !check_reveal(reveal.as_bytes(), &current.metadata.recovery_commitment) {
                return Err(DidError::InvalidReveal(did));
            }
            let (body, _stripped) = transform_proof_service(document)?;
            next.document = Some(body.with_id(&did));
            next.metadata.attestations = Vec::new();
            next.metadata.update_commitment = *next_update_commitment;
            next.metadata.recovery_commitment = *next_recovery_commitment;
        }
        DidOperation::Deactivate { reveal, .. } => {
            if !check_reveal(reveal.as_bytes(), &current.metadata.update_commitment) {
                return Err(DidError::InvalidReveal(did));
            }
            next.document = None;
            next.status = DidStatus::Deactivated;
        }
    }
    Ok(next)
}

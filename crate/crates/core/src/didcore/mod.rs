//! DID documents and metadata, identifier derivation, commitment-guarded
//! operations, and the attestor-proof service transform.

pub mod commitment;
pub mod document;
pub mod operation;
pub mod signature;

pub use commitment::{check_reveal, make_commitment, BadSecretLength, Secret};
pub use document::{
    attestation_message, canonicalize, derive_did, document_hash, proof_service,
    transform_proof_service, AttestationProof, Did, DidDocument, DocumentMetadata, ProofCheckError,
    Service, ServiceEndpoint, VerificationMethod, DID_PREFIX, PROOF_SERVICE_ID,
};
pub use operation::{apply_operation, DidOperation, DidState, DidStatus, OperationKind};
pub use signature::{
    default_schemes, schemes, verify_signature, Ed25519, KeyPair, SchemeRegistry, SignatureBytes,
    SignatureScheme, ED25519,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DidError {
    #[error("not a valid did:tc identifier: {0:?}")]
    InvalidDid(String),
    #[error("document cannot be canonicalized: {0}")]
    NonCanonicalizable(String),
    #[error("document has more than one attestor-proof service")]
    DuplicateProofService,
    #[error("malformed attestor-proof payload: {0}")]
    MalformedProofPayload(String),
    #[error("malformed operation: {0}")]
    InvalidOperation(String),
    #[error("revealed secret does not match the commitment for {0}")]
    InvalidReveal(Did),
    #[error("{0} is deactivated")]
    AlreadyDeactivated(Did),
    #[error("{0} already exists")]
    DuplicateCreate(Did),
    #[error("{0} not found")]
    NotFound(Did),
    #[error(transparent)]
    BadSecretLength(#[from] BadSecretLength),
}

//! Full timestamp verification: the hash-commitment chain from a DID
//! document through the batch files, transaction and Merkle branch to a
//! trusted block header.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anchor::{ChunkFile, CoreIndexFile, ProvisionalIndexFile, VerificationBundle};
use crate::canonical::from_canonical;
use crate::didcore::{DidDocument, DidOperation};
use crate::hash::sha256;
use crate::registry::{BlockHeader, MerkleProof, Transaction, TrustedHeaders};

/// The eight checks, numbered in verification order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimestampStep {
    DocumentInChunk = 1,
    ChunkHash = 2,
    ProvisionalHash = 3,
    CoreInTransaction = 4,
    TransactionLeaf = 5,
    MerkleRoot = 6,
    Timestamp = 7,
    HeaderTrusted = 8,
}

impl TimestampStep {
    pub const ALL: [TimestampStep; 8] = [
        TimestampStep::DocumentInChunk,
        TimestampStep::ChunkHash,
        TimestampStep::ProvisionalHash,
        TimestampStep::CoreInTransaction,
        TimestampStep::TransactionLeaf,
        TimestampStep::MerkleRoot,
        TimestampStep::Timestamp,
        TimestampStep::HeaderTrusted,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }
}

impl fmt::Display for TimestampStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TimestampStep::DocumentInChunk => "document-in-chunk",
            TimestampStep::ChunkHash => "chunk-hash",
            TimestampStep::ProvisionalHash => "provisional-hash",
            TimestampStep::CoreInTransaction => "core-in-transaction",
            TimestampStep::TransactionLeaf => "transaction-leaf",
            TimestampStep::MerkleRoot => "merkle-root",
            TimestampStep::Timestamp => "timestamp",
            TimestampStep::HeaderTrusted => "header-trusted",
        };
        write!(f, "step {} ({name})", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("timestamp verification failed at {step}: {reason}")]
pub struct TimestampFailure {
    pub step: TimestampStep,
    pub reason: String,
}

fn fail<T>(step: TimestampStep, reason: impl Into<String>) -> Result<T, TimestampFailure> {
    Err(TimestampFailure {
        step,
        reason: reason.into(),
    })
}

/// Checks that `bundle` ties its document to the header at `bundle.height`
/// in `headers`, and that the header carries `claimed_time`.
pub fn verify_timestamp(
    bundle: &VerificationBundle,
    claimed_time: u32,
    headers: &dyn TrustedHeaders,
) -> Result<BlockHeader, TimestampFailure> {
    use TimestampStep::*;

    let Ok(chunk) = ChunkFile::from_bytes(&bundle.chunk) else {
        return fail(DocumentInChunk, "chunk file is not canonical");
    };
    let document = match &bundle.document {
        None => None,
        Some(bytes) => match from_canonical::<DidDocument>(bytes) {
            Ok(d) => Some(d),
            Err(e) => return fail(DocumentInChunk, format!("document: {e}")),
        },
    };
    if let Some(d) = &document {
        if d.id != bundle.did.as_str() {
            return fail(DocumentInChunk, "document id differs from the bundle DID");
        }
    }
    let found = chunk.operations.iter().any(|op| {
        op.target_did().is_ok_and(|t| t == bundle.did)
            && match &document {
                None => matches!(op, DidOperation::Deactivate { .. }),
                Some(d) => op.resulting_document().is_ok_and(|r| r.as_ref() == Some(d)),
            }
    });
    if !found {
        return fail(
            DocumentInChunk,
            "no operation in the chunk file produces this document",
        );
    }

    let Ok(provisional) = ProvisionalIndexFile::from_bytes(&bundle.provisional_index) else {
        return fail(ChunkHash, "provisional index is not canonical");
    };
    if provisional.chunk_cid.digest() != &sha256(&bundle.chunk) {
        return fail(
            ChunkHash,
            "chunk hash differs from the provisional index reference",
        );
    }

    let Ok(core) = CoreIndexFile::from_bytes(&bundle.core_index) else {
        return fail(ProvisionalHash, "core index is not canonical");
    };
    if core.provisional_cid.digest() != &sha256(&bundle.provisional_index) {
        return fail(
            ProvisionalHash,
            "provisional index hash differs from the core index reference",
        );
    }
    if core.operation_count != chunk.operations.len() as u64 {
        return fail(
            ProvisionalHash,
            "core index operation count differs from the chunk",
        );
    }

    let Ok(tx) = Transaction::from_bytes(&bundle.transaction) else {
        return fail(CoreInTransaction, "transaction does not parse");
    };
    if tx.anchored_cid() != Some(sha256(&bundle.core_index)) {
        return fail(
            CoreInTransaction,
            "transaction does not embed the core index hash",
        );
    }

    let Ok(proof) = MerkleProof::from_bytes(&bundle.merkle_proof) else {
        return fail(TransactionLeaf, "Merkle proof does not parse");
    };
    if proof.leaf != tx.txid() {
        return fail(
            TransactionLeaf,
            "Merkle leaf differs from the transaction id",
        );
    }

    let Ok(header) = BlockHeader::from_bytes(&bundle.header) else {
        return fail(MerkleRoot, "header is not 80 bytes");
    };
    if !proof.verify() {
        return fail(MerkleRoot, "Merkle branch does not fold to its root");
    }
    if proof.expected_root != header.merkle_root {
        return fail(MerkleRoot, "Merkle root differs from the header");
    }

    if header.timestamp != claimed_time {
        return fail(
            Timestamp,
            format!(
                "header time {} differs from claimed {claimed_time}",
                header.timestamp
            ),
        );
    }

    if !header.meets_target() {
        return fail(HeaderTrusted, "header does not meet its difficulty target");
    }
    match headers.header_at(bundle.height) {
        Some(trusted) if trusted == header => Ok(header),
        Some(_) => fail(
            HeaderTrusted,
            format!(
                "header differs from the trusted header at height {}",
                bundle.height
            ),
        ),
        None => fail(
            HeaderTrusted,
            format!("no trusted header at height {}", bundle.height),
        ),
    }
}

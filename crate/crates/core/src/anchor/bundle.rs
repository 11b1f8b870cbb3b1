use serde::{Deserialize, Serialize};

use super::files::{CoreIndexFile, ProvisionalIndexFile};
use super::state::RegistryState;
use super::AnchorError;
use crate::canonical::to_canonical;
use crate::didcore::Did;
use crate::hash::{hex_bytes, hex_bytes_opt};
use crate::registry::Registry;

/// Everything needed to tie a DID's latest operation to a block header,
/// checkable by anyone holding the header chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct VerificationBundle {
    pub did: Did,
    /// Canonical resolved document; absent when the latest operation deactivated the DID.
    #[serde(
        default,
        with = "hex_bytes_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub document: Option<Vec<u8>>,
    #[serde(with = "hex_bytes")]
    pub chunk: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub provisional_index: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub core_index: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub transaction: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub merkle_proof: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub header: Vec<u8>,
    pub height: u64,
}

/// Bundle for the latest applied operation on `did`.
pub fn verification_data(
    registry: &Registry,
    state: &RegistryState,
    did: &Did,
) -> Result<VerificationBundle, AnchorError> {
    let record = state
        .record(did)
        .ok_or_else(|| AnchorError::NotFound(did.clone()))?;
    let entry = record.current();
    let anchor = entry.anchor;
    let missing = |e: &dyn std::fmt::Display| AnchorError::CorruptBatch(e.to_string());

    let core_index = registry
        .cas_get(&anchor.core_cid)
        .map_err(|e| missing(&e))?;
    let core = CoreIndexFile::from_bytes(&core_index).map_err(|e| missing(&e))?;
    let provisional_index = registry
        .cas_get(&core.provisional_cid)
        .map_err(|e| missing(&e))?;
    let prov = ProvisionalIndexFile::from_bytes(&provisional_index).map_err(|e| missing(&e))?;
    let chunk = registry.cas_get(&prov.chunk_cid).map_err(|e| missing(&e))?;

    let block = registry
        .block(anchor.height)
        .ok_or_else(|| missing(&"anchoring block missing"))?;
    let tx = &block.transactions[anchor.tx_index as usize];
    let proof = registry.merkle_proof(anchor.height, anchor.tx_index as usize)?;
    let document = entry
        .state
        .document
        .as_ref()
        .map(|d| to_canonical(d).expect("resolved documents are canonicalizable"));

    Ok(VerificationBundle {
        did: did.clone(),
        document,
        chunk,
        provisional_index,
        core_index,
        transaction: tx.to_bytes(),
        merkle_proof: proof.to_bytes(),
        header: block.header.to_bytes().to_vec(),
        height: anchor.height,
    })
}

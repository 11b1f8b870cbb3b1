//! Folding the scanned chain into resolvable DID state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::files::{ChunkFile, CoreIndexFile, ProvisionalIndexFile};
use super::AnchorError;
use crate::didcore::{
    apply_operation, Did, DidDocument, DidOperation, DidState, DidStatus, DocumentMetadata,
};
use crate::registry::{ContentId, Registry};

/// Where an operation sits in the chain. Ordering is the fold order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnchorPoint {
    pub height: u64,
    pub tx_index: u32,
    pub batch_index: u32,
    /// Timestamp of the containing block header.
    pub timestamp: u32,
    pub core_cid: ContentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Outcome {
    Applied,
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnchoredOperation {
    pub operation: DidOperation,
    /// `None` when the target DID could not be determined.
    pub did: Option<Did>,
    pub anchor: AnchorPoint,
    pub outcome: Outcome,
}

/// A transaction that carried the anchoring tag but whose files were missing or invalid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SkippedBatch {
    pub height: u64,
    pub tx_index: u32,
    pub core_cid: ContentId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub anchor: AnchorPoint,
    pub state: DidState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidRecord {
    /// One entry per applied operation, oldest first; never empty.
    pub history: Vec<HistoryEntry>,
}

impl DidRecord {
    pub fn current(&self) -> &HistoryEntry {
        self.history.last().expect("record holds its create")
    }

    pub fn created(&self) -> &HistoryEntry {
        &self.history[0]
    }

    /// Latest entry anchored no later than `time`.
    pub fn as_of(&self, time: u32) -> Option<&HistoryEntry> {
        self.history
            .iter()
            .rev()
            .find(|e| e.anchor.timestamp <= time)
    }
}

/// The result of resolving a DID.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolution {
    pub did: Did,
    /// Absent for deactivated DIDs.
    pub document: Option<DidDocument>,
    pub metadata: DocumentMetadata,
    pub status: DidStatus,
    /// Position of the latest applied operation.
    pub anchor: AnchorPoint,
}

impl Resolution {
    fn from_entry(entry: &HistoryEntry) -> Self {
        Resolution {
            did: entry.state.did.clone(),
            document: entry.state.document.clone(),
            metadata: entry.state.metadata.clone(),
            status: entry.state.status,
            anchor: entry.anchor,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == DidStatus::Active
    }
}

/// Deterministic fold of every anchored operation up to `scanned_height`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct RegistryState {
    pub dids: BTreeMap<Did, DidRecord>,
    pub log: Vec<AnchoredOperation>,
    pub skipped: Vec<SkippedBatch>,
    /// `None` until the genesis block has been scanned.
    scanned: Option<(u64, u32)>,
}

impl RegistryState {
    /// Scans the whole chain from genesis.
    pub fn scan(registry: &Registry) -> Self {
        let mut state = RegistryState::default();
        state.advance(registry);
        state
    }

    pub fn scanned_height(&self) -> u64 {
        self.scanned.map_or(0, |s| s.0)
    }

    /// Header timestamp of the last scanned block: every operation anchored up
    /// to this instant is reflected in the state.
    pub fn scanned_tip_timestamp(&self) -> u32 {
        self.scanned.map_or(0, |s| s.1)
    }

    /// Folds blocks above the last scanned height.
    pub fn advance(&mut self, registry: &Registry) {
        let from = self.scanned.map_or(0, |(h, _)| h + 1);
        if from > registry.height() {
            return;
        }
        let blocks = registry.iterate_blocks(from).expect("from <= tip");
        for block in blocks {
            for (tx_index, tx) in block.transactions.iter().enumerate() {
                let Some(core_cid) = tx.anchored_cid().map(ContentId) else {
                    continue;
                };
                match load_batch(registry, &core_cid) {
                    Ok(chunk) => {
                        for (batch_index, op) in chunk.operations.into_iter().enumerate() {
                            let anchor = AnchorPoint {
                                height: block.height,
                                tx_index: tx_index as u32,
                                batch_index: batch_index as u32,
                                timestamp: block.header.timestamp,
                                core_cid,
                            };
                            self.apply(op, anchor);
                        }
                    }
                    Err(reason) => self.skipped.push(SkippedBatch {
                        height: block.height,
                        tx_index: tx_index as u32,
                        core_cid,
                        reason: reason.to_string(),
                    }),
                }
            }
            self.scanned = Some((block.height, block.header.timestamp));
        }
    }

    fn apply(&mut self, operation: DidOperation, anchor: AnchorPoint) {
        let did = operation.target_did().ok();
        let outcome = match &did {
            None => Outcome::Rejected {
                reason: "cannot determine target DID".into(),
            },
            Some(did) => {
                let current = self.dids.get(did).map(|r| &r.current().state);
                match apply_operation(current, &operation, anchor.timestamp) {
                    Ok(state) => {
                        let entry = HistoryEntry { anchor, state };
                        self.dids
                            .entry(did.clone())
                            .or_insert_with(|| DidRecord {
                                history: Vec::new(),
                            })
                            .history
                            .push(entry);
                        Outcome::Applied
                    }
                    Err(e) => Outcome::Rejected {
                        reason: e.to_string(),
                    },
                }
            }
        };
        self.log.push(AnchoredOperation {
            operation,
            did,
            anchor,
            outcome,
        });
    }

    pub fn record(&self, did: &Did) -> Option<&DidRecord> {
        self.dids.get(did)
    }

    pub fn resolve(&self, did: &Did) -> Result<Resolution, AnchorError> {
        self.record(did)
            .map(|r| Resolution::from_entry(r.current()))
            .ok_or_else(|| AnchorError::NotFound(did.clone()))
    }

    /// Resolution as it stood at `time` (block timestamp, inclusive).
    pub fn resolve_at(&self, did: &Did, time: u32) -> Result<Resolution, AnchorError> {
        self.record(did)
            .and_then(|r| r.as_of(time))
            .map(Resolution::from_entry)
            .ok_or_else(|| AnchorError::NotFound(did.clone()))
    }

    pub fn status(&self, did: &Did) -> Option<DidStatus> {
        self.record(did).map(|r| r.current().state.status)
    }

    /// Active DIDs whose current document lists `did` under `alsoKnownAs`.
    pub fn aliases_of(&self, did: &Did) -> Vec<Did> {
        self.dids
            .iter()
            .filter(|(_, r)| {
                r.current()
                    .state
                    .document
                    .as_ref()
                    .is_some_and(|d| d.also_known_as.contains(did))
            })
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical(self).expect("state is canonicalizable")
    }
}

fn load_batch(registry: &Registry, core_cid: &ContentId) -> Result<ChunkFile, AnchorError> {
    let corrupt =
        |what: &str, e: &dyn std::fmt::Display| AnchorError::CorruptBatch(format!("{what}: {e}"));
    let core_bytes = registry
        .cas_get(core_cid)
        .map_err(|e| corrupt("core index", &e))?;
    let core = CoreIndexFile::from_bytes(&core_bytes).map_err(|e| corrupt("core index", &e))?;
    let prov_bytes = registry
        .cas_get(&core.provisional_cid)
        .map_err(|e| corrupt("provisional index", &e))?;
    let prov = ProvisionalIndexFile::from_bytes(&prov_bytes)
        .map_err(|e| corrupt("provisional index", &e))?;
    let chunk_bytes = registry
        .cas_get(&prov.chunk_cid)
        .map_err(|e| corrupt("chunk", &e))?;
    let chunk = ChunkFile::from_bytes(&chunk_bytes).map_err(|e| corrupt("chunk", &e))?;
    if chunk.operations.len() as u64 != core.operation_count {
        return Err(AnchorError::CorruptBatch(format!(
            "core index declares {} operations, chunk holds {}",
            core.operation_count,
            chunk.operations.len()
        )));
    }
    Ok(chunk)
}

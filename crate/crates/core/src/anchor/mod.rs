//! Batching DID operations behind two layers of content-addressed indirection,
//! anchoring the batch in a single registry transaction, and folding the
//! scanned chain back into resolvable state.

mod bundle;
pub mod files;
mod state;

use std::collections::BTreeSet;

pub use bundle::{verification_data, VerificationBundle};
pub use files::{ChunkFile, CoreIndexFile, ProvisionalIndexFile};
pub use state::{
    AnchorPoint, AnchoredOperation, DidRecord, HistoryEntry, Outcome, RegistryState, Resolution,
    SkippedBatch,
};

use crate::didcore::{Did, DidError, DidOperation};
use crate::hash::Hash256;
use crate::registry::block::MAX_PAYLOAD;
use crate::registry::{ContentId, Registry, RegistryError, Transaction};

#[derive(Debug, thiserror::Error)]
pub enum AnchorError {
    #[error("batch contains no operations")]
    EmptyBatch,
    #[error("operation {index} is invalid: {source}")]
    InvalidOperation { index: usize, source: DidError },
    #[error("batch contains more than one operation for {0}")]
    ConflictingOperations(Did),
    #[error("core index reference of {0} bytes exceeds the transaction payload budget")]
    OversizedBatch(usize),
    #[error("corrupt batch: {0}")]
    CorruptBatch(String),
    #[error("{0} not found")]
    NotFound(Did),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// A batch whose files are stored and whose anchoring transaction is ready to mine.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    pub transaction: Transaction,
    pub core_cid: ContentId,
    pub provisional_cid: ContentId,
    pub chunk_cid: ContentId,
    pub dids: Vec<Did>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchored {
    pub txid: Hash256,
    pub height: u64,
    pub dids: Vec<Did>,
}

/// Validates `operations`, stores chunk / provisional / core files, and builds
/// the anchoring transaction. Nothing is stored if validation fails.
pub fn prepare_batch(
    registry: &mut Registry,
    operations: Vec<DidOperation>,
) -> Result<PreparedBatch, AnchorError> {
    if operations.is_empty() {
        return Err(AnchorError::EmptyBatch);
    }
    let mut seen = BTreeSet::new();
    let mut dids = Vec::with_capacity(operations.len());
    for (index, op) in operations.iter().enumerate() {
        op.validate()
            .map_err(|source| AnchorError::InvalidOperation { index, source })?;
        let did = op
            .target_did()
            .map_err(|source| AnchorError::InvalidOperation { index, source })?;
        if !seen.insert(did.clone()) {
            return Err(AnchorError::ConflictingOperations(did));
        }
        dids.push(did);
    }
    let operation_count = operations.len() as u64;
    let chunk = ChunkFile { operations };
    let chunk_cid = registry.cas_put(&chunk.to_bytes())?;
    let provisional_cid = registry.cas_put(&ProvisionalIndexFile { chunk_cid }.to_bytes())?;
    let core_cid = registry.cas_put(
        &CoreIndexFile {
            operation_count,
            provisional_cid,
        }
        .to_bytes(),
    )?;

    let transaction = Transaction::anchoring(core_cid.digest(), rand::random());
    if transaction.payload().len() > MAX_PAYLOAD {
        return Err(AnchorError::OversizedBatch(transaction.payload().len()));
    }
    Ok(PreparedBatch {
        transaction,
        core_cid,
        provisional_cid,
        chunk_cid,
        dids,
    })
}

/// Stores the batch files and mines one block holding the anchoring transaction.
pub fn anchor_batch(
    registry: &mut Registry,
    operations: Vec<DidOperation>,
    timestamp: u32,
) -> Result<Anchored, AnchorError> {
    let batch = prepare_batch(registry, operations)?;
    let txid = batch.transaction.txid();
    let block = registry.mine_block(vec![batch.transaction], timestamp)?;
    Ok(Anchored {
        txid,
        height: block.height,
        dids: batch.dids,
    })
}

/// A registry together with its folded state, kept in step after every append.
#[derive(Debug)]
pub struct Ledger {
    registry: Registry,
    state: RegistryState,
}

impl Ledger {
    pub fn new(registry: Registry) -> Self {
        let state = RegistryState::scan(&registry);
        Ledger { registry, state }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn state(&self) -> &RegistryState {
        &self.state
    }

    pub fn into_registry(self) -> Registry {
        self.registry
    }

    /// Tip timestamp plus ten minutes, for callers that do not care about exact times.
    pub fn next_timestamp(&self) -> u32 {
        self.registry.tip().header.timestamp + 600
    }

    pub fn anchor(
        &mut self,
        operations: Vec<DidOperation>,
        timestamp: u32,
    ) -> Result<Anchored, AnchorError> {
        let anchored = anchor_batch(&mut self.registry, operations, timestamp)?;
        self.state.advance(&self.registry);
        Ok(anchored)
    }

    /// Mines several prepared batches and filler transactions into one block.
    pub fn mine(
        &mut self,
        transactions: Vec<Transaction>,
        timestamp: u32,
    ) -> Result<u64, AnchorError> {
        let height = self.registry.mine_block(transactions, timestamp)?.height;
        self.state.advance(&self.registry);
        Ok(height)
    }

    pub fn prepare(&mut self, operations: Vec<DidOperation>) -> Result<PreparedBatch, AnchorError> {
        prepare_batch(&mut self.registry, operations)
    }

    pub fn resolve(&self, did: &Did) -> Result<Resolution, AnchorError> {
        self.state.resolve(did)
    }

    pub fn verification_data(&self, did: &Did) -> Result<VerificationBundle, AnchorError> {
        verification_data(&self.registry, &self.state, did)
    }

    pub fn source(&self) -> crate::source::LocalSource<'_> {
        crate::source::LocalSource::new(&self.registry, &self.state)
    }
}

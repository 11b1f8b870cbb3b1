//! Simulated verifiable data registry: a content-addressed store plus an
//! append-only proof-of-work chain with 80-byte headers.
//!
//! The public surface exposes no way to alter stored content or appended
//! blocks. Mining is single-writer (`&mut self`); everything else reads.

pub mod block;
pub mod cas;
pub mod merkle;

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub use block::{
    mine_block, validate_extension, validate_header_chain, Block, BlockHeader, Transaction,
};
pub use cas::{CasError, ContentId, ContentStore, DirStore, MemoryStore};
pub use merkle::{merkle_prove, merkle_root, MerkleError, MerkleProof, Side};

use crate::hash::{sha256, Hash256};

pub const DEFAULT_BITS: u32 = 16;
/// Genesis timestamp used when none is configured (2009-01-03T18:15:05Z).
pub const DEFAULT_GENESIS_TIME: u32 = 1_231_006_505;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("payload of {0} bytes exceeds the 80-byte limit")]
    PayloadTooLarge(usize),
    #[error("block must contain at least one transaction")]
    EmptyBlock,
    #[error("timestamp {given} does not exceed predecessor timestamp {prev}")]
    TimestampNotMonotonic { prev: u32, given: u32 },
    #[error("difficulty of {0} bits is not supported")]
    DifficultyTooHigh(u32),
    #[error("no proof-of-work nonce satisfies the target")]
    NonceSpaceExhausted,
    #[error("height {height} is beyond the tip at {tip}")]
    HeightBeyondTip { height: u64, tip: u64 },
    #[error("malformed registry data: {0}")]
    Malformed(String),
    #[error("stored chain is invalid at height {0}")]
    InvalidChain(u64),
    #[error("stored chain belongs to a different chain id")]
    ChainIdMismatch,
    #[error(transparent)]
    Cas(#[from] CasError),
    #[error("chain file I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainParams {
    /// Hashed into the genesis block so independent registries are distinguishable.
    pub chain_id: String,
    pub bits: u32,
    pub genesis_time: u32,
}

impl ChainParams {
    pub fn new(chain_id: impl Into<String>) -> Self {
        ChainParams {
            chain_id: chain_id.into(),
            bits: DEFAULT_BITS,
            genesis_time: DEFAULT_GENESIS_TIME,
        }
    }

    pub fn with_bits(mut self, bits: u32) -> Self {
        self.bits = bits;
        self
    }

    pub fn with_genesis_time(mut self, t: u32) -> Self {
        self.genesis_time = t;
        self
    }

    pub fn genesis_transaction(&self) -> Transaction {
        // No anchoring magic: scanners skip the genesis payload.
        Transaction::new(sha256(self.chain_id.as_bytes()).0.to_vec(), [0u8; 8])
            .expect("32-byte payload")
    }

    pub fn genesis_block(&self) -> Result<Block, RegistryError> {
        mine_block(
            vec![self.genesis_transaction()],
            None,
            self.genesis_time,
            self.bits,
            0,
        )
    }
}

/// Append-only chain file: a sequence of `len(u32 LE) | block bytes` records.
#[derive(Debug)]
struct ChainFile {
    path: PathBuf,
}

impl ChainFile {
    fn read_all(path: &Path) -> Result<Vec<Block>, RegistryError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let mut blocks = Vec::new();
        let mut at = 0usize;
        while at < bytes.len() {
            if bytes.len() - at < 4 {
                return Err(RegistryError::Malformed("truncated chain record".into()));
            }
            let len = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
            at += 4;
            if bytes.len() - at < len {
                return Err(RegistryError::Malformed("truncated chain record".into()));
            }
            blocks.push(Block::from_bytes(
                &bytes[at..at + len],
                blocks.len() as u64,
            )?);
            at += len;
        }
        Ok(blocks)
    }

    fn append(&self, block: &Block) -> Result<(), RegistryError> {
        let body = block.to_bytes();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(&(body.len() as u32).to_le_bytes())?;
        file.write_all(&body)?;
        file.sync_data()?;
        Ok(())
    }
}

pub struct Registry {
    params: ChainParams,
    cas: Box<dyn ContentStore>,
    blocks: Vec<Block>,
    chain_file: Option<ChainFile>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("params", &self.params)
            .field("height", &self.tip().height)
            .field("cas_entries", &self.cas.len())
            .finish()
    }
}

impl Registry {
    pub fn in_memory(params: ChainParams) -> Result<Self, RegistryError> {
        let genesis = params.genesis_block()?;
        Ok(Registry {
            params,
            cas: Box::new(MemoryStore::new()),
            blocks: vec![genesis],
            chain_file: None,
        })
    }

    /// Opens (or initializes) a registry under `dir`: blobs in `dir/cas/`, blocks in `dir/chain.bin`.
    pub fn open(dir: impl AsRef<Path>, params: ChainParams) -> Result<Self, RegistryError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let cas = DirStore::open(dir.join("cas"))?;
        let path = dir.join("chain.bin");
        let chain_file = ChainFile { path: path.clone() };
        let blocks = if path.exists() {
            let blocks = ChainFile::read_all(&path)?;
            check_stored_chain(&params, &blocks)?;
            blocks
        } else {
            let genesis = params.genesis_block()?;
            chain_file.append(&genesis)?;
            vec![genesis]
        };
        Ok(Registry {
            params,
            cas: Box::new(cas),
            blocks,
            chain_file: Some(chain_file),
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn cas_put(&mut self, content: &[u8]) -> Result<ContentId, RegistryError> {
        Ok(self.cas.put(content)?)
    }

    pub fn cas_get(&self, id: &ContentId) -> Result<Vec<u8>, CasError> {
        self.cas.get(id)
    }

    pub fn cas_len(&self) -> usize {
        self.cas.len()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("registry always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn block(&self, height: u64) -> Option<&Block> {
        self.blocks.get(usize::try_from(height).ok()?)
    }

    /// Mines `transactions` into a new block at the tip using the chain difficulty.
    pub fn mine_block(
        &mut self,
        transactions: Vec<Transaction>,
        timestamp: u32,
    ) -> Result<&Block, RegistryError> {
        let tip = self.tip();
        let block = mine_block(
            transactions,
            Some(&tip.header),
            timestamp,
            self.params.bits,
            tip.height + 1,
        )?;
        if let Some(file) = &self.chain_file {
            file.append(&block)?;
        }
        self.blocks.push(block);
        Ok(self.tip())
    }

    /// Every block from `from_height` to the tip, in height order.
    pub fn iterate_blocks(
        &self,
        from_height: u64,
    ) -> Result<impl Iterator<Item = &Block> + '_, RegistryError> {
        let tip = self.height();
        if from_height > tip {
            return Err(RegistryError::HeightBeyondTip {
                height: from_height,
                tip,
            });
        }
        Ok(self.blocks[from_height as usize..].iter())
    }

    pub fn headers(&self) -> Vec<BlockHeader> {
        self.blocks.iter().map(|b| b.header).collect()
    }

    pub fn headers_from(&self, from_height: u64) -> Vec<BlockHeader> {
        self.blocks
            .iter()
            .skip(from_height as usize)
            .map(|b| b.header)
            .collect()
    }

    /// Inclusion proof for the transaction at `tx_index` of the block at `height`.
    pub fn merkle_proof(&self, height: u64, tx_index: usize) -> Result<MerkleProof, RegistryError> {
        let block = self.block(height).ok_or(RegistryError::HeightBeyondTip {
            height,
            tip: self.height(),
        })?;
        merkle_prove(&block.txids(), tx_index).map_err(|e| RegistryError::Malformed(e.to_string()))
    }
}

fn check_stored_chain(params: &ChainParams, blocks: &[Block]) -> Result<(), RegistryError> {
    let genesis = blocks.first().ok_or(RegistryError::InvalidChain(0))?;
    if genesis.transactions != [params.genesis_transaction()] {
        return Err(RegistryError::ChainIdMismatch);
    }
    let headers: Vec<BlockHeader> = blocks.iter().map(|b| b.header).collect();
    if !validate_header_chain(&headers) {
        return Err(RegistryError::InvalidChain(0));
    }
    for block in blocks {
        let root =
            merkle_root(&block.txids()).map_err(|_| RegistryError::InvalidChain(block.height))?;
        if root != block.header.merkle_root {
            return Err(RegistryError::InvalidChain(block.height));
        }
    }
    Ok(())
}

/// Read access to a trusted header chain by height.
pub trait TrustedHeaders {
    fn header_at(&self, height: u64) -> Option<BlockHeader>;
    fn tip_height(&self) -> Option<u64>;
}

impl TrustedHeaders for [BlockHeader] {
    fn header_at(&self, height: u64) -> Option<BlockHeader> {
        self.get(usize::try_from(height).ok()?).copied()
    }

    fn tip_height(&self) -> Option<u64> {
        self.len().checked_sub(1).map(|h| h as u64)
    }
}

impl TrustedHeaders for Vec<BlockHeader> {
    fn header_at(&self, height: u64) -> Option<BlockHeader> {
        self.as_slice().header_at(height)
    }

    fn tip_height(&self) -> Option<u64> {
        self.as_slice().tip_height()
    }
}

impl TrustedHeaders for Registry {
    fn header_at(&self, height: u64) -> Option<BlockHeader> {
        self.block(height).map(|b| b.header)
    }

    fn tip_height(&self) -> Option<u64> {
        Some(self.height())
    }
}

/// Hash of the genesis block for `params`; light clients may pin it.
pub fn genesis_hash(params: &ChainParams) -> Result<Hash256, RegistryError> {
    Ok(params.genesis_block()?.hash())
}

//! Transactions, 80-byte block headers and proof-of-work mining.

use sha2::{Digest, Sha256};

use super::merkle::{merkle_root, MerkleError};
use super::RegistryError;
use crate::hash::{dsha256, Hash256};

/// Maximum arbitrary-data payload per transaction.
pub const MAX_PAYLOAD: usize = 80;
/// Protocol tag at the start of every anchoring payload.
pub const ANCHOR_MAGIC: &[u8; 2] = b"TC";
pub const HEADER_LEN: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub nonce: [u8; 8],
    payload: Vec<u8>,
}

impl Transaction {
    pub fn new(payload: Vec<u8>, nonce: [u8; 8]) -> Result<Self, RegistryError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(RegistryError::PayloadTooLarge(payload.len()));
        }
        Ok(Transaction { nonce, payload })
    }

    /// A transaction tagged with [`ANCHOR_MAGIC`] that embeds a 32-byte content id.
    pub fn anchoring(cid: &Hash256, nonce: [u8; 8]) -> Self {
        let mut payload = Vec::with_capacity(34);
        payload.extend_from_slice(ANCHOR_MAGIC);
        payload.extend_from_slice(&cid.0);
        Transaction { nonce, payload }
    }

    pub fn with_random_nonce(payload: Vec<u8>) -> Result<Self, RegistryError> {
        Transaction::new(payload, rand::random())
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// The embedded content id, if this is a well-formed anchoring transaction.
    pub fn anchored_cid(&self) -> Option<Hash256> {
        match self.payload.strip_prefix(ANCHOR_MAGIC.as_slice()) {
            Some(rest) if rest.len() == 32 => Hash256::from_slice(rest),
            _ => None,
        }
    }

    /// `nonce(8) | payload_len(1) | payload`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.payload.len());
        out.extend_from_slice(&self.nonce);
        out.push(self.payload.len() as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RegistryError> {
        let (tx, used) = Self::decode(bytes)?;
        if used != bytes.len() {
            return Err(RegistryError::Malformed(
                "trailing bytes after transaction".into(),
            ));
        }
        Ok(tx)
    }

    pub(crate) fn decode(bytes: &[u8]) -> Result<(Self, usize), RegistryError> {
        if bytes.len() < 9 {
            return Err(RegistryError::Malformed("short transaction".into()));
        }
        let nonce: [u8; 8] = bytes[..8].try_into().unwrap();
        let len = bytes[8] as usize;
        if len > MAX_PAYLOAD || bytes.len() < 9 + len {
            return Err(RegistryError::Malformed("bad payload length".into()));
        }
        Ok((
            Transaction {
                nonce,
                payload: bytes[9..9 + len].to_vec(),
            },
            9 + len,
        ))
    }

    pub fn txid(&self) -> Hash256 {
        dsha256(&self.to_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub version: i32,
    pub prev_hash: Hash256,
    pub merkle_root: Hash256,
    /// Unix seconds.
    pub timestamp: u32,
    /// Required number of leading zero bits in the header hash.
    pub bits: u32,
    pub pow_nonce: u32,
}

impl BlockHeader {
    pub const VERSION: i32 = 1;

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&self.version.to_le_bytes());
        out[4..36].copy_from_slice(&self.prev_hash.0);
        out[36..68].copy_from_slice(&self.merkle_root.0);
        out[68..72].copy_from_slice(&self.timestamp.to_le_bytes());
        out[72..76].copy_from_slice(&self.bits.to_le_bytes());
        out[76..80].copy_from_slice(&self.pow_nonce.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RegistryError> {
        if bytes.len() != HEADER_LEN {
            return Err(RegistryError::Malformed(format!(
                "header is {} bytes, expected 80",
                bytes.len()
            )));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        Ok(BlockHeader {
            version: i32::from_le_bytes(bytes[0..4].try_into().unwrap()),
            prev_hash: Hash256::from_slice(&bytes[4..36]).unwrap(),
            merkle_root: Hash256::from_slice(&bytes[36..68]).unwrap(),
            timestamp: u32_at(68),
            bits: u32_at(72),
            pow_nonce: u32_at(76),
        })
    }

    pub fn hash(&self) -> Hash256 {
        dsha256(&self.to_bytes())
    }

    pub fn meets_target(&self) -> bool {
        self.hash().leading_zero_bits() >= self.bits
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    pub height: u64,
}

impl Block {
    pub fn txids(&self) -> Vec<Hash256> {
        self.transactions.iter().map(Transaction::txid).collect()
    }

    pub fn hash(&self) -> Hash256 {
        self.header.hash()
    }

    /// `header(80) | tx_count(u32 LE) | transactions`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(84 + 50 * self.transactions.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&(self.transactions.len() as u32).to_le_bytes());
        for tx in &self.transactions {
            out.extend_from_slice(&tx.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], height: u64) -> Result<Self, RegistryError> {
        if bytes.len() < 84 {
            return Err(RegistryError::Malformed("short block".into()));
        }
        let header = BlockHeader::from_bytes(&bytes[..80])?;
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        let mut at = 84;
        let mut transactions = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let (tx, used) = Transaction::decode(&bytes[at..])?;
            transactions.push(tx);
            at += used;
        }
        if at != bytes.len() {
            return Err(RegistryError::Malformed(
                "trailing bytes after block".into(),
            ));
        }
        Ok(Block {
            header,
            transactions,
            height,
        })
    }
}

/// Mines a block on top of `prev` (or a genesis block when `prev` is `None`).
pub fn mine_block(
    transactions: Vec<Transaction>,
    prev: Option<&BlockHeader>,
    timestamp: u32,
    bits: u32,
    height: u64,
) -> Result<Block, RegistryError> {
    if transactions.is_empty() {
        return Err(RegistryError::EmptyBlock);
    }
    if let Some(prev) = prev {
        if timestamp <= prev.timestamp {
            return Err(RegistryError::TimestampNotMonotonic {
                prev: prev.timestamp,
                given: timestamp,
            });
        }
    }
    if bits > 64 {
        return Err(RegistryError::DifficultyTooHigh(bits));
    }
    let txids: Vec<Hash256> = transactions.iter().map(Transaction::txid).collect();
    let merkle_root =
        merkle_root(&txids).map_err(|e: MerkleError| RegistryError::Malformed(e.to_string()))?;
    let mut header = BlockHeader {
        version: BlockHeader::VERSION,
        prev_hash: prev.map(BlockHeader::hash).unwrap_or(Hash256::ZERO),
        merkle_root,
        timestamp,
        bits,
        pow_nonce: 0,
    };
    header.pow_nonce = search_nonce(&header).ok_or(RegistryError::NonceSpaceExhausted)?;
    Ok(Block {
        header,
        transactions,
        height,
    })
}

fn search_nonce(header: &BlockHeader) -> Option<u32> {
    let bytes = header.to_bytes();
    // The first 64 bytes never change while searching.
    let mut midstate = Sha256::new();
    midstate.update(&bytes[..64]);
    let mut tail = [0u8; 16];
    tail.copy_from_slice(&bytes[64..]);
    for nonce in 0..=u32::MAX {
        tail[12..].copy_from_slice(&nonce.to_le_bytes());
        let mut h = midstate.clone();
        h.update(tail);
        let digest = Hash256(Sha256::digest(h.finalize()).into());
        if digest.leading_zero_bits() >= header.bits {
            return Some(nonce);
        }
    }
    None
}

/// True iff every header meets its target, links to its predecessor, and
/// carries a strictly larger timestamp. The first header must be a genesis
/// header (zero `prev_hash`).
pub fn validate_header_chain(headers: &[BlockHeader]) -> bool {
    match headers.first() {
        None => true,
        Some(first) if first.prev_hash != Hash256::ZERO => false,
        Some(_) => validate_extension(None, headers),
    }
}

/// Checks `headers` as a continuation of `tip` (or as a chain start when `tip` is `None`).
pub fn validate_extension(tip: Option<&BlockHeader>, headers: &[BlockHeader]) -> bool {
    let mut prev = tip.copied();
    for header in headers {
        if !header.meets_target() {
            return false;
        }
        if let Some(p) = prev {
            if header.prev_hash != p.hash() || header.timestamp <= p.timestamp {
                return false;
            }
        }
        prev = Some(*header);
    }
    true
}

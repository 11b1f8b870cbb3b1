//! Bitcoin-style Merkle trees over transaction ids.
//!
//! Internal nodes are `dsha256(left || right)`; a level with an odd number of
//! nodes duplicates its last node.

use serde::{Deserialize, Serialize};

use crate::hash::{dsha256, Hash256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree over zero leaves")]
    EmptyLeafSet,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("malformed Merkle proof encoding")]
    Malformed,
}

/// Which side of the running hash the sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf: Hash256,
    pub branch: Vec<(Hash256, Side)>,
    pub expected_root: Hash256,
}

pub fn hash_pair(left: &Hash256, right: &Hash256) -> Hash256 {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(&left.0);
    buf[32..].copy_from_slice(&right.0);
    dsha256(&buf)
}

fn next_level(level: &[Hash256]) -> Vec<Hash256> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => hash_pair(l, r),
            [l] => hash_pair(l, l),
            _ => unreachable!(),
        })
        .collect()
}

pub fn merkle_root(txids: &[Hash256]) -> Result<Hash256, MerkleError> {
    if txids.is_empty() {
        return Err(MerkleError::EmptyLeafSet);
    }
    let mut level = txids.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(level[0])
}

pub fn merkle_prove(txids: &[Hash256], index: usize) -> Result<MerkleProof, MerkleError> {
    if index >= txids.len() {
        return Err(MerkleError::IndexOutOfRange {
            index,
            len: txids.len(),
        });
    }
    let leaf = txids[index];
    let mut branch = Vec::new();
    let mut level = txids.to_vec();
    let mut pos = index;
    while level.len() > 1 {
        let entry = if pos % 2 == 1 {
            (level[pos - 1], Side::Left)
        } else if pos + 1 < level.len() {
            (level[pos + 1], Side::Right)
        } else {
            (level[pos], Side::Right)
        };
        branch.push(entry);
        level = next_level(&level);
        pos /= 2;
    }
    Ok(MerkleProof {
        leaf,
        branch,
        expected_root: level[0],
    })
}

impl MerkleProof {
    /// Folds the leaf through the branch. Returns `None` for a branch no honest
    /// tree can produce: a duplicated node only ever appears as a right sibling.
    pub fn fold(&self) -> Option<Hash256> {
        let mut acc = self.leaf;
        for (sibling, side) in &self.branch {
            acc = match side {
                Side::Left if *sibling == acc => return None,
                Side::Left => hash_pair(sibling, &acc),
                Side::Right => hash_pair(&acc, sibling),
            };
        }
        Some(acc)
    }

    pub fn verify(&self) -> bool {
        self.fold() == Some(self.expected_root)
    }

    /// `leaf(32) | count(1) | count × (side(1) | sibling(32)) | root(32)`, side 0 = left, 1 = right.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(65 + 33 * self.branch.len());
        out.extend_from_slice(&self.leaf.0);
        out.push(self.branch.len() as u8);
        for (sibling, side) in &self.branch {
            out.push(match side {
                Side::Left => 0,
                Side::Right => 1,
            });
            out.extend_from_slice(&sibling.0);
        }
        out.extend_from_slice(&self.expected_root.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MerkleError> {
        if bytes.len() < 65 {
            return Err(MerkleError::Malformed);
        }
        let leaf = Hash256::from_slice(&bytes[..32]).ok_or(MerkleError::Malformed)?;
        let count = bytes[32] as usize;
        if bytes.len() != 65 + 33 * count {
            return Err(MerkleError::Malformed);
        }
        let mut branch = Vec::with_capacity(count);
        for i in 0..count {
            let at = 33 + 33 * i;
            let side = match bytes[at] {
                0 => Side::Left,
                1 => Side::Right,
                _ => return Err(MerkleError::Malformed),
            };
            let sibling =
                Hash256::from_slice(&bytes[at + 1..at + 33]).ok_or(MerkleError::Malformed)?;
            branch.push((sibling, side));
        }
        let expected_root =
            Hash256::from_slice(&bytes[bytes.len() - 32..]).ok_or(MerkleError::Malformed)?;
        Ok(MerkleProof {
            leaf,
            branch,
            expected_root,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::sha256;

    fn leaves(n: usize) -> Vec<Hash256> {
        (0..n).map(|i| sha256(&(i as u64).to_le_bytes())).collect()
    }

    #[test]
    fn single_leaf_is_root() {
        let t = leaves(1);
        assert_eq!(merkle_root(&t).unwrap(), t[0]);
        let p = merkle_prove(&t, 0).unwrap();
        assert!(p.branch.is_empty());
        assert_eq!(p.expected_root, t[0]);
        assert!(p.verify());
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(merkle_root(&[]), Err(MerkleError::EmptyLeafSet));
    }

    #[test]
    fn out_of_range() {
        assert_eq!(
            merkle_prove(&leaves(3), 3).unwrap_err(),
            MerkleError::IndexOutOfRange { index: 3, len: 3 }
        );
    }

    #[test]
    fn byte_round_trip() {
        let t = leaves(5);
        let p = merkle_prove(&t, 4).unwrap();
        assert_eq!(MerkleProof::from_bytes(&p.to_bytes()).unwrap(), p);
    }

    #[test]
    fn left_duplicate_rejected() {
        let t = leaves(3);
        let mut p = merkle_prove(&t, 2).unwrap();
        assert!(p.verify());
        // level 0: leaf 2 is paired with itself on the right
        assert_eq!(p.branch[0], (t[2], Side::Right));
        p.branch[0].1 = Side::Left;
        assert!(!p.verify());
    }
}

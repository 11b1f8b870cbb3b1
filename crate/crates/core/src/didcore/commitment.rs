//! Hash commitments to single-use secrets.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::{sha256, Hash256};

pub const SECRET_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("secret must be {SECRET_LEN} bytes, got {0}")]
pub struct BadSecretLength(pub usize);

/// A 32-byte pre-image whose hash is published as an update or recovery commitment.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret([u8; SECRET_LEN]);

impl Secret {
    pub fn random() -> Self {
        Secret(rand::random())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BadSecretLength> {
        <[u8; SECRET_LEN]>::try_from(bytes)
            .map(Secret)
            .map_err(|_| BadSecretLength(bytes.len()))
    }

    pub fn as_bytes(&self) -> &[u8; SECRET_LEN] {
        &self.0
    }

    pub fn commitment(&self) -> Hash256 {
        sha256(&self.0)
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(..)")
    }
}

impl Serialize for Secret {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Secret {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let h = Hash256::deserialize(deserializer)?;
        Ok(Secret(h.0))
    }
}

pub fn make_commitment(secret: &[u8]) -> Result<Hash256, BadSecretLength> {
    Secret::from_bytes(secret).map(|s| s.commitment())
}

pub fn check_reveal(secret: &[u8], commitment: &Hash256) -> bool {
    secret.len() == SECRET_LEN && sha256(secret) == *commitment
}

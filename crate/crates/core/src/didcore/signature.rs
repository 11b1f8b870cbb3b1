//! Signature schemes, selected by the key type named in a verification method.

use std::fmt;
use std::sync::{Arc, OnceLock};

use ed25519_dalek::Signer;
use serde::{Deserialize, Serialize};

use crate::hash::hex_bytes;
use crate::strategy::{Named, Strategies};

pub const ED25519: &str = "Ed25519";

/// One interchangeable signature algorithm.
pub trait SignatureScheme: Named + Send + Sync {
    /// The key type string used in verification methods.
    fn key_type(&self) -> &'static str;
    /// Returns `(secret, public)` key bytes.
    fn generate(&self) -> (Vec<u8>, Vec<u8>);
    fn public_from_secret(&self, secret: &[u8]) -> Option<Vec<u8>>;
    fn sign(&self, secret: &[u8], message: &[u8]) -> Option<Vec<u8>>;
    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8]) -> bool;
}

pub struct Ed25519;

impl Ed25519 {
    fn signing_key(secret: &[u8]) -> Option<ed25519_dalek::SigningKey> {
        let bytes: [u8; 32] = secret.try_into().ok()?;
        Some(ed25519_dalek::SigningKey::from_bytes(&bytes))
    }
}

impl SignatureScheme for Ed25519 {
    fn key_type(&self) -> &'static str {
        ED25519
    }

    fn generate(&self) -> (Vec<u8>, Vec<u8>) {
        let key = ed25519_dalek::SigningKey::generate(&mut rand::rngs::OsRng);
        (
            key.to_bytes().to_vec(),
            key.verifying_key().to_bytes().to_vec(),
        )
    }

    fn public_from_secret(&self, secret: &[u8]) -> Option<Vec<u8>> {
        Self::signing_key(secret).map(|k| k.verifying_key().to_bytes().to_vec())
    }

    fn sign(&self, secret: &[u8], message: &[u8]) -> Option<Vec<u8>> {
        Self::signing_key(secret).map(|k| k.sign(message).to_bytes().to_vec())
    }

    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8]) -> bool {
        let Ok(public) = <[u8; 32]>::try_from(public) else {
            return false;
        };
        let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&public) else {
            return false;
        };
        let Ok(signature) = ed25519_dalek::Signature::from_slice(signature) else {
            return false;
        };
        key.verify_strict(message, &signature).is_ok()
    }
}

/// Signature schemes keyed by key type. The default set holds only Ed25519.
pub type SchemeRegistry = Strategies<dyn SignatureScheme>;

impl Named for Ed25519 {
    fn name(&self) -> &'static str {
        ED25519
    }
}

/// The process-wide scheme set used for signing and verification.
pub fn schemes() -> &'static SchemeRegistry {
    static GLOBAL: OnceLock<SchemeRegistry> = OnceLock::new();
    GLOBAL.get_or_init(default_schemes)
}

pub fn default_schemes() -> SchemeRegistry {
    let mut r = SchemeRegistry::new();
    r.register(Arc::new(Ed25519));
    r
}

/// Detached signature bytes, hex in text form.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignatureBytes(#[serde(with = "hex_bytes")] pub Vec<u8>);

impl fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignatureBytes({})", hex::encode(&self.0))
    }
}

/// A named private key held by an operator.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    pub id: String,
    #[serde(rename = "type")]
    pub key_type: String,
    #[serde(with = "hex_bytes")]
    pub public: Vec<u8>,
    #[serde(with = "hex_bytes")]
    secret: Vec<u8>,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("id", &self.id)
            .field("key_type", &self.key_type)
            .field("public", &hex::encode(&self.public))
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Fresh key with the default scheme.
    pub fn generate(id: impl Into<String>) -> Self {
        let (secret, public) = Ed25519.generate();
        KeyPair {
            id: id.into(),
            key_type: ED25519.to_owned(),
            public,
            secret,
        }
    }

    /// Deterministic Ed25519 key from a 32-byte seed.
    pub fn from_seed(id: impl Into<String>, seed: [u8; 32]) -> Self {
        let public = Ed25519.public_from_secret(&seed).expect("32-byte seed");
        KeyPair {
            id: id.into(),
            key_type: ED25519.to_owned(),
            public,
            secret: seed.to_vec(),
        }
    }

    pub fn sign(&self, message: &[u8]) -> SignatureBytes {
        let scheme = schemes().get(&self.key_type).expect("key type registered");
        SignatureBytes(scheme.sign(&self.secret, message).expect("valid secret"))
    }

    /// Same key material under a different id.
    pub fn renamed(&self, id: impl Into<String>) -> Self {
        KeyPair {
            id: id.into(),
            ..self.clone()
        }
    }
}

/// Verifies with whichever registered scheme matches `key_type`.
pub fn verify_signature(
    key_type: &str,
    public: &[u8],
    message: &[u8],
    signature: &SignatureBytes,
) -> bool {
    schemes()
        .get(key_type)
        .is_some_and(|s| s.verify(public, message, &signature.0))
}

//! Decentralised public key infrastructure over a simulated proof-of-work
//! timestamped DID registry.
//!
//! - [`registry`]: content-addressed store plus an append-only PoW block chain.
//! - [`anchor`]: batching DID operations into index files, anchoring, and folding the chain into state.
//! - [`didcore`]: documents, identifiers, commitment-guarded operations.
//! - [`attestation`]: downstream DID issuance and chain verification.
//! - [`roottrust`]: root DIDs, confirmation codes, timestamp verification, attack cost.
//! - [`lightclient`]: header-only verification against untrusted servers.
//! - [`credential`]: signed claims verified against the trust chain.

pub mod anchor;
pub mod attestation;
pub mod canonical;
pub mod credential;
pub mod didcore;
pub mod hash;
pub mod lightclient;
pub mod registry;
pub mod roottrust;
pub mod source;
pub mod strategy;

pub use anchor::Ledger;
pub use didcore::{Did, DidDocument};
pub use hash::Hash256;
pub use registry::{ChainParams, Registry};

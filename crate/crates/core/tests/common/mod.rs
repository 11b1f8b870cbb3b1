#![allow(dead_code)]

use trustchain_core::anchor::Ledger;
use trustchain_core::attestation::{
    fresh_enrollment, issue_to, verify_did, ChainFailure, Identity, TimestampScope, VerifiedDid,
};
use trustchain_core::didcore::{DidDocument, KeyPair};
use trustchain_core::registry::{BlockHeader, ChainParams, Registry};
use trustchain_core::roottrust::{publish_root, RootParameters};
use trustchain_core::Did;

/// 2023-11-14 00:00:00 UTC.
pub const DAY_START: u32 = 1_699_920_000;
/// Noon on the root publication day.
pub const ROOT_TIME: u32 = DAY_START + 43_200;
pub const DAY: u32 = 86_400;
/// Low difficulty for tests that mine many blocks; the acceptance suite uses the default.
pub const TEST_BITS: u32 = 8;

pub fn ledger(chain_id: &str, bits: u32) -> Ledger {
    let params = ChainParams::new(chain_id)
        .with_bits(bits)
        .with_genesis_time(DAY_START - 10 * DAY);
    Ledger::new(Registry::in_memory(params).unwrap())
}

/// A registry with a published root and the identities issued under it.
pub struct Net {
    pub ledger: Ledger,
    pub ids: Vec<Identity>,
    pub params: RootParameters,
    pub clock: u32,
}

impl Net {
    pub fn new(chain_id: &str, bits: u32) -> Net {
        Net::at(chain_id, bits, ROOT_TIME)
    }

    pub fn at(chain_id: &str, bits: u32, root_time: u32) -> Net {
        let mut ledger = ledger(chain_id, bits);
        let keys = vec![KeyPair::generate("root-key")];
        let root = publish_root(&mut ledger, DidDocument::with_keys(&keys), root_time).unwrap();
        let params = root.params.clone();
        let id = Identity::from_root(&root, keys);
        Net {
            ledger,
            ids: vec![id],
            params,
            clock: root_time,
        }
    }

    pub fn tick(&mut self) -> u32 {
        self.clock += 600;
        self.clock
    }

    pub fn root(&self) -> &Did {
        &self.ids[0].did
    }

    pub fn did(&self, i: usize) -> Did {
        self.ids[i].did.clone()
    }

    /// Issues a fresh DID under identity `upstream`; returns its index.
    pub fn issue(&mut self, upstream: usize, max_chain_length: Option<u32>) -> usize {
        let t = self.tick();
        let id = issue_to(
            &mut self.ledger,
            &mut self.ids[upstream],
            fresh_enrollment(),
            max_chain_length,
            t,
        )
        .unwrap();
        self.ids.push(id);
        self.ids.len() - 1
    }

    pub fn headers(&self) -> Vec<BlockHeader> {
        self.ledger.registry().headers()
    }

    /// Full-node verification against this network's root parameters.
    pub fn verify(&self, i: usize) -> Result<VerifiedDid, ChainFailure> {
        self.verify_did(&self.ids[i].did)
    }

    pub fn verify_did(&self, did: &Did) -> Result<VerifiedDid, ChainFailure> {
        verify_did(
            &self.ledger.source(),
            did,
            &self.params,
            self.ledger.registry(),
            TimestampScope::RootOnly,
        )
    }
}

use trustchain_core::anchor::{ChunkFile, VerificationBundle};
use trustchain_core::didcore::{DidOperation, Secret, Service};
use trustchain_core::registry::{MerkleProof, Transaction};
use trustchain_core::roottrust::{verify_timestamp, TimestampStep};

fn create_op(keys: usize, services: usize, update: &Secret) -> DidOperation {
    let keys: Vec<KeyPair> = (0..keys)
        .map(|i| KeyPair::generate(format!("key-{i}")))
        .collect();
    let services = (0..services)
        .map(|i| {
            Service::uri(
                format!("svc-{i}"),
                "TrustchainHTTP",
                format!("https://node{i}.example.org/api"),
            )
        })
        .collect();
    DidOperation::Create {
        document: DidDocument::new(keys.iter().map(Into::into).collect(), services),
        update_commitment: update.commitment(),
        recovery_commitment: Secret::random().commitment(),
    }
}

fn filler() -> Transaction {
    Transaction::with_random_nonce(b"unrelated payload".to_vec()).unwrap()
}

/// Five DIDs anchored across three blocks alongside filler transactions;
/// the first DID is updated in the last block.
pub fn tamper_fixture(bits: u32) -> (Ledger, Vec<Did>) {
    let mut ledger = ledger("tamper", bits);
    let secrets: Vec<Secret> = (0..5).map(|_| Secret::random()).collect();
    let ops: Vec<DidOperation> = (0..5)
        .map(|i| create_op(1 + i % 3, i % 2 + 1, &secrets[i]))
        .collect();
    let dids: Vec<Did> = ops.iter().map(|op| op.target_did().unwrap()).collect();
    let mut t = ROOT_TIME;

    let b1 = ledger
        .prepare(vec![ops[0].clone(), ops[1].clone()])
        .unwrap();
    ledger
        .mine(vec![filler(), b1.transaction, filler()], t)
        .unwrap();
    t += 600;
    let b2 = ledger.prepare(vec![ops[2].clone()]).unwrap();
    let b3 = ledger.prepare(vec![ops[3].clone()]).unwrap();
    ledger
        .mine(vec![b2.transaction, filler(), b3.transaction], t)
        .unwrap();
    t += 600;
    let updated = DidDocument::with_keys(&[KeyPair::generate("key-new")]);
    let update = DidOperation::Update {
        did: dids[0].clone(),
        document: updated,
        reveal: secrets[0].clone(),
        next_update_commitment: Secret::random().commitment(),
    };
    let b4 = ledger.prepare(vec![ops[4].clone(), update]).unwrap();
    ledger
        .mine(
            vec![filler(), filler(), b4.transaction, filler(), filler()],
            t,
        )
        .unwrap();
    (ledger, dids)
}

#[derive(Debug, Default)]
pub struct HarnessResult {
    pub mutations: usize,
    pub false_accepts: usize,
    pub false_rejects: usize,
    pub wrong_step: Vec<String>,
}

impl HarnessResult {
    pub fn clean(&self) -> bool {
        self.false_accepts == 0 && self.false_rejects == 0 && self.wrong_step.is_empty()
    }
}

/// Which component of a bundle a mutation hits.
#[derive(Debug, Clone, Copy)]
pub enum Part {
    Document,
    Chunk,
    Provisional,
    Core,
    Transaction,
    Proof,
    Header,
}

fn part_bytes(b: &mut VerificationBundle, part: Part) -> &mut Vec<u8> {
    match part {
        Part::Document => b.document.as_mut().unwrap(),
        Part::Chunk => &mut b.chunk,
        Part::Provisional => &mut b.provisional_index,
        Part::Core => &mut b.core_index,
        Part::Transaction => &mut b.transaction,
        Part::Proof => &mut b.merkle_proof,
        Part::Header => &mut b.header,
    }
}

/// The step a single-byte mutation must fail at, judged from where the byte
/// sits and what it now parses to.
fn expected_step(part: Part, index: usize, mutated: &VerificationBundle) -> TimestampStep {
    use TimestampStep::*;
    match part {
        Part::Document => DocumentInChunk,
        Part::Chunk => {
            let document = mutated
                .document
                .as_ref()
                .map(|d| serde_json::from_slice::<DidDocument>(d).unwrap());
            let still_present = ChunkFile::from_bytes(&mutated.chunk).is_ok_and(|c| {
                c.operations.iter().any(|op| {
                    op.target_did().is_ok_and(|t| t == mutated.did)
                        && op.resulting_document().is_ok_and(|r| r == document)
                })
            });
            if still_present {
                ChunkHash
            } else {
                DocumentInChunk
            }
        }
        Part::Provisional => ChunkHash,
        Part::Core => ProvisionalHash,
        Part::Transaction if index < 8 => TransactionLeaf,
        Part::Transaction => CoreInTransaction,
        Part::Proof if index < 32 || MerkleProof::from_bytes(&mutated.merkle_proof).is_err() => {
            TransactionLeaf
        }
        Part::Proof => MerkleRoot,
        Part::Header if (36..68).contains(&index) => MerkleRoot,
        Part::Header if (68..72).contains(&index) => Timestamp,
        Part::Header => HeaderTrusted,
    }
}

pub const PARTS: [Part; 7] = [
    Part::Document,
    Part::Chunk,
    Part::Provisional,
    Part::Core,
    Part::Transaction,
    Part::Proof,
    Part::Header,
];

/// Flips each byte of every bundle component two ways (xor 0x01, xor 0x80),
/// plus the stated height, and checks each mutation fails at the expected step.
pub fn tamper_harness(ledger: &Ledger, dids: &[Did]) -> HarnessResult {
    let headers = ledger.registry();
    let mut result = HarnessResult::default();
    for did in dids {
        let honest = ledger.verification_data(did).unwrap();
        let claimed = ledger.resolve(did).unwrap().metadata.timestamp();
        if verify_timestamp(&honest, claimed, headers).is_err() {
            result.false_rejects += 1;
        }
        match verify_timestamp(&honest, claimed + 1, headers) {
            Err(f) if f.step == TimestampStep::Timestamp => {}
            other => result
                .wrong_step
                .push(format!("{did} claimed+1: {other:?}")),
        }
        for part in PARTS {
            let len = part_bytes(&mut honest.clone(), part).len();
            for index in 0..len {
                for mask in [0x01u8, 0x80] {
                    let mut mutated = honest.clone();
                    part_bytes(&mut mutated, part)[index] ^= mask;
                    result.mutations += 1;
                    let expected = expected_step(part, index, &mutated);
                    match verify_timestamp(&mutated, claimed, headers) {
                        Ok(_) => result.false_accepts += 1,
                        Err(f) if f.step == expected => {}
                        Err(f) => result.wrong_step.push(format!(
                            "{part:?}[{index}]^{mask:#04x}: expected {expected}, got {f}"
                        )),
                    }
                }
            }
        }
        for height in [honest.height - 1, honest.height + 1, honest.height + 1000] {
            let mut mutated = honest.clone();
            mutated.height = height;
            result.mutations += 1;
            match verify_timestamp(&mutated, claimed, headers) {
                Ok(_) => result.false_accepts += 1,
                Err(f) if f.step == TimestampStep::HeaderTrusted => {}
                Err(f) => result.wrong_step.push(format!("height {height}: {f}")),
            }
        }
    }
    result
}

/// Anchors `n` unattested DIDs in one batch at `timestamp`.
pub fn anchor_fake_roots(ledger: &mut Ledger, n: usize, timestamp: u32) -> Vec<Did> {
    let ops: Vec<DidOperation> = (0..n).map(|_| create_op(1, 0, &Secret::random())).collect();
    let dids = ops.iter().map(|op| op.target_did().unwrap()).collect();
    ledger.anchor(ops, timestamp).unwrap();
    dids
}

/// Anchors a DID attested by `upstream` without any issuance-time checks.
pub fn forge_attested(
    ledger: &mut Ledger,
    upstream: &Identity,
    max_chain_length: Option<u32>,
    timestamp: u32,
) -> Identity {
    let enrollment = trustchain_core::attestation::fresh_enrollment();
    let update = Secret::random();
    let recovery = enrollment.recovery_secret.commitment();
    let did =
        trustchain_core::didcore::derive_did(&enrollment.document, &update.commitment(), &recovery)
            .unwrap();
    let key = &upstream.keys[0];
    let proof = trustchain_core::didcore::AttestationProof::sign(
        &enrollment.document.with_id(&did),
        &upstream.did,
        key,
        max_chain_length,
    )
    .unwrap();
    let mut document = enrollment.document.clone();
    document
        .services
        .push(trustchain_core::didcore::proof_service(&[proof]));
    ledger
        .anchor(
            vec![DidOperation::Create {
                document,
                update_commitment: update.commitment(),
                recovery_commitment: recovery,
            }],
            timestamp,
        )
        .unwrap();
    enrollment.into_identity(did)
}

impl Net {
    /// Publishes another root on the same registry; returns its index and parameters.
    pub fn add_root(&mut self) -> (usize, RootParameters) {
        let t = self.tick();
        let keys = vec![KeyPair::generate("root-key")];
        let root = publish_root(&mut self.ledger, DidDocument::with_keys(&keys), t).unwrap();
        self.ids.push(Identity::from_root(&root, keys));
        (self.ids.len() - 1, root.params)
    }

    pub fn verify_under(
        &self,
        i: usize,
        params: &RootParameters,
    ) -> Result<VerifiedDid, ChainFailure> {
        verify_did(
            &self.ledger.source(),
            &self.ids[i].did,
            params,
            self.ledger.registry(),
            TimestampScope::RootOnly,
        )
    }
}

use chrono::NaiveDate;
use trustchain_core::anchor::Resolution;
use trustchain_core::roottrust::RootCandidate;
use trustchain_core::source::{DidSource, LocalSource, NodeApi, SourceError};

type Edit<'a, T> = Box<dyn Fn(&mut T) + Send + Sync + 'a>;

/// A server that answers honestly except where an edit rewrites its answer
/// about `target` (or every header it serves).
pub struct Malicious<'a> {
    pub inner: LocalSource<'a>,
    pub target: Did,
    pub on_resolve: Option<Edit<'a, Resolution>>,
    pub on_bundle: Option<Edit<'a, VerificationBundle>>,
    pub on_headers: Option<Edit<'a, Vec<BlockHeader>>>,
}

impl<'a> Malicious<'a> {
    pub fn new(inner: LocalSource<'a>, target: Did) -> Self {
        Malicious {
            inner,
            target,
            on_resolve: None,
            on_bundle: None,
            on_headers: None,
        }
    }

    pub fn resolve_with(mut self, f: impl Fn(&mut Resolution) + Send + Sync + 'a) -> Self {
        self.on_resolve = Some(Box::new(f));
        self
    }

    pub fn bundle_with(mut self, f: impl Fn(&mut VerificationBundle) + Send + Sync + 'a) -> Self {
        self.on_bundle = Some(Box::new(f));
        self
    }

    pub fn headers_with(mut self, f: impl Fn(&mut Vec<BlockHeader>) + Send + Sync + 'a) -> Self {
        self.on_headers = Some(Box::new(f));
        self
    }

    fn edit_resolution(&self, did: &Did, mut r: Resolution) -> Resolution {
        if *did == self.target {
            if let Some(f) = &self.on_resolve {
                f(&mut r);
            }
        }
        r
    }
}

impl DidSource for Malicious<'_> {
    fn resolve(&self, did: &Did) -> Result<Resolution, SourceError> {
        Ok(self.edit_resolution(did, self.inner.resolve(did)?))
    }

    fn resolve_at(&self, did: &Did, time: u32) -> Result<Resolution, SourceError> {
        Ok(self.edit_resolution(did, self.inner.resolve_at(did, time)?))
    }

    fn bundle(&self, did: &Did) -> Result<VerificationBundle, SourceError> {
        let mut b = self.inner.bundle(did)?;
        if *did == self.target {
            if let Some(f) = &self.on_bundle {
                f(&mut b);
            }
        }
        Ok(b)
    }

    fn root_candidates(&self, date: NaiveDate) -> Result<Vec<RootCandidate>, SourceError> {
        self.inner.root_candidates(date)
    }

    fn aliases(&self, did: &Did) -> Result<Vec<Did>, SourceError> {
        self.inner.aliases(did)
    }
}

impl NodeApi for Malicious<'_> {
    fn headers(&self, from_height: u64) -> Result<Vec<BlockHeader>, SourceError> {
        let mut h = self.inner.headers(from_height)?;
        if let Some(f) = &self.on_headers {
            f(&mut h);
        }
        Ok(h)
    }
}

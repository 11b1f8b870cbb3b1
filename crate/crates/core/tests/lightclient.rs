mod common;

use common::{Malicious, Net, TEST_BITS};
use trustchain_core::anchor::RegistryState;
use trustchain_core::attestation::{revoke_ddid, ChainFailure};
use trustchain_core::didcore::{DidStatus, KeyPair, VerificationMethod};
use trustchain_core::lightclient::*;
use trustchain_core::registry::{genesis_hash, Transaction};
use trustchain_core::source::{DidSource, LocalSource, NodeApi};

fn synced(net: &Net) -> HeaderChain {
    let mut headers = HeaderChain::new(Some(genesis_hash(net.ledger.registry().params()).unwrap()));
    headers.sync(&net.ledger.source()).unwrap();
    headers
}

fn tree() -> (Net, usize) {
    let mut net = Net::new("light", TEST_BITS);
    let a = net.issue(0, None);
    let b = net.issue(a, None);
    let c = net.issue(b, None);
    (net, c)
}

#[test]
fn light_client_agrees_with_full_node() {
    let (net, c) = tree();
    let headers = synced(&net);
    assert_eq!(headers.len() as u64, net.ledger.registry().height() + 1);
    let light = stv_verify(&net.ledger.source(), &headers, &net.did(c), &net.params).unwrap();
    let full = net.verify(c).unwrap();
    assert_eq!(light.chain, full.chain);
    assert_eq!(light.root, full.root);
}

#[test]
fn stale_headers_report_a_gap() {
    let mut net = Net::new("light-gap", TEST_BITS);
    let headers = synced(&net);
    let a = net.issue(0, None);
    let err = stv_verify(&net.ledger.source(), &headers, &net.did(a), &net.params).unwrap_err();
    let tip = net.ledger.registry().height();
    assert!(
        matches!(err, LightClientError::HeaderGap { needed, have: Some(h) } if needed == tip && h == tip - 1),
        "{err:?}"
    );
}

#[test]
fn forged_headers_are_refused_whole() {
    let (net, _) = tree();
    let mut headers = HeaderChain::new(None);
    let forger =
        Malicious::new(net.ledger.source(), net.did(0)).headers_with(|h| h[3].pow_nonce ^= 1);
    assert!(matches!(
        headers.sync(&forger),
        Err(LightClientError::InvalidHeaders(_))
    ));
    assert!(headers.is_empty());

    let wrong_genesis =
        genesis_hash(&trustchain_core::ChainParams::new("other").with_bits(TEST_BITS)).unwrap();
    let mut pinned = HeaderChain::new(Some(wrong_genesis));
    assert!(matches!(
        pinned.sync(&net.ledger.source()),
        Err(LightClientError::InvalidHeaders(_))
    ));
}

#[test]
fn tampered_answers_are_rejected() {
    let (net, c) = tree();
    let headers = synced(&net);
    let source = net.ledger.source();
    let leaf = net.did(c);
    let attacker = KeyPair::generate("key-1");
    let mid = net.did(2);
    let other = source.bundle(&mid).unwrap();

    let attacks: Vec<(&str, Malicious)> = vec![
        (
            "substituted leaf key",
            Malicious::new(source, leaf.clone()).resolve_with(move |r| {
                r.document.as_mut().unwrap().verification_methods =
                    vec![VerificationMethod::from(&attacker)];
            }),
        ),
        (
            "attestations stripped",
            Malicious::new(source, leaf.clone()).resolve_with(|r| r.metadata.attestations.clear()),
        ),
        (
            "bundle document flipped",
            Malicious::new(source, leaf.clone())
                .bundle_with(|b| b.document.as_mut().unwrap()[10] ^= 1),
        ),
        (
            "bundle header flipped",
            Malicious::new(source, mid.clone()).bundle_with(|b| b.header[40] ^= 1),
        ),
        (
            "bundle height shifted",
            Malicious::new(source, mid.clone()).bundle_with(|b| b.height -= 1),
        ),
        (
            "mid-chain timestamp moved",
            Malicious::new(source, mid.clone()).resolve_with(|r| r.metadata.created -= 600),
        ),
        (
            "bundle from another DID",
            Malicious::new(source, leaf.clone()).bundle_with(move |b| *b = other.clone()),
        ),
    ];
    for (name, server) in &attacks {
        assert!(
            stv_verify(server, &headers, &leaf, &net.params).is_err(),
            "{name} accepted"
        );
    }
    assert!(stv_verify(&source, &headers, &leaf, &net.params).is_ok());
}

#[test]
fn header_store_is_80_bytes_per_block() {
    let mut net = Net::new("light-store", TEST_BITS);
    for _ in 0..999 {
        let t = net.tick();
        net.ledger
            .mine(
                vec![Transaction::with_random_nonce(b"filler".to_vec()).unwrap()],
                t,
            )
            .unwrap();
    }
    let headers = synced(&net);
    assert_eq!(headers.len(), 1001);
    let bytes = headers.to_bytes();
    assert_eq!(bytes.len(), 80 * 1001);
    assert!(bytes.len() <= 84 * 1024);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("headers.bin");
    headers.save(&path).unwrap();
    let genesis = genesis_hash(net.ledger.registry().params()).ok();
    assert_eq!(HeaderChain::load(&path, genesis).unwrap(), headers);
    assert!(HeaderChain::load(&dir.path().join("absent.bin"), genesis)
        .unwrap()
        .is_empty());
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(
        HeaderChain::load(&path, genesis),
        Err(LightClientError::CorruptStore(_))
    ));
    let mut flipped = bytes.clone();
    flipped[80 * 500 + 5] ^= 1;
    std::fs::write(&path, &flipped).unwrap();
    assert!(matches!(
        HeaderChain::load(&path, genesis),
        Err(LightClientError::CorruptStore(_))
    ));
}

#[test]
fn multi_server_prefers_deactivation_and_flags_omission() {
    let mut net = Net::new("light-multi", TEST_BITS);
    let a = net.issue(0, None);
    let a_did = net.did(a);
    let before = RegistryState::scan(net.ledger.registry());
    let t = net.tick();
    revoke_ddid(&mut net.ledger, &mut net.ids[0], &a_did, t).unwrap();
    let headers = synced(&net);

    let honest = net.ledger.source();
    let lagging = LocalSource::new(net.ledger.registry(), &before);
    let liar = Malicious::new(honest, a_did.clone()).bundle_with(|b| b.chunk[3] ^= 1);

    let agreed = multi_server_resolve(&[&honest, &honest], &headers, &a_did, 2).unwrap();
    assert_eq!(agreed.resolution.status, DidStatus::Deactivated);
    assert!(!agreed.omission_suspected);

    for order in [[&lagging as &dyn NodeApi, &honest], [&honest, &lagging]] {
        let r = multi_server_resolve(&order, &headers, &a_did, 2).unwrap();
        assert_eq!(r.resolution.status, DidStatus::Deactivated);
        assert!(r.omission_suspected);
    }

    let r = multi_server_resolve(&[&liar, &lagging], &headers, &a_did, 1).unwrap();
    assert_eq!(r.resolution.status, DidStatus::Active);
    assert!(r.reports[0].error.is_some());
    assert!(matches!(
        multi_server_resolve(&[&liar, &lagging], &headers, &a_did, 2),
        Err(LightClientError::QuorumUnreachable {
            responses: 1,
            quorum: 2
        })
    ));
}

#[test]
fn revoked_link_fails_for_light_client_too() {
    let (mut net, c) = tree();
    let b_did = net.did(2);
    let t = net.tick();
    revoke_ddid(&mut net.ledger, &mut net.ids[1], &b_did, t).unwrap();
    let headers = synced(&net);
    let err = stv_verify(&net.ledger.source(), &headers, &net.did(c), &net.params).unwrap_err();
    assert!(
        matches!(
            err,
            LightClientError::Chain(ChainFailure::Deactivated { link: 2, .. })
        ),
        "{err:?}"
    );
}

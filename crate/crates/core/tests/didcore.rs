use std::collections::HashSet;

use proptest::prelude::*;
use serde_json::{json, Value};
use trustchain_core::canonical::{from_canonical, to_canonical};
use trustchain_core::didcore::*;

fn arb_json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|n| json!(n)),
        "\\PC{0,12}".prop_map(Value::String),
    ];
    leaf.prop_recursive(4, 32, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(Value::Array),
            prop::collection::btree_map("\\PC{0,8}", inner, 0..6)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn arb_document() -> impl Strategy<Value = DidDocument> {
    (
        prop::collection::btree_set("[a-z]{1,8}", 1..4),
        prop::collection::vec("[a-z]{1,8}", 0..3),
        any::<u64>(),
    )
        .prop_map(|(key_ids, service_ids, seed)| {
            let keys: Vec<VerificationMethod> = key_ids
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    let mut s = [0u8; 32];
                    s[..8].copy_from_slice(&seed.to_le_bytes());
                    s[8] = i as u8;
                    (&KeyPair::from_seed(id.clone(), s)).into()
                })
                .collect();
            let services: Vec<Service> = service_ids
                .iter()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .map(|id| {
                    Service::uri(
                        id.clone(),
                        "TrustchainHTTP",
                        format!("https://{id}.example.org"),
                    )
                })
                .collect();
            DidDocument::new(keys, services)
        })
}

fn bits_differing(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

proptest! {
    #[test]
    fn canonical_json_round_trips(value in arb_json()) {
        let bytes = to_canonical(&value).unwrap();
        let parsed: Value = from_canonical(&bytes).unwrap();
        prop_assert_eq!(to_canonical(&parsed).unwrap(), bytes);
    }

    #[test]
    fn pretty_printed_json_is_not_canonical(value in arb_json()) {
        let pretty = serde_json::to_vec_pretty(&value).unwrap();
        let canonical = to_canonical(&value).unwrap();
        prop_assert_eq!(from_canonical::<Value>(&pretty).is_ok(), pretty == canonical);
    }

    #[test]
    fn key_order_does_not_change_document_hash(doc in arb_document()) {
        let canonical = canonicalize(&doc).unwrap();
        let reparsed: DidDocument = serde_json::from_str(&serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        prop_assert_eq!(canonicalize(&reparsed).unwrap(), canonical);
    }

    #[test]
    fn did_is_well_formed_and_parses(doc in arb_document(), u in any::<[u8; 32]>(), r in any::<[u8; 32]>()) {
        let did = derive_did(&doc, &Secret::from_bytes(&u).unwrap().commitment(), &Secret::from_bytes(&r).unwrap().commitment()).unwrap();
        prop_assert_eq!(did.as_str().len(), 7 + 52);
        prop_assert_eq!(did.as_str().parse::<Did>().unwrap(), did.clone());
        prop_assert_eq!(derive_did(&doc.with_id(&did), &Secret::from_bytes(&u).unwrap().commitment(), &Secret::from_bytes(&r).unwrap().commitment()).unwrap(), did);
    }

    #[test]
    fn transform_is_idempotent_and_inverts_embedding(doc in arb_document(), max in proptest::option::of(1u32..10)) {
        let key = KeyPair::from_seed("k", [5; 32]);
        let upstream = derive_did(&DidDocument::with_keys(std::slice::from_ref(&key)), &trustchain_core::Hash256::ZERO, &trustchain_core::Hash256::ZERO).unwrap();
        let proof = AttestationProof::sign(&doc, &upstream, &key, max).unwrap();
        let mut embedded = doc.clone();
        embedded.services.push(proof_service(std::slice::from_ref(&proof)));
        let (body, proofs) = transform_proof_service(&embedded).unwrap();
        prop_assert_eq!(&body, &doc);
        prop_assert_eq!(proofs, vec![proof]);
        let (again, none) = transform_proof_service(&body).unwrap();
        prop_assert_eq!(again, body);
        prop_assert!(none.is_empty());
    }
}

#[test]
fn single_bit_flips_in_documents_avalanche() {
    let doc = DidDocument::with_keys(&[KeyPair::from_seed("key-1", [1; 32])]);
    let canonical = canonicalize(&doc).unwrap();
    let base = trustchain_core::hash::sha256(&canonical);
    let mut total = 0u64;
    let mut count = 0u64;
    for byte in 0..canonical.len() {
        for bit in 0..8 {
            let mut m = canonical.clone();
            m[byte] ^= 1 << bit;
            let d = bits_differing(&trustchain_core::hash::sha256(&m).0, &base.0);
            assert!(d > 64, "byte {byte} bit {bit}: only {d} bits changed");
            total += u64::from(d);
            count += 1;
        }
    }
    let mean = total as f64 / count as f64;
    assert!((mean - 128.0).abs() < 4.0, "mean {mean}");
}

#[test]
fn ten_thousand_commitments_are_distinct() {
    let set: HashSet<_> = (0..10_000).map(|_| Secret::random().commitment()).collect();
    assert_eq!(set.len(), 10_000);
    assert!(check_reveal(&[3; 32], &make_commitment(&[3; 32]).unwrap()));
    assert!(!check_reveal(&[3; 31], &make_commitment(&[3; 32]).unwrap()));
    assert!(make_commitment(&[0; 16]).is_err());
}

#[test]
fn recovery_overrides_update_holder() {
    let (update, recovery) = (
        Secret::from_bytes(&[1; 32]).unwrap(),
        Secret::from_bytes(&[2; 32]).unwrap(),
    );
    let create = DidOperation::Create {
        document: DidDocument::with_keys(&[KeyPair::from_seed("key-1", [3; 32])]),
        update_commitment: update.commitment(),
        recovery_commitment: recovery.commitment(),
    };
    let did = create.target_did().unwrap();
    let s0 = apply_operation(None, &create, 100).unwrap();

    let taken = DidDocument::with_keys(&[KeyPair::from_seed("attacker", [4; 32])]);
    let attacker_next = Secret::from_bytes(&[5; 32]).unwrap();
    let hijack = DidOperation::Update {
        did: did.clone(),
        document: taken,
        reveal: update,
        next_update_commitment: attacker_next.commitment(),
    };
    let s1 = apply_operation(Some(&s0), &hijack, 200).unwrap();

    let restored = DidDocument::with_keys(&[KeyPair::from_seed("key-2", [6; 32])]);
    let next_update = Secret::from_bytes(&[7; 32]).unwrap();
    let recover = DidOperation::Recover {
        did: did.clone(),
        document: restored.clone(),
        reveal: recovery.clone(),
        next_update_commitment: next_update.commitment(),
        next_recovery_commitment: Secret::from_bytes(&[8; 32]).unwrap().commitment(),
    };
    let s2 = apply_operation(Some(&s1), &recover, 300).unwrap();
    assert_eq!(s2.document, Some(restored.with_id(&did)));

    let stale = DidOperation::Deactivate {
        did: did.clone(),
        reveal: attacker_next,
    };
    assert_eq!(
        apply_operation(Some(&s2), &stale, 400),
        Err(DidError::InvalidReveal(did.clone()))
    );
    let reused = DidOperation::Recover {
        did: did.clone(),
        document: restored,
        reveal: recovery,
        next_update_commitment: next_update.commitment(),
        next_recovery_commitment: next_update.commitment(),
    };
    assert_eq!(
        apply_operation(Some(&s2), &reused, 400),
        Err(DidError::InvalidReveal(did))
    );
}

#[test]
fn malformed_documents_rejected() {
    let key = KeyPair::from_seed("key-1", [1; 32]);
    let dup = DidDocument::with_keys(&[key.clone(), key.clone()]);
    assert!(canonicalize(&dup).is_err());
    let mut two_proofs = DidDocument::with_keys(std::slice::from_ref(&key));
    let proof = AttestationProof::sign(
        &two_proofs,
        &"did:tc:0000000000000000000000000000000000000000000000000000"
            .parse()
            .unwrap(),
        &key,
        None,
    )
    .unwrap();
    two_proofs.services.push(proof_service(std::slice::from_ref(&proof)));
    two_proofs.services.push(proof_service(&[proof]));
    assert_eq!(
        transform_proof_service(&two_proofs).unwrap_err(),
        DidError::DuplicateProofService
    );
    let mut bad_payload = DidDocument::with_keys(&[key]);
    bad_payload.services.push(Service::uri(
        PROOF_SERVICE_ID,
        PROOF_SERVICE_ID,
        "https://x",
    ));
    assert!(matches!(
        transform_proof_service(&bad_payload),
        Err(DidError::MalformedProofPayload(_))
    ));
    for bad in [
        "did:tc:",
        "did:web:abc",
        "did:tc:0000000000000000000000000000000000000000000000000000u",
        "did:tc:000000000000000000000000000000000000000000000000000I",
    ] {
        assert!(bad.parse::<Did>().is_err(), "{bad}");
    }
}

#[test]
fn signature_scheme_registry() {
    let registry = default_schemes();
    assert!(registry.get(ED25519).is_some());
    assert!(registry.get("RSA").is_none());
    let key = KeyPair::from_seed("k", [1; 32]);
    let sig = key.sign(b"m");
    assert!(verify_signature(ED25519, &key.public, b"m", &sig));
    assert!(!verify_signature(ED25519, &key.public, b"n", &sig));
    assert!(!verify_signature("RSA", &key.public, b"m", &sig));
}

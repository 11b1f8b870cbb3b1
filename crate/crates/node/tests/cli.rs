use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trustchain(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustchain"))
        .env_remove("TRUSTCHAIN_DATA_DIR")
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = trustchain(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn wire_error(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("not a wire error: {}", String::from_utf8_lossy(&out.stderr)))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim().to_owned()
}

fn init(dir: &Path) {
    ok_json(dir, &["--bits", "8", "init"]);
}

#[test]
fn cost_of_one_hour_at_reference_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = trustchain(dir.path(), &["cost", "estimate", "--elapsed", "1h"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "700000 USD");
    let out = trustchain(dir.path(), &["cost", "estimate", "--target", "700000"]);
    assert_eq!(stdout(&out), "1h");
    let out = trustchain(dir.path(), &["cost", "estimate", "--elapsed", "30m", "--hash-rate", "600"]);
    assert_eq!(stdout(&out), "700000 USD");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(trustchain(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(trustchain(dir.path(), &["cost", "estimate"]).status.code(), Some(2));
    assert_eq!(trustchain(dir.path(), &["--help"]).status.code(), Some(0));
    init(dir.path());
    let did = ok_json(dir.path(), &["root", "publish", "--name", "gov"])["did"].as_str().unwrap().to_owned();
    let out = trustchain(dir.path(), &["root", "verify", &did, "--root", "yesterday"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(wire_error(&out)["code"], "usage");
}

#[test]
fn commands_before_init_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = trustchain(dir.path(), &["mine"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(wire_error(&out)["code"], "not-initialized");
}

#[test]
fn root_publish_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    init(dir.path());
    let published = ok_json(dir.path(), &["root", "publish", "--name", "gov"]);
    let did = published["did"].as_str().unwrap();
    let root = published["root"].as_str().unwrap();
    let (date, code) = root.split_once(':').unwrap();
    assert_eq!(code.len(), 6);

    let verified = ok_json(dir.path(), &["root", "verify", did, "--root", root]);
    assert_eq!(verified["code"], code);
    assert!(verified.get("warning").is_none());

    let split = ok_json(dir.path(), &["root", "verify", did, "--date", date, "--code", code]);
    assert_eq!(split, verified);
    assert_eq!(trustchain(dir.path(), &["root", "verify", did, "--code", code]).status.code(), Some(2));

    let date_only = ok_json(dir.path(), &["root", "verify", did, "--root", date]);
    assert!(date_only["warning"].is_string());

    let wrong = format!("{date}:{}", if code.starts_with('a') { "bbbbbb" } else { "aaaaaa" });
    let out = trustchain(dir.path(), &["root", "verify", did, "--root", &wrong]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(wire_error(&out)["code"], "code-mismatch");

    let candidates = ok_json(dir.path(), &["root", "scan-date", date]);
    assert_eq!(candidates[0]["did"], did);
}

#[test]
fn masqueraded_credential_fails_at_signature_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init(d);
    let root = ok_json(d, &["root", "publish", "--name", "gov"])["root"].as_str().unwrap().to_owned();
    ok_json(d, &["ddid", "enroll", "--name", "issuer"]);
    let out = trustchain(d, &["ddid", "issue", "--upstream", "gov", "--subject", "issuer"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(wire_error(&out)["code"], "identity-not-verified");
    ok_json(d, &["ddid", "issue", "--upstream", "gov", "--subject", "issuer", "--identity-verified"]);

    let file = d.join("vc.json");
    let out = trustchain(d, &["vc", "issue", "--issuer", "issuer", "--claim", "name=Alice", "--out", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let verified = ok_json(d, &["vc", "verify", file.to_str().unwrap(), "--root", &root]);
    assert_eq!(verified["chain"].as_array().unwrap().len(), 2);

    let mut credential: Value = serde_json::from_slice(&std::fs::read(&file).unwrap()).unwrap();
    credential["claims"]["name"] = "Mallory".into();
    let forged = d.join("forged.json");
    std::fs::write(&forged, credential.to_string()).unwrap();
    let out = trustchain(d, &["vc", "verify", forged.to_str().unwrap(), "--root", &root]);
    assert_eq!(out.status.code(), Some(1));
    let err = wire_error(&out);
    assert_eq!(err["code"], "credential-rejected");
    assert_eq!(err["step"], "iv");
}

#[test]
fn revocation_respects_policy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init(d);
    let root = ok_json(d, &["root", "publish", "--name", "gov"])["root"].as_str().unwrap().to_owned();
    ok_json(d, &["ddid", "enroll", "--name", "issuer"]);
    ok_json(d, &["ddid", "issue", "--upstream", "gov", "--subject", "issuer", "--identity-verified"]);
    let file = d.join("vc.json");
    trustchain(d, &["vc", "issue", "--issuer", "issuer", "--claim", "k=v", "--out", file.to_str().unwrap()]);
    assert_eq!(ok_json(d, &["ddid", "revoke", "--subject", "issuer"])["revokedBy"], "gov");

    let out = trustchain(d, &["vc", "verify", file.to_str().unwrap(), "--root", &root]);
    assert_eq!(wire_error(&out)["step"], "i");
    ok_json(d, &["vc", "verify", file.to_str().unwrap(), "--root", &root, "--policy", "at-issuance"]);
}

#[test]
fn chain_limit_and_renewal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init(d);
    let root = ok_json(d, &["root", "publish", "--name", "gov"])["root"].as_str().unwrap().to_owned();
    for name in ["dept", "leaf", "too-deep"] {
        ok_json(d, &["ddid", "enroll", "--name", name]);
    }
    ok_json(d, &["ddid", "issue", "--upstream", "gov", "--subject", "dept", "--identity-verified", "--max-chain-length", "2"]);
    let leaf = ok_json(d, &["ddid", "issue", "--upstream", "dept", "--subject", "leaf", "--identity-verified"]);
    let out = trustchain(d, &["ddid", "issue", "--upstream", "leaf", "--subject", "too-deep", "--identity-verified"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(wire_error(&out)["code"], "constraint-violation");

    let did = leaf["did"].as_str().unwrap();
    ok_json(d, &["ddid", "renew", "--subject", "leaf", "--rotate-key"]);
    let verified = ok_json(d, &["chain", "verify", did, "--root", &root, "--scope", "all-links"]);
    assert_eq!(verified["chain"].as_array().unwrap().len(), 3);
}

#[test]
fn out_of_band_challenge_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init(d);
    ok_json(d, &["root", "publish", "--name", "gov"]);
    ok_json(d, &["ddid", "enroll", "--name", "sub"]);
    let (c, r) = (d.join("c.json"), d.join("r.json"));
    assert_eq!(trustchain(d, &["ddid", "challenge", "--subject", "sub", "--out", c.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(
        trustchain(d, &["ddid", "respond", "--subject", "sub", "--challenge", c.to_str().unwrap(), "--out", r.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let issued = ok_json(
        d,
        &["ddid", "issue", "--upstream", "gov", "--subject", "sub", "--identity-verified", "--challenge", c.to_str().unwrap(), "--response", r.to_str().unwrap()],
    );
    assert!(issued["did"].as_str().unwrap().starts_with("did:tc:"));
}

#[test]
fn scripts_run_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let empty = d.join("empty.tc");
    std::fs::write(&empty, "# nothing\n\n").unwrap();
    let out = trustchain(d, &["script", "run", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let out = trustchain(d, &["--bits", "8", "script", "run", "--bundled", "national-deployment"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().any(|l| l.starts_with("expect invalid bob at step i")));

    let failing = d.join("fail.tc");
    std::fs::write(&failing, "root g\nissue a under g\nrevoke a\nexpect valid a\n").unwrap();
    let out = trustchain(d, &["--bits", "8", "script", "run", failing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(wire_error(&out)["code"], "assertion-failed");
}

#[test]
fn cli_verdicts_match_library() {
    use trustchain_core::attestation::{verify_did, TimestampScope};
    use trustchain_node::config::{NodeConfig, Overrides};
    use trustchain_node::Node;

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    init(d);
    let root = ok_json(d, &["root", "publish", "--name", "gov"])["root"].as_str().unwrap().to_owned();
    let mut dids = Vec::new();
    for (name, up) in [("a", "gov"), ("b", "a"), ("c", "b")] {
        ok_json(d, &["ddid", "enroll", "--name", name]);
        dids.push(ok_json(d, &["ddid", "issue", "--upstream", up, "--subject", name, "--identity-verified"])["did"].as_str().unwrap().to_owned());
    }
    ok_json(d, &["ddid", "revoke", "--subject", "b"]);

    let config = NodeConfig::load(&Overrides { data_dir: Some(d.to_owned()), ..Overrides::default() }, None).unwrap();
    let node = Node::open(config).unwrap();
    let params = root.parse().unwrap();
    for did in &dids {
        let out = trustchain(d, &["chain", "verify", did, "--root", &root]);
        let library = verify_did(&node.ledger.source(), &did.parse().unwrap(), &params, node.ledger.registry(), TimestampScope::RootOnly);
        match library {
            Ok(v) => {
                assert_eq!(out.status.code(), Some(0));
                let cli: Value = serde_json::from_slice(&out.stdout).unwrap();
                let chain: Vec<String> = v.chain.dids().iter().map(|d| d.to_string()).collect();
                assert_eq!(cli["chain"], serde_json::to_value(chain).unwrap());
            }
            Err(f) => {
                assert_eq!(out.status.code(), Some(1));
                assert_eq!(wire_error(&out), serde_json::to_value(trustchain_node::error::WireError::from(f)).unwrap());
            }
        }
    }
}

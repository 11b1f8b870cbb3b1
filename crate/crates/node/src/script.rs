//! Scenario scripts: one action or assertion per line, run against a fresh
//! in-memory chain. Blank lines and `#` comments are ignored.
//!
//! ```text
//! root <name>
//! issue <name> under <upstream> [max <n>]
//! revoke <name>                      # by whoever attested it
//! deactivate <name>                  # with its own update secret
//! credential <id> by <issuer> [key=value ...]
//! expect valid <name|id> [under <root>]
//! expect invalid <name|id> [step i|ii|iii|iv] [under <root>]
//! mine [n]
//! ```
//!
//! Verification uses the first published root unless `under` names another.

use std::collections::BTreeMap;

use trustchain_core::anchor::Ledger;
use trustchain_core::attestation::{
    deactivate_did, fresh_enrollment, issue_to, revoke_ddid, verify_did, Identity, TimestampScope,
};
use trustchain_core::credential::{issue_credential, policies, verify_credential, Credential, CredentialStep, DEFAULT_POLICY};
use trustchain_core::didcore::KeyPair;
use trustchain_core::registry::Transaction;
use trustchain_core::roottrust::{publish_root, RootParameters};
use trustchain_core::{ChainParams, DidDocument, Registry};

pub const BUNDLED: &[(&str, &str)] = &[("national-deployment", include_str!("../scripts/national-deployment.tc"))];

/// First block time of every scenario: 2023-11-14 22:13:20 UTC.
pub const START_TIME: u32 = 1_700_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Action { line: usize, message: String },
    #[error("line {line}: assertion failed: {message}")]
    AssertionFailed { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Root { name: String },
    Issue { name: String, upstream: String, max: Option<u32> },
    Revoke { name: String },
    Deactivate { name: String },
    Credential { id: String, issuer: String, claims: BTreeMap<String, String> },
    Expect { valid: bool, subject: String, step: Option<CredentialStep>, under: Option<String> },
    Mine { blocks: u32 },
}

fn parse_step(words: &[&str]) -> Result<Step, String> {
    let name = |i: usize| words.get(i).map(|s| s.to_string()).ok_or_else(|| format!("{} needs a name", words[0]));
    match words[0] {
        "root" if words.len() == 2 => Ok(Step::Root { name: name(1)? }),
        "issue" if (words.len() == 4 || words.len() == 6) && words[2] == "under" => {
            let max = match words.get(4..6) {
                Some(["max", n]) => Some(n.parse().map_err(|_| format!("bad limit {n:?}"))?),
                Some(other) => return Err(format!("unexpected {other:?}")),
                None => None,
            };
            Ok(Step::Issue { name: name(1)?, upstream: name(3)?, max })
        }
        "revoke" if words.len() == 2 => Ok(Step::Revoke { name: name(1)? }),
        "deactivate" if words.len() == 2 => Ok(Step::Deactivate { name: name(1)? }),
        "credential" if words.len() >= 4 && words[2] == "by" => {
            let mut claims = BTreeMap::new();
            for pair in &words[4..] {
                let (k, v) = pair.split_once('=').ok_or_else(|| format!("claim {pair:?} is not key=value"))?;
                claims.insert(k.to_owned(), v.to_owned());
            }
            Ok(Step::Credential { id: name(1)?, issuer: name(3)?, claims })
        }
        "expect" if words.len() >= 3 && (words[1] == "valid" || words[1] == "invalid") => {
            let valid = words[1] == "valid";
            let (mut step, mut under) = (None, None);
            let mut rest = words[3..].iter();
            while let Some(w) = rest.next() {
                let arg = rest.next().ok_or_else(|| format!("{w} needs a value"))?;
                match *w {
                    "step" if !valid => {
                        step = Some(match *arg {
                            "i" => CredentialStep::ResolveIssuer,
                            "ii" => CredentialStep::IssuerChain,
                            "iii" => CredentialStep::RootTimestamp,
                            "iv" => CredentialStep::Signature,
                            other => return Err(format!("unknown step {other:?}")),
                        })
                    }
                    "under" => under = Some(arg.to_string()),
                    other => return Err(format!("unexpected {other:?}")),
                }
            }
            Ok(Step::Expect { valid, subject: name(2)?, step, under })
        }
        "mine" if words.len() <= 2 => {
            let blocks = words.get(1).map(|n| n.parse().map_err(|_| format!("bad block count {n:?}"))).transpose()?.unwrap_or(1);
            Ok(Step::Mine { blocks })
        }
        other => Err(format!("cannot parse {other:?} statement: {}", words.join(" "))),
    }
}

/// Parses a script into numbered steps.
pub fn parse(text: &str) -> Result<Vec<(usize, Step)>, ScriptError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let step = parse_step(&words).map_err(|message| ScriptError::Parse { line: i + 1, message })?;
        steps.push((i + 1, step));
    }
    Ok(steps)
}

struct Runner {
    ledger: Ledger,
    clock: u32,
    identities: BTreeMap<String, Identity>,
    roots: Vec<(String, RootParameters)>,
    credentials: BTreeMap<String, Credential>,
}

impl Runner {
    fn tick(&mut self) -> u32 {
        self.clock += 600;
        self.clock
    }

    fn identity(&self, name: &str) -> Result<&Identity, String> {
        self.identities.get(name).ok_or_else(|| format!("no identity named {name:?}"))
    }

    fn params(&self, under: Option<&str>) -> Result<RootParameters, String> {
        match under {
            Some(r) => self.roots.iter().find(|(n, _)| n == r).map(|(_, p)| p.clone()).ok_or_else(|| format!("no root named {r:?}")),
            None => self.roots.first().map(|(_, p)| p.clone()).ok_or_else(|| "no root published yet".into()),
        }
    }

    fn fresh_name(&self, name: &str) -> Result<(), String> {
        if self.identities.contains_key(name) || self.credentials.contains_key(name) {
            return Err(format!("{name:?} is already defined"));
        }
        Ok(())
    }

    fn act(&mut self, step: &Step) -> Result<String, String> {
        match step {
            Step::Root { name } => {
                self.fresh_name(name)?;
                let keys = vec![KeyPair::generate("root-key")];
                let t = self.tick();
                let root = publish_root(&mut self.ledger, DidDocument::with_keys(&keys), t).map_err(|e| e.to_string())?;
                self.identities.insert(name.clone(), Identity::from_root(&root, keys));
                self.roots.push((name.clone(), root.params.clone()));
                Ok(format!("root {name} {} {}", root.did, root.params))
            }
            Step::Issue { name, upstream, max } => {
                self.fresh_name(name)?;
                self.identity(upstream)?;
                let t = self.tick();
                let up = self.identities.get_mut(upstream).expect("checked");
                let id = issue_to(&mut self.ledger, up, fresh_enrollment(), *max, t).map_err(|e| e.to_string())?;
                let line = format!("issue {name} {} under {upstream}", id.did);
                self.identities.insert(name.clone(), id);
                Ok(line)
            }
            Step::Revoke { name } => {
                let did = self.identity(name)?.did.clone();
                let holder = self.identities.values_mut().find(|id| id.issued.contains_key(&did)).ok_or_else(|| format!("nobody attested {name}"))?;
                let t = self.clock + 600;
                revoke_ddid(&mut self.ledger, holder, &did, t).map_err(|e| e.to_string())?;
                self.clock = t;
                Ok(format!("revoke {name}"))
            }
            Step::Deactivate { name } => {
                self.identity(name)?;
                let t = self.tick();
                let id = self.identities.get_mut(name).expect("checked");
                deactivate_did(&mut self.ledger, id, t).map_err(|e| e.to_string())?;
                Ok(format!("deactivate {name}"))
            }
            Step::Credential { id, issuer, claims } => {
                self.fresh_name(id)?;
                let t = self.ledger.registry().tip().header.timestamp;
                let credential = issue_credential(&self.ledger.source(), self.identity(issuer)?, claims.clone(), t).map_err(|e| e.to_string())?;
                self.credentials.insert(id.clone(), credential);
                Ok(format!("credential {id} by {issuer}"))
            }
            Step::Mine { blocks } => {
                for _ in 0..*blocks {
                    let t = self.tick();
                    let tx = Transaction::with_random_nonce(b"scenario".to_vec()).map_err(|e| e.to_string())?;
                    self.ledger.mine(vec![tx], t).map_err(|e| e.to_string())?;
                }
                Ok(format!("mine {blocks} -> height {}", self.ledger.registry().height()))
            }
            Step::Expect { .. } => unreachable!("assertions are checked separately"),
        }
    }

    /// Ok(description) when the assertion holds, Err(description) otherwise.
    fn check(&self, valid: bool, subject: &str, step: Option<CredentialStep>, under: Option<&str>) -> Result<Result<String, String>, String> {
        let params = self.params(under)?;
        let source = self.ledger.source();
        let outcome: Result<(), (Option<CredentialStep>, String)> = if let Some(credential) = self.credentials.get(subject) {
            let policy = policies().get(DEFAULT_POLICY).expect("default policy");
            verify_credential(&source, credential, &params, self.ledger.registry(), TimestampScope::RootOnly, policy.as_ref())
                .map(|_| ())
                .map_err(|f| (Some(f.step), f.to_string()))
        } else {
            let did = &self.identity(subject)?.did;
            verify_did(&source, did, &params, self.ledger.registry(), TimestampScope::RootOnly).map(|_| ()).map_err(|f| (None, f.to_string()))
        };
        let at = step.map(|s| format!(" at step {s}")).unwrap_or_default();
        Ok(match (valid, outcome) {
            (true, Ok(())) => Ok(format!("expect valid {subject}: ok")),
            (true, Err((_, why))) => Err(format!("expected {subject} valid: {why}")),
            (false, Ok(())) => Err(format!("expected {subject} invalid{at}, but it verified")),
            (false, Err((got, why))) => match step {
                Some(s) if got != Some(s) => Err(format!("expected {subject} invalid{at}: {why}")),
                _ => Ok(format!("expect invalid {subject}{at}: ok ({why})")),
            },
        })
    }
}

/// Runs `text` on a fresh chain mined at `bits`; returns the transcript.
pub fn run(text: &str, bits: u32) -> Result<Vec<String>, ScriptError> {
    let steps = parse(text)?;
    let mut transcript = Vec::with_capacity(steps.len());
    if steps.is_empty() {
        return Ok(transcript);
    }
    let params = ChainParams::new("scenario").with_bits(bits).with_genesis_time(START_TIME - 600);
    let registry = Registry::in_memory(params).map_err(|e| ScriptError::Action { line: 0, message: e.to_string() })?;
    let mut runner =
        Runner { ledger: Ledger::new(registry), clock: START_TIME - 600, identities: BTreeMap::new(), roots: Vec::new(), credentials: BTreeMap::new() };
    for (line, step) in steps {
        let entry = match &step {
            Step::Expect { valid, subject, step, under } => match runner.check(*valid, subject, *step, under.as_deref()) {
                Ok(Ok(ok)) => ok,
                Ok(Err(message)) => return Err(ScriptError::AssertionFailed { line, message }),
                Err(message) => return Err(ScriptError::Action { line, message }),
            },
            other => runner.act(other).map_err(|message| ScriptError::Action { line, message })?,
        };
        transcript.push(entry);
    }
    Ok(transcript)
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

//! The `trustchain` command line. Results go to stdout as JSON (or a short
//! line of text); failures go to stderr as a `{code, step?, message}` object.
//! Exit status: 0 success, 1 rejected or failed, 2 bad usage.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, RwLock};

use chrono::{NaiveDate, TimeDelta};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use trustchain_core::attestation::{
    build_chains, create_did, deactivate_did, interop_document, issue_challenge, issue_ddid, issue_interop_ddid, rebase,
    rebase_candidate, recover_did, renew_ddid, revoke_ddid, update_did, verify_did, Challenge, ChallengeResponse, DidChain,
    Enrollment, RenewRequest, TimestampScope,
};
use trustchain_core::credential::{issue_credential, policies, verify_credential, Credential, DEFAULT_POLICY};
use trustchain_core::didcore::{transform_proof_service, KeyPair, Secret, Service};
use trustchain_core::lightclient::{multi_server_resolve, stv_verify, HeaderChain};
use trustchain_core::registry::{genesis_hash, Transaction};
use trustchain_core::roottrust::{attack_cost, publish_root, scan_date_window, verify_root, waiting_period, AttackCostModel, RootParameters};
use trustchain_core::source::NodeApi;
use trustchain_core::{Did, DidDocument};

use crate::client::HttpNode;
use crate::config::{NodeConfig, Overrides, DATA_DIR_ENV};
use crate::error::WireError;
use crate::keystore::{Keystore, PendingEnrollment};
use crate::script::{self, ScriptError};
use crate::{current_time, next_block_time, server, Node};

#[derive(Debug, Parser)]
#[command(name = "trustchain", version, about = "Decentralised PKI over a proof-of-work timestamped DID registry")]
struct Cli {
    /// Configuration file (default: <data-dir>/node.toml).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Node data directory; also read from TRUSTCHAIN_DATA_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    chain_id: Option<String>,
    /// Proof-of-work difficulty in leading zero bits.
    #[arg(long, global = true)]
    bits: Option<u32>,
    #[arg(long, global = true, value_name = "FILE")]
    keystore: Option<PathBuf>,
    #[arg(long, global = true, value_name = "ADDR")]
    listen: Option<String>,
    /// Root parameters shared out of band, as YYYY-MM-DD[:code].
    #[arg(long, global = true, value_name = "DATE[:CODE]", conflicts_with = "date")]
    root: Option<String>,
    /// Root publication date; with --code, the same as --root DATE:CODE.
    #[arg(long, global = true)]
    date: Option<NaiveDate>,
    /// Root confirmation code.
    #[arg(long, global = true, requires = "date")]
    code: Option<String>,
    /// Block timestamp for anchored operations (unix seconds).
    #[arg(long, global = true)]
    time: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create the data directory, its config file, and the genesis block.
    Init,
    /// Mine blocks carrying no DID operations.
    Mine {
        #[arg(long, default_value_t = 1)]
        blocks: u32,
    },
    #[command(subcommand)]
    Root(RootCommand),
    #[command(subcommand)]
    Did(DidCommand),
    /// Downstream DIDs: enrollment, challenge-response, issuance, renewal, revocation.
    #[command(subcommand)]
    Ddid(DdidCommand),
    #[command(subcommand)]
    Chain(ChainCommand),
    /// Attest a DID from another tree under an upstream in this one.
    Rebase {
        #[arg(long)]
        upstream: String,
        /// Identity holding the DID being rebased.
        #[arg(long)]
        subject: String,
        /// Name for the new identity.
        #[arg(long)]
        name: String,
    },
    #[command(subcommand)]
    Interop(InteropCommand),
    /// Verifiable credentials.
    #[command(subcommand)]
    Vc(VcCommand),
    /// Light client: header sync and verification against remote nodes.
    #[command(subcommand)]
    Stv(StvCommand),
    #[command(subcommand)]
    Cost(CostCommand),
    /// Serve the registry over HTTP.
    Serve,
    #[command(subcommand)]
    Script(ScriptCommand),
}

#[derive(Debug, Subcommand)]
enum RootCommand {
    /// Anchor a new root DID and print its date and confirmation code.
    Publish {
        #[arg(long)]
        name: String,
    },
    /// Check that a DID is the root identified by --root.
    Verify {
        did: Did,
        /// Also require the root to be exactly this DID.
        #[arg(long)]
        pin: Option<Did>,
    },
    /// List unattested DIDs created on a date.
    ScanDate { date: NaiveDate },
}

#[derive(Debug, Subcommand)]
enum DidCommand {
    /// Anchor a self-controlled DID with a fresh key.
    Create {
        #[arg(long)]
        name: String,
        /// Service as id=uri; repeatable.
        #[arg(long = "service", value_parser = parse_service)]
        services: Vec<Service>,
    },
    Resolve {
        did: Did,
        /// Resolve as of this block time.
        #[arg(long)]
        at: Option<u32>,
    },
    /// Replace the services listed in a DID's document.
    Update {
        #[arg(long)]
        name: String,
        #[arg(long = "service", value_parser = parse_service)]
        services: Vec<Service>,
    },
    /// Take sole control of a DID with its recovery secret and a fresh key.
    Recover {
        #[arg(long)]
        name: String,
    },
    Deactivate {
        #[arg(long)]
        name: String,
    },
}

#[derive(Debug, Subcommand)]
enum DdidCommand {
    /// Generate keys and a candidate document for a subject.
    Enroll {
        #[arg(long)]
        name: String,
        #[arg(long = "service", value_parser = parse_service)]
        services: Vec<Service>,
    },
    /// Write a challenge for an enrolled subject's candidate document.
    Challenge {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign a challenge with the subject's keys.
    Respond {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attest an enrolled subject. Without --challenge/--response the exchange runs locally.
    Issue {
        #[arg(long)]
        upstream: String,
        #[arg(long)]
        subject: String,
        /// Confirms the subject's identity was checked out of band.
        #[arg(long)]
        identity_verified: bool,
        #[arg(long)]
        max_chain_length: Option<u32>,
        #[arg(long, requires = "response")]
        challenge: Option<PathBuf>,
        #[arg(long, requires = "challenge")]
        response: Option<PathBuf>,
    },
    /// Re-attest a downstream DID, optionally rotating its key.
    Renew {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        rotate_key: bool,
    },
    /// Deactivate a downstream DID as its attestor.
    Revoke {
        #[arg(long)]
        subject: String,
    },
}

#[derive(Debug, Subcommand)]
enum ChainCommand {
    /// List every candidate chain from a DID up to a root.
    Build { did: Did },
    /// Verify a DID's chain against the root parameters.
    Verify {
        did: Did,
        #[arg(long, value_enum, default_value_t = Scope::RootOnly)]
        scope: Scope,
    },
}

#[derive(Debug, Subcommand)]
enum InteropCommand {
    /// Attest one DID jointly by two providers from different trees.
    Issue {
        #[arg(long)]
        provider_a: String,
        #[arg(long)]
        provider_b: String,
        #[arg(long)]
        name: String,
    },
}

#[derive(Debug, Subcommand)]
enum VcCommand {
    Issue {
        #[arg(long)]
        issuer: String,
        /// Claim as key=value; repeatable.
        #[arg(long = "claim", value_parser = parse_claim)]
        claims: Vec<(String, String)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Verify {
        file: PathBuf,
        /// Revocation policy: current or at-issuance.
        #[arg(long, default_value = DEFAULT_POLICY)]
        policy: String,
        #[arg(long, value_enum, default_value_t = Scope::RootOnly)]
        scope: Scope,
    },
}

#[derive(Debug, Subcommand)]
enum StvCommand {
    /// Fetch new headers from a node into the local header file.
    Sync {
        #[arg(long)]
        server: String,
    },
    /// Verify a DID using only the local headers and data served by nodes.
    Verify {
        did: Did,
        #[arg(long = "server", required = true)]
        servers: Vec<String>,
        /// Verified answers required when several servers are given.
        #[arg(long, default_value_t = 1)]
        quorum: usize,
    },
}

#[derive(Debug, Subcommand)]
enum CostCommand {
    /// Cost of rewriting history back to a timestamp, or the wait for a target cost.
    Estimate {
        #[arg(long, value_parser = humantime::parse_duration, conflicts_with = "target", required_unless_present = "target")]
        elapsed: Option<std::time::Duration>,
        /// Target cost in USD.
        #[arg(long)]
        target: Option<f64>,
        /// Current network hash rate in EH/s.
        #[arg(long)]
        hash_rate: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum ScriptCommand {
    /// Run a scenario script on a fresh in-memory chain.
    Run(ScriptRun),
    /// List the bundled scenarios.
    List,
}

#[derive(Debug, Args)]
struct ScriptRun {
    #[arg(required_unless_present = "bundled", conflicts_with = "bundled")]
    file: Option<PathBuf>,
    #[arg(long)]
    bundled: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scope {
    RootOnly,
    AllLinks,
}

impl From<Scope> for TimestampScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::RootOnly => TimestampScope::RootOnly,
            Scope::AllLinks => TimestampScope::AllLinks,
        }
    }
}

fn parse_service(s: &str) -> Result<Service, String> {
    let (id, uri) = s.split_once('=').ok_or("expected id=uri")?;
    Ok(Service::uri(id, "LinkedDomains", uri))
}

fn parse_claim(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    Ok((k.to_owned(), v.to_owned()))
}

struct Ctx<'a> {
    config: NodeConfig,
    time: Option<u32>,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn node(&self) -> Result<Node, WireError> {
        Node::open(self.config.clone())
    }

    fn keystore(&self) -> Result<Keystore, WireError> {
        Keystore::open(&self.config.keystore_path())
    }

    fn block_time(&self, node: &Node) -> u32 {
        self.time.unwrap_or_else(|| next_block_time(&node.ledger))
    }

    fn now(&self, node: &Node) -> u32 {
        self.time.unwrap_or_else(|| current_time(&node.ledger))
    }

    fn root_params(&self, pin: Option<Did>) -> Result<RootParameters, WireError> {
        let params = self.config.root_params()?.ok_or_else(|| WireError::new("usage", "root parameters required: pass --root DATE[:CODE]"))?;
        Ok(match pin {
            Some(did) => params.pinned(did),
            None => params,
        })
    }

    fn print<T: Serialize>(&mut self, value: &T) -> Result<(), WireError> {
        self.line(serde_json::to_string_pretty(value).expect("output serializes"))
    }

    /// A closed stdout (`| head`) is not a failure.
    fn line(&mut self, text: impl std::fmt::Display) -> Result<(), WireError> {
        match writeln!(self.out, "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        }
    }
}

fn write_json<T: Serialize>(ctx: &mut Ctx, value: &T, out: Option<&Path>) -> Result<(), WireError> {
    match out {
        Some(path) => {
            std::fs::write(path, serde_json::to_vec_pretty(value).expect("output serializes"))?;
            ctx.line(path.display())
        }
        None => ctx.print(value),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, WireError> {
    let bytes = std::fs::read(path).map_err(|e| WireError::new("io", format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| WireError::new("malformed", format!("{}: {e}", path.display())))
}

fn chain_json(chain: &DidChain) -> Vec<String> {
    chain.dids().iter().map(|d| d.to_string()).collect()
}

/// The resolved document of `did` with its attestor proofs removed.
fn stripped(node: &Node, did: &Did) -> Result<DidDocument, WireError> {
    let doc = node.ledger.resolve(did)?.document.ok_or_else(|| WireError::new("deactivated", format!("{did} is deactivated")))?;
    let (doc, _) = transform_proof_service(&doc).map_err(|e| WireError::new("malformed", e))?;
    Ok(doc.without_id())
}

fn enrollment(keystore: &Keystore, name: &str) -> Result<Enrollment, WireError> {
    keystore.enrollments.get(name).map(Enrollment::from).ok_or_else(|| WireError::new("unknown-enrollment", format!("no enrollment named {name:?}; run `ddid enroll`")))
}

/// Runs the CLI with the process environment; for `main`.
pub fn run(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let env_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    let code = run_with(args, env_dir, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}

/// Runs the CLI and returns its exit status.
pub fn run_with(args: impl IntoIterator<Item = OsString>, env_data_dir: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::*;
            return match e.kind() {
                DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand if e.exit_code() == 0 => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match execute(cli, env_data_dir, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            if e.code == "usage" {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: Cli, env_data_dir: Option<PathBuf>, out: &mut dyn Write) -> Result<(), WireError> {
    let overrides = Overrides {
        config: cli.config,
        data_dir: cli.data_dir,
        chain_id: cli.chain_id,
        bits: cli.bits,
        listen: cli.listen,
        root: match (cli.date, cli.code) {
            (Some(date), Some(code)) => Some(format!("{date}:{code}")),
            (Some(date), None) => Some(date.to_string()),
            _ => cli.root,
        },
        keystore: cli.keystore,
    };
    let config = NodeConfig::load(&overrides, env_data_dir)?;
    let mut ctx = Ctx { config, time: cli.time, out };
    match cli.command {
        Command::Init => {
            let node = Node::init(ctx.config.clone())?;
            let tip = node.ledger.registry().tip().hash();
            ctx.print(&json!({"dataDir": node.config.data_dir, "chainId": node.config.chain_id, "height": node.ledger.registry().height(), "tip": tip}))
        }
        Command::Mine { blocks } => {
            let mut node = ctx.node()?;
            for _ in 0..blocks {
                let t = ctx.block_time(&node);
                let tx = Transaction::with_random_nonce(b"filler".to_vec())?;
                node.ledger.mine(vec![tx], t)?;
            }
            ctx.print(&json!({"height": node.ledger.registry().height()}))
        }
        Command::Root(cmd) => root(&mut ctx, cmd),
        Command::Did(cmd) => did(&mut ctx, cmd),
        Command::Ddid(cmd) => ddid(&mut ctx, cmd),
        Command::Chain(cmd) => chain(&mut ctx, cmd),
        Command::Rebase { upstream, subject, name } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let subject_id = keys.get(&subject)?.clone();
            let original = node.ledger.resolve(&subject_id.did)?.document.ok_or_else(|| WireError::new("deactivated", format!("{} is deactivated", subject_id.did)))?;
            let enrollment = Enrollment {
                document: rebase_candidate(&stripped(&node, &subject_id.did)?, &subject_id.did),
                keys: subject_id.keys.clone(),
                recovery_secret: Secret::random(),
            };
            let now = ctx.now(&node);
            let challenge = issue_challenge(&enrollment.document, now).map_err(|e| WireError::new("invalid-candidate", e))?;
            let request = enrollment.request(challenge.clone(), enrollment.respond(&challenge), now);
            let t = ctx.block_time(&node);
            let did = rebase(&mut node.ledger, keys.get_mut(&upstream)?, &subject_id.did, &original, request, t)?;
            keys.insert(&name, enrollment.into_identity(did.clone()))?;
            keys.save()?;
            ctx.print(&json!({"name": name, "did": did, "alsoKnownAs": subject_id.did}))
        }
        Command::Interop(InteropCommand::Issue { provider_a, provider_b, name }) => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let (a, b) = (keys.get(&provider_a)?.clone(), keys.get(&provider_b)?.clone());
            let extra = KeyPair::generate("interop-key");
            let document = interop_document(&[(&a.did, &stripped(&node, &a.did)?), (&b.did, &stripped(&node, &b.did)?)], std::slice::from_ref(&extra), vec![]);
            let mut held: Vec<KeyPair> = Vec::new();
            for p in [&a, &b] {
                held.extend(p.keys.iter().map(|k| k.renamed(format!("{}#{}", p.did, k.id))));
            }
            held.push(extra);
            let enrollment = Enrollment { document, keys: held, recovery_secret: Secret::random() };
            let now = ctx.now(&node);
            let challenge = issue_challenge(&enrollment.document, now).map_err(|e| WireError::new("invalid-candidate", e))?;
            let request = enrollment.request(challenge.clone(), enrollment.respond(&challenge), now);
            let t = ctx.block_time(&node);
            let (pa, pb) = keys.pair_mut(&provider_a, &provider_b)?;
            let did = issue_interop_ddid(&mut node.ledger, pa, pb, request, t)?;
            keys.insert(&name, enrollment.into_identity(did.clone()))?;
            keys.save()?;
            ctx.print(&json!({"name": name, "did": did}))
        }
        Command::Vc(cmd) => vc(&mut ctx, cmd),
        Command::Stv(cmd) => stv(&mut ctx, cmd),
        Command::Cost(CostCommand::Estimate { elapsed, target, hash_rate }) => {
            let model = hash_rate.map(AttackCostModel::at_hash_rate).unwrap_or_default();
            let usage = |e: trustchain_core::roottrust::CostError| WireError::new("usage", e);
            match (elapsed, target) {
                (Some(d), _) => {
                    let delta = TimeDelta::from_std(d).map_err(|e| WireError::new("usage", e))?;
                    let cost = attack_cost(delta, &model).map_err(usage)?;
                    ctx.line(format!("{cost:.0} USD"))
                }
                (None, Some(t)) => {
                    let wait = waiting_period(t, &model).map_err(usage)?;
                    let secs = wait.num_seconds().max(0) as u64;
                    ctx.line(humantime::format_duration(std::time::Duration::from_secs(secs)))
                }
                (None, None) => Err(WireError::new("usage", "pass --elapsed or --target")),
            }
        }
        Command::Serve => {
            let node = ctx.node()?;
            let listen = node.config.listen.clone();
            let ledger = Arc::new(RwLock::new(node.ledger));
            let out = &mut ctx.out;
            server::serve(ledger, &listen, |addr| {
                let _ = writeln!(out, "listening on http://{addr}");
                let _ = out.flush();
            })
        }
        Command::Script(ScriptCommand::List) => {
            for (name, _) in script::BUNDLED {
                ctx.line(name)?;
            }
            Ok(())
        }
        Command::Script(ScriptCommand::Run(args)) => {
            let text = match (&args.file, &args.bundled) {
                (_, Some(name)) => script::bundled(name).ok_or_else(|| WireError::new("usage", format!("no bundled script {name:?}; see `script list`")))?.to_owned(),
                (Some(path), None) => std::fs::read_to_string(path).map_err(|e| WireError::new("io", format!("{}: {e}", path.display())))?,
                (None, None) => return Err(WireError::new("usage", "pass a script file or --bundled NAME")),
            };
            let transcript = script::run(&text, ctx.config.bits).map_err(|e| {
                let code = match e {
                    ScriptError::Parse { .. } => "script-parse",
                    ScriptError::Action { .. } => "script-action",
                    ScriptError::AssertionFailed { .. } => "assertion-failed",
                };
                WireError::new(code, e)
            })?;
            for line in transcript {
                ctx.line(line)?;
            }
            Ok(())
        }
    }
}

fn root(ctx: &mut Ctx, cmd: RootCommand) -> Result<(), WireError> {
    match cmd {
        RootCommand::Publish { name } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            if keys.identities.contains_key(&name) {
                return Err(WireError::new("identity-exists", format!("identity {name:?} already exists")));
            }
            let key = vec![KeyPair::generate("root-key")];
            let t = ctx.block_time(&node);
            let published = publish_root(&mut node.ledger, DidDocument::with_keys(&key), t)?;
            keys.insert(&name, trustchain_core::attestation::Identity::from_root(&published, key))?;
            keys.save()?;
            ctx.print(&json!({"name": name, "did": published.did, "root": published.params.to_string()}))
        }
        RootCommand::Verify { did, pin } => {
            let node = ctx.node()?;
            let params = ctx.root_params(pin)?;
            let accepted = verify_root(&node.ledger.source(), &did, &params, node.ledger.registry())?;
            let mut report = json!({"did": accepted.did, "code": accepted.code, "valid": true});
            if let Some(w) = accepted.warning() {
                report["warning"] = Value::from(w);
            }
            ctx.print(&report)
        }
        RootCommand::ScanDate { date } => {
            let node = ctx.node()?;
            ctx.print(&scan_date_window(node.ledger.state(), date))
        }
    }
}

fn did(ctx: &mut Ctx, cmd: DidCommand) -> Result<(), WireError> {
    match cmd {
        DidCommand::Create { name, services } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            if keys.identities.contains_key(&name) {
                return Err(WireError::new("identity-exists", format!("identity {name:?} already exists")));
            }
            let t = ctx.block_time(&node);
            let id = create_did(&mut node.ledger, vec![KeyPair::generate("key-1")], services, t)?;
            let did = id.did.clone();
            keys.insert(&name, id)?;
            keys.save()?;
            ctx.print(&json!({"name": name, "did": did}))
        }
        DidCommand::Resolve { did, at } => {
            let node = ctx.node()?;
            let resolution = match at {
                Some(t) => node.ledger.state().resolve_at(&did, t)?,
                None => node.ledger.resolve(&did)?,
            };
            ctx.print(&resolution)
        }
        DidCommand::Update { name, services } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let id = keys.get_mut(&name)?;
            let mut document = stripped(&node, &id.did)?;
            document.services = services;
            let t = ctx.block_time(&node);
            update_did(&mut node.ledger, id, document, t)?;
            let did = id.did.clone();
            keys.save()?;
            ctx.print(&json!({"name": name, "did": did, "updated": true}))
        }
        DidCommand::Recover { name } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let id = keys.get_mut(&name)?;
            let key = vec![KeyPair::generate("key-recovered")];
            let t = ctx.block_time(&node);
            recover_did(&mut node.ledger, id, DidDocument::with_keys(&key), t)?;
            id.keys = key;
            let did = id.did.clone();
            keys.save()?;
            ctx.print(&json!({"name": name, "did": did, "recovered": true}))
        }
        DidCommand::Deactivate { name } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let id = keys.get_mut(&name)?;
            let t = ctx.block_time(&node);
            deactivate_did(&mut node.ledger, id, t)?;
            let did = id.did.clone();
            keys.save()?;
            ctx.print(&json!({"name": name, "did": did, "deactivated": true}))
        }
    }
}

fn ddid(ctx: &mut Ctx, cmd: DdidCommand) -> Result<(), WireError> {
    match cmd {
        DdidCommand::Enroll { name, services } => {
            let mut keys = ctx.keystore()?;
            if keys.identities.contains_key(&name) || keys.enrollments.contains_key(&name) {
                return Err(WireError::new("identity-exists", format!("{name:?} already exists")));
            }
            let enrollment = Enrollment::new(vec![KeyPair::generate("key-1")], services);
            let document = enrollment.document.clone();
            keys.enrollments.insert(name.clone(), PendingEnrollment::from(&enrollment));
            keys.save()?;
            ctx.print(&json!({"name": name, "candidate": document}))
        }
        DdidCommand::Challenge { subject, out } => {
            let node = ctx.node()?;
            let enrollment = enrollment(&ctx.keystore()?, &subject)?;
            let challenge = issue_challenge(&enrollment.document, ctx.now(&node)).map_err(|e| WireError::new("invalid-candidate", e))?;
            write_json(ctx, &challenge, out.as_deref())
        }
        DdidCommand::Respond { subject, challenge, out } => {
            let enrollment = enrollment(&ctx.keystore()?, &subject)?;
            let challenge: Challenge = read_json(&challenge)?;
            write_json(ctx, &enrollment.respond(&challenge), out.as_deref())
        }
        DdidCommand::Issue { upstream, subject, identity_verified, max_chain_length, challenge, response } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            if keys.identities.contains_key(&subject) {
                return Err(WireError::new("identity-exists", format!("identity {subject:?} already exists")));
            }
            let enrollment = enrollment(&keys, &subject)?;
            let now = ctx.now(&node);
            let (challenge, response) = match (challenge, response) {
                (Some(c), Some(r)) => (read_json::<Challenge>(&c)?, read_json::<ChallengeResponse>(&r)?),
                _ => {
                    let c = issue_challenge(&enrollment.document, now).map_err(|e| WireError::new("invalid-candidate", e))?;
                    let r = enrollment.respond(&c);
                    (c, r)
                }
            };
            let mut request = enrollment.request(challenge, response, now);
            request.identity_verified = identity_verified;
            request.max_chain_length = max_chain_length;
            let t = ctx.block_time(&node);
            let did = issue_ddid(&mut node.ledger, keys.get_mut(&upstream)?, request, t)?;
            keys.enrollments.remove(&subject);
            keys.insert(&subject, enrollment.into_identity(did.clone()))?;
            keys.save()?;
            ctx.print(&json!({"name": subject, "did": did, "upstream": keys.get(&upstream)?.did}))
        }
        DdidCommand::Renew { subject, rotate_key } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let did = keys.get(&subject)?.did.clone();
            let holder = keys.holder_of(&did).map(str::to_owned).ok_or_else(|| WireError::new("not-upstream", format!("no identity in the keystore attested {did}")))?;
            let mut document = stripped(&node, &did)?;
            let now = ctx.now(&node);
            let mut challenge = None;
            let mut new_keys = None;
            if rotate_key {
                let fresh = vec![KeyPair::generate(format!("key-{now}"))];
                document.verification_methods = fresh.iter().map(Into::into).collect();
                let c = issue_challenge(&document, now).map_err(|e| WireError::new("invalid-candidate", e))?;
                let r = trustchain_core::attestation::respond(&c, &fresh);
                challenge = Some((c, r));
                new_keys = Some(fresh);
            }
            let t = ctx.block_time(&node);
            renew_ddid(&mut node.ledger, keys.get_mut(&holder)?, RenewRequest { did: did.clone(), document, challenge, now }, t)?;
            if let Some(k) = new_keys {
                keys.get_mut(&subject)?.keys = k;
            }
            keys.save()?;
            ctx.print(&json!({"name": subject, "did": did, "renewedBy": holder}))
        }
        DdidCommand::Revoke { subject } => {
            let mut node = ctx.node()?;
            let mut keys = ctx.keystore()?;
            let did = keys.get(&subject)?.did.clone();
            let holder = keys.holder_of(&did).map(str::to_owned).ok_or_else(|| WireError::new("not-upstream", format!("no identity in the keystore attested {did}")))?;
            let t = ctx.block_time(&node);
            revoke_ddid(&mut node.ledger, keys.get_mut(&holder)?, &did, t)?;
            keys.save()?;
            ctx.print(&json!({"name": subject, "did": did, "revokedBy": holder}))
        }
    }
}

fn chain(ctx: &mut Ctx, cmd: ChainCommand) -> Result<(), WireError> {
    let node = ctx.node()?;
    match cmd {
        ChainCommand::Build { did } => {
            let chains = build_chains(&node.ledger.source(), &did).map_err(|e| WireError::from(trustchain_core::attestation::ChainFailure::Build(e)))?;
            ctx.print(&chains.iter().map(chain_json).collect::<Vec<_>>())
        }
        ChainCommand::Verify { did, scope } => {
            let params = ctx.root_params(None)?;
            let verified = verify_did(&node.ledger.source(), &did, &params, node.ledger.registry(), scope.into())?;
            let mut report = json!({"did": did, "valid": true, "chain": chain_json(&verified.chain), "code": verified.root.code});
            if let Some(w) = verified.root.warning() {
                report["warning"] = Value::from(w);
            }
            ctx.print(&report)
        }
    }
}

fn vc(ctx: &mut Ctx, cmd: VcCommand) -> Result<(), WireError> {
    match cmd {
        VcCommand::Issue { issuer, claims, out } => {
            let node = ctx.node()?;
            let keys = ctx.keystore()?;
            let claims: BTreeMap<String, String> = claims.into_iter().collect();
            // Stamped with the tip's time: the chain state it was issued against.
            let issued_at = ctx.time.unwrap_or_else(|| node.ledger.registry().tip().header.timestamp);
            let credential = issue_credential(&node.ledger.source(), keys.get(&issuer)?, claims, issued_at)?;
            write_json(ctx, &credential, out.as_deref())
        }
        VcCommand::Verify { file, policy, scope } => {
            let node = ctx.node()?;
            let credential: Credential = read_json(&file)?;
            let policy = policies().select("revocation policy", &policy).map_err(|e| WireError::new("usage", e))?;
            let params = ctx.root_params(None)?;
            let verified = verify_credential(&node.ledger.source(), &credential, &params, node.ledger.registry(), scope.into(), policy.as_ref())?;
            let mut report = json!({"valid": true, "issuer": credential.issuer, "chain": chain_json(&verified.chain), "claims": credential.claims});
            if let Some(w) = verified.root.warning() {
                report["warning"] = Value::from(w);
            }
            ctx.print(&report)
        }
    }
}

fn stv(ctx: &mut Ctx, cmd: StvCommand) -> Result<(), WireError> {
    let genesis = genesis_hash(&ctx.config.chain_params())?;
    let path = ctx.config.headers_path();
    let mut headers = HeaderChain::load(&path, Some(genesis))?;
    let unreachable = |e: trustchain_core::source::SourceError| WireError::new("server-unreachable", e);
    match cmd {
        StvCommand::Sync { server } => {
            let node = HttpNode::new(&server).map_err(unreachable)?;
            let added = headers.sync(&node)?;
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            headers.save(&path)?;
            let tip = headers.tip().map(|h| h.hash());
            ctx.print(&json!({"added": added, "headers": headers.len(), "tip": tip}))
        }
        StvCommand::Verify { did, servers, quorum } => {
            let params = ctx.root_params(None)?;
            let nodes = servers.iter().map(|s| HttpNode::new(s)).collect::<Result<Vec<_>, _>>().map_err(unreachable)?;
            let apis: Vec<&dyn NodeApi> = nodes.iter().map(|n| n as &dyn NodeApi).collect();
            let multi = multi_server_resolve(&apis, &headers, &did, quorum)?;
            let first_ok = multi.reports.iter().find(|r| r.height.is_some()).map(|r| r.server).unwrap_or(0);
            let verified = stv_verify(apis[first_ok], &headers, &did, &params)?;
            ctx.print(&json!({
                "did": did,
                "valid": true,
                "chain": chain_json(&verified.chain),
                "status": multi.resolution.status,
                "omissionSuspected": multi.omission_suspected,
                "servers": multi.reports,
            }))
        }
    }
}

//! The `acorp` command-line tool.
//!
//! Exit codes: 0 on success (and `ALLOWED` for `verify`), 1 when the
//! operation is refused or the credential does not verify (the error or
//! reason name goes to stderr, or stdout for `verify`), 2 on usage errors
//! and unreadable inputs.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use acorp_core::audit::{verify_log_file, ProvenanceChain};
use acorp_core::authority::LOG_FILE;
use acorp_core::capability::{
    verify_credential, ActionId, Credential, RevocationList, RevocationRecord, RevocationRequest, Token, TokenId,
};
use acorp_core::governance::{
    sign, ActionRequest, CanonicalDecode, CanonicalEncode, Grant, OwnerRecord, PublicKey, Scope, SecretKey,
    SignatureEnvelope, Timestamp,
};
use acorp_core::ledger::{ActionRecord, CorporateAction};
use acorp_core::registry::MasterKeyRecord;
use acorp_core::sim::{run_experiment, SimConfig};
use acorp_core::mint_master_token;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::client::{Client, ClientError};
use crate::config::{ClockMode, ServiceConfig};
use crate::wire::{ActionSubmission, RegisterRequest};

#[derive(Debug, Parser)]
#[command(name = "acorp", version, about = "A-corp registry, delegation and audit tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ServerArg {
    /// Base URL of the registry service.
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    server: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an Ed25519 key pair; the secret key is written as hex.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Register a new A-corp whose master key is read from `--key`.
    Register {
        #[command(flatten)]
        server: ServerArg,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        owner_name: String,
        #[arg(long)]
        owner_id: String,
        #[arg(long, default_value_t = 0)]
        stake: u64,
        #[arg(long)]
        capital: u64,
        #[arg(long, default_value_t = 0)]
        compute: u64,
        /// Registration time; defaults to now.
        #[arg(long)]
        as_of: Option<Timestamp>,
    },
    /// Delegate a child token under `--parent`, signed with the parent holder's key.
    Delegate {
        #[command(flatten)]
        server: ServerArg,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        parent: TokenId,
        /// Hex public key of the new holder.
        #[arg(long)]
        holder: PublicKey,
        /// `ACTION:resource:cap[:market]`, repeatable.
        #[arg(long = "grant", required = true)]
        grants: Vec<Grant>,
        #[arg(long)]
        valid_until: Timestamp,
        #[arg(long)]
        as_of: Option<Timestamp>,
    },
    /// Revoke `--target` on the authority of its ancestor `--revoker`.
    Revoke {
        #[command(flatten)]
        server: ServerArg,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        revoker: TokenId,
        #[arg(long)]
        target: TokenId,
        #[arg(long, default_value = "")]
        reason: String,
        #[arg(long)]
        as_of: Option<Timestamp>,
    },
    /// Fetch everything an offline verifier needs for one token.
    Export {
        #[command(flatten)]
        server: ServerArg,
        #[arg(long)]
        token: TokenId,
        /// Writes credential.bin, master.bin and revocations.bin here.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Verify a credential offline.
    Verify {
        #[arg(long)]
        credential: PathBuf,
        /// Canonical MasterKeyRecord of the A-corp.
        #[arg(long)]
        master: PathBuf,
        /// Canonical revocation list; treated as empty when omitted.
        #[arg(long)]
        revocations: Option<PathBuf>,
        /// `ACTION:resource:amount[:market]`
        #[arg(long)]
        action: Option<ActionRequest>,
        #[arg(long)]
        as_of: Option<Timestamp>,
    },
    /// Sign and submit a corporate action under `--token`.
    Act {
        #[command(flatten)]
        server: ServerArg,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        token: TokenId,
        #[arg(long, value_enum)]
        kind: ActionArg,
        #[arg(long)]
        counterparty: String,
        #[arg(long)]
        amount: u64,
        #[arg(long)]
        as_of: Option<Timestamp>,
    },
    /// Print the provenance chain of a logged action.
    Trace {
        #[command(flatten)]
        server: ServerArg,
        action: ActionId,
    },
    /// Check the audit log hash chain, on disk or through a running service.
    Integrity {
        #[arg(long, conflicts_with = "server")]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        server: Option<String>,
    },
    /// Run the selection simulator over a range of seeds.
    Simulate {
        /// `key = value` config file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `A..B` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0..9")]
        seeds: String,
        #[arg(long)]
        jsonl: Option<PathBuf>,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Run the registry service in the foreground.
    Serve {
        /// TOML config; the flags below are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        #[arg(long, default_value = "acorp-data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        compute_price: u64,
        #[arg(long, default_value = "wall")]
        clock: ClockMode,
        /// Accept actions whose credential fails verification (logged).
        #[arg(long)]
        no_mandate: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActionArg {
    Transfer,
    Contract,
    Compute,
}

impl From<ActionArg> for CorporateAction {
    fn from(a: ActionArg) -> Self {
        match a {
            ActionArg::Transfer => CorporateAction::Transfer,
            ActionArg::Contract => CorporateAction::Contract,
            ActionArg::Compute => CorporateAction::ComputePurchase,
        }
    }
}

enum Failure {
    /// The operation was refused: exit 1 with the error name.
    Refused { name: String, message: String },
    /// Bad arguments or unreadable input: exit 2.
    Usage(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Transport(m) => Failure::Usage(format!("cannot reach service: {m}")),
            other => Failure::Refused {
                name: other.name().to_owned(),
                message: other.to_string(),
            },
        }
    }
}

impl From<acorp_core::Error> for Failure {
    fn from(e: acorp_core::Error) -> Self {
        Failure::Refused {
            name: e.name().to_owned(),
            message: e.to_string(),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(Failure::Refused { name, message }) => {
            let _ = writeln!(err, "{name}: {message}");
            1
        }
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
    }
}

fn now() -> Timestamp {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn read_key(path: &Path) -> Result<SecretKey, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    SecretKey::from_hex(text.trim()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_canonical<T: CanonicalDecode>(path: &Path) -> Result<T, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    T::from_canonical_bytes(&bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn connect(server: &str) -> Result<Client, Failure> {
    Ok(Client::new(server)?)
}

fn leaf_token(client: &Client, id: &TokenId) -> Result<Token, Failure> {
    let credential = client.credential(id)?;
    Ok(credential.leaf().cloned().expect("service returns non-empty chains"))
}

/// Parses `A..B` (inclusive) or `a,b,c`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("bad seed list {spec:?}: expected A..B or a,b,c");
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn execute(command: Command, out: &mut dyn Write) -> Outcome {
    let io = |e: std::io::Error| Failure::Usage(e.to_string());
    match command {
        Command::Keygen { out: path } => {
            let key = SecretKey::generate(&mut rand::rng());
            write_file(&path, format!("{}\n", key.to_hex()).as_bytes())?;
            writeln!(out, "{}", key.public_key()).map_err(io)?;
            Ok(0)
        }
        Command::Register {
            server,
            key,
            owner_name,
            owner_id,
            stake,
            capital,
            compute,
            as_of,
        } => {
            let client = connect(&server.server)?;
            let key = read_key(&key)?;
            let acorp_id = client.reserve()?;
            let master = mint_master_token(
                acorp_id,
                TokenId::generate(&mut rand::rng()),
                &key,
                capital,
                as_of.unwrap_or_else(now),
            );
            let resp = client.register(&RegisterRequest {
                owner: OwnerRecord::new(owner_name, owner_id, stake),
                master_token: master,
                initial_capital: capital,
                initial_compute: compute,
            })?;
            writeln!(out, "acorp {}", resp.record.id).map_err(io)?;
            writeln!(out, "master_token {}", resp.master_token.token_id).map_err(io)?;
            Ok(0)
        }
        Command::Delegate {
            server,
            key,
            parent,
            holder,
            grants,
            valid_until,
            as_of,
        } => {
            let client = connect(&server.server)?;
            let key = read_key(&key)?;
            let parent = leaf_token(&client, &parent)?;
            let scope = Scope::new(grants, valid_until).map_err(|e| Failure::Usage(e.to_string()))?;
            let mut token = Token {
                token_id: TokenId::generate(&mut rand::rng()),
                acorp_id: parent.acorp_id.clone(),
                holder_public_key: holder,
                scope,
                parent_token_id: Some(parent.token_id),
                issued_at: as_of.unwrap_or_else(now),
                issuer_signature: SignatureEnvelope::ZERO,
            };
            token.issuer_signature = sign(&token, &key);
            let token = client.delegate(&token)?;
            writeln!(out, "token {}", token.token_id).map_err(io)?;
            Ok(0)
        }
        Command::Revoke {
            server,
            key,
            revoker,
            target,
            reason,
            as_of,
        } => {
            let client = connect(&server.server)?;
            let key = read_key(&key)?;
            let request = RevocationRequest {
                target,
                revoker,
                reason,
                as_of: as_of.unwrap_or_else(now),
            };
            let signature = sign(&request, &key);
            let record = client.revoke(&request, &signature)?;
            writeln!(out, "revoked {} at {}", record.token_id, record.revoked_at).map_err(io)?;
            Ok(0)
        }
        Command::Export { server, token, out_dir } => {
            let client = connect(&server.server)?;
            let credential = client.credential(&token)?;
            let acorp = credential.leaf().expect("service returns non-empty chains").acorp_id.clone();
            let master = client.master_key(&acorp)?;
            let revocations = client.revocations(Some(&acorp))?;
            std::fs::create_dir_all(&out_dir).map_err(io)?;
            write_file(&out_dir.join("credential.bin"), &credential.canonical_bytes())?;
            write_file(&out_dir.join("master.bin"), &master.canonical_bytes())?;
            write_file(&out_dir.join("revocations.bin"), &revocations.canonical_bytes())?;
            writeln!(out, "exported chain of {} tokens to {}", credential.chain.len(), out_dir.display())
                .map_err(io)?;
            Ok(0)
        }
        Command::Verify {
            credential,
            master,
            revocations,
            action,
            as_of,
        } => {
            let credential: Credential = read_canonical(&credential)?;
            let master: MasterKeyRecord = read_canonical(&master)?;
            let revocations: Vec<RevocationRecord> = match revocations {
                Some(path) => read_canonical(&path)?,
                None => Vec::new(),
            };
            let verdict = verify_credential(
                &credential,
                &master,
                &RevocationList::new(&revocations),
                action.as_ref(),
                as_of.unwrap_or_else(now),
            );
            writeln!(out, "{}", verdict.label()).map_err(io)?;
            Ok(if verdict.allowed { 0 } else { 1 })
        }
        Command::Act {
            server,
            key,
            token,
            kind,
            counterparty,
            amount,
            as_of,
        } => {
            let client = connect(&server.server)?;
            let key = read_key(&key)?;
            let credential = client.credential(&token)?;
            let leaf = credential.leaf().expect("service returns non-empty chains");
            let mut record = ActionRecord {
                action_id: ActionId::generate(&mut rand::rng()),
                acorp_id: leaf.acorp_id.clone(),
                token_id: Some(leaf.token_id),
                kind: CorporateAction::from(kind).kind(),
                counterparty,
                amount,
                as_of: as_of.unwrap_or_else(now),
                holder_signature: None,
            };
            record.holder_signature = Some(sign(&record, &key));
            let record = client.act(&ActionSubmission { record, credential })?;
            writeln!(out, "action {}", record.action_id).map_err(io)?;
            Ok(0)
        }
        Command::Trace { server, action } => {
            let chain = connect(&server.server)?.trace(&action)?;
            write_trace(out, &chain).map_err(io)?;
            Ok(0)
        }
        Command::Integrity { data_dir, server } => {
            let report = match (data_dir, server) {
                (Some(dir), _) => verify_log_file(&dir.join(LOG_FILE)).map_err(io)?,
                (None, Some(server)) => connect(&server)?.integrity()?,
                (None, None) => return Err(Failure::Usage("give --data-dir or --server".into())),
            };
            match report.first_break {
                None => writeln!(out, "intact through entry {}", report.last_seq).map_err(io)?,
                Some(at) => writeln!(out, "BROKEN at entry {at} (last good entry {})", report.last_seq).map_err(io)?,
            }
            Ok(if report.intact { 0 } else { 1 })
        }
        Command::Simulate {
            config,
            seeds,
            jsonl,
            gnuplot,
        } => {
            let config = match config {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    SimConfig::from_kv_str(&text).map_err(|e| Failure::Usage(e.to_string()))?
                }
                None => SimConfig::default(),
            };
            let seeds = parse_seeds(&seeds).map_err(Failure::Usage)?;
            let metrics = run_experiment(&config, &seeds).map_err(|e| Failure::Usage(e.to_string()))?;
            if let Some(path) = jsonl {
                write_file(&path, metrics.to_jsonl().as_bytes())?;
            }
            if let Some(path) = gnuplot {
                write_file(&path, metrics.gnuplot_columns().as_bytes())?;
            }
            out.write_all(metrics.summary_table().as_bytes()).map_err(io)?;
            Ok(0)
        }
        Command::Serve {
            config,
            listen,
            data_dir,
            compute_price,
            clock,
            no_mandate,
        } => {
            let config = match config {
                Some(path) => ServiceConfig::load(&path),
                None => Ok(ServiceConfig {
                    compute_price,
                    clock_mode: clock,
                    mandate: !no_mandate,
                    ..ServiceConfig::new(listen, data_dir)
                }),
            };
            config
                .and_then(|c| crate::server::serve(&c))
                .map_err(|e| Failure::Usage(e.to_string()))?;
            Ok(0)
        }
    }
}

fn write_trace(out: &mut dyn Write, chain: &ProvenanceChain) -> std::io::Result<()> {
    let a = &chain.action;
    writeln!(
        out,
        "action {} {} amount {} counterparty {:?} at {}",
        a.action_id, a.kind, a.amount, a.counterparty, a.as_of
    )?;
    for (depth, token) in chain.tokens.iter().enumerate() {
        let grants: Vec<String> = token.scope.grants().iter().map(ToString::to_string).collect();
        writeln!(
            out,
            "  token[{depth}] {} holder {} scope [{}] until {}",
            token.token_id,
            token.holder_public_key,
            grants.join(", "),
            token.scope.valid_until()
        )?;
    }
    writeln!(out, "acorp {} ({})", chain.acorp.id, chain.acorp.status_at(a.as_of))?;
    writeln!(
        out,
        "owner {} ({}) stake {}",
        chain.owner.owner_name, chain.owner.owner_id, chain.owner.stake_value
    )
}

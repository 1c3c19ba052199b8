#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use acorp_core::capability::{ActionId, Credential, RevocationRequest, Token, TokenId};
use acorp_core::governance::{sign, Grant, OwnerRecord, PublicKey, Scope, SecretKey, SignatureEnvelope, Timestamp};
use acorp_core::ledger::{ActionRecord, CorporateAction};
use acorp_core::mint_master_token;
use acorp_core::registry::{AcorpRecord, TransferPayload};
use acorp_service::client::{Client, ClientResult};
use acorp_service::config::{ClockMode, ServiceConfig};
use acorp_service::server::{spawn, AppState, RunningServer};
use acorp_service::wire::{ActionSubmission, Envelope, RegisterRequest, VerifyRequest};
use serde::Deserialize;

/// Service clock used by every fixture server.
pub const CLOCK: Timestamp = 1_200;

pub fn key(n: u64) -> SecretKey {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&n.to_be_bytes());
    bytes[31] = 0x5C;
    SecretKey::from_bytes(bytes)
}

pub fn config(dir: &Path, mandate: bool) -> ServiceConfig {
    ServiceConfig {
        clock_mode: ClockMode::Fixed(CLOCK),
        mandate,
        fsync: false,
        id_seed: 11,
        ..ServiceConfig::new("127.0.0.1:0", dir)
    }
}

pub fn start(dir: &Path, mandate: bool) -> RunningServer {
    let cfg = config(dir, mandate);
    spawn(AppState::open(&cfg).unwrap(), &cfg.listen_address).unwrap()
}

pub fn scope(specs: &[&str], valid_until: Timestamp) -> Scope {
    Scope::new(specs.iter().map(|s| s.parse::<Grant>().unwrap()), valid_until).unwrap()
}

/// A token id derived from a label, so fixture runs are reproducible.
pub fn token_id(label: &str) -> TokenId {
    TokenId(digest16(b"token", label))
}

pub fn action_id(label: &str) -> ActionId {
    ActionId(digest16(b"action", label))
}

fn digest16(domain: &[u8], label: &str) -> [u8; 16] {
    use sha2::{Digest, Sha256};
    let h = Sha256::new().chain_update(domain).chain_update(label.as_bytes()).finalize();
    h[..16].try_into().unwrap()
}

pub fn register(
    client: &Client,
    master: &SecretKey,
    owner: OwnerRecord,
    capital: u64,
    compute: u64,
    as_of: Timestamp,
) -> ClientResult<(AcorpRecord, Token)> {
    let id = client.reserve()?;
    let label = format!("master-{}", master.public_key());
    let token = mint_master_token(id, token_id(&label), master, capital, as_of);
    let resp = client.register(&RegisterRequest {
        owner,
        master_token: token,
        initial_capital: capital,
        initial_compute: compute,
    })?;
    Ok((resp.record, resp.master_token))
}

pub fn child(parent: &Token, issuer: &SecretKey, label: &str, holder: PublicKey, scope: Scope, as_of: Timestamp) -> Token {
    let mut token = Token {
        token_id: token_id(label),
        acorp_id: parent.acorp_id.clone(),
        holder_public_key: holder,
        scope,
        parent_token_id: Some(parent.token_id),
        issued_at: as_of,
        issuer_signature: SignatureEnvelope::ZERO,
    };
    token.issuer_signature = sign(&token, issuer);
    token
}

pub fn signed_action(
    token: &Token,
    holder: &SecretKey,
    label: &str,
    action: CorporateAction,
    counterparty: &str,
    amount: u64,
    as_of: Timestamp,
) -> ActionRecord {
    let mut record = ActionRecord {
        action_id: action_id(label),
        acorp_id: token.acorp_id.clone(),
        token_id: Some(token.token_id),
        kind: action.kind(),
        counterparty: counterparty.to_owned(),
        amount,
        as_of,
        holder_signature: None,
    };
    record.holder_signature = Some(sign(&record, holder));
    record
}

#[allow(clippy::too_many_arguments)]
pub fn act(
    client: &Client,
    token: &Token,
    holder: &SecretKey,
    label: &str,
    action: CorporateAction,
    counterparty: &str,
    amount: u64,
    as_of: Timestamp,
) -> ClientResult<ActionRecord> {
    let credential = client.credential(&token.token_id)?;
    let record = signed_action(token, holder, label, action, counterparty, amount, as_of);
    client.act(&ActionSubmission { record, credential })
}

pub fn transfer_ownership(client: &Client, acorp: &AcorpRecord, master: &SecretKey, new_owner: OwnerRecord) -> ClientResult<AcorpRecord> {
    let current = client.lookup(&acorp.id)?;
    let payload = TransferPayload {
        acorp_id: acorp.id.clone(),
        new_owner,
        transfer_index: current.owner_history.len() as u64,
    };
    let signature = sign(&payload, master);
    client.transfer(&payload, &signature)
}

pub fn revoke(client: &Client, revoker: &Token, key: &SecretKey, target: &TokenId, as_of: Timestamp) -> ClientResult<()> {
    let request = RevocationRequest {
        target: *target,
        revoker: revoker.token_id,
        reason: "fixture".into(),
        as_of,
    };
    let signature = sign(&request, key);
    client.revoke(&request, &signature).map(|_| ())
}

// ---- the router vignette -------------------------------------------------

/// Hand-written expectations for the vignette, independent of the code
/// that drives it.
#[derive(Debug, Deserialize)]
pub struct Manifest {
    pub acorps: Vec<ManifestAcorp>,
    pub instances: usize,
    pub executed: Vec<ManifestAction>,
    pub refused: Vec<ManifestRefusal>,
}

#[derive(Debug, Deserialize)]
pub struct ManifestAcorp {
    pub label: String,
    pub master_key: u64,
    pub owners: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct ManifestAction {
    pub label: String,
    pub acorp: String,
    pub kind: String,
    pub amount: u64,
    /// Holder key number of the acting token, then each ancestor's.
    pub chain_keys: Vec<u64>,
    pub owner: String,
}

#[derive(Debug, Deserialize)]
pub struct ManifestRefusal {
    pub label: String,
    pub error: String,
    pub reason: Option<String>,
}

pub fn manifest() -> Manifest {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/vignette/manifest.json");
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// What the vignette driver produced.
pub struct Vignette {
    pub acorps: BTreeMap<String, AcorpRecord>,
    /// Executed actions by label.
    pub executed: BTreeMap<String, ActionId>,
    /// Refused actions by label: (error name, reason).
    pub refused: BTreeMap<String, (String, Option<String>)>,
    pub instances: Vec<Token>,
    /// Credentials worth re-verifying after a restart.
    pub credentials: Vec<Credential>,
}

const VALID_UNTIL: Timestamp = 5_000;

/// Re-enacts the router scenario through the service: a personal assistant
/// A-corp spawns seventeen instances with narrow tokens, consults an
/// analysis A-corp, coordinates with a home-hub A-corp, spends through one
/// capped purchaser, changes hands, and has the purchaser revoked.
pub fn run_vignette(client: &Client) -> Vignette {
    let mut v = Vignette {
        acorps: BTreeMap::new(),
        executed: BTreeMap::new(),
        refused: BTreeMap::new(),
        instances: Vec::new(),
        credentials: Vec::new(),
    };
    let reg = |n, name: &str, capital| {
        register(client, &key(n), OwnerRecord::new(name, format!("id-{n}"), 1_000), capital, 1_000, 1_000).unwrap()
    };
    let (assistant, assistant_master) = reg(1, "Avery Quinn", 10_000);
    let (analysis, analysis_master) = reg(2, "Northwind Analytics LLC", 50_000);
    let (hub, hub_master) = reg(3, "Harbor Home Inc", 5_000);

    let orchestrator = child(
        &assistant_master,
        &key(1),
        "orchestrator",
        key(10).public_key(),
        scope(
            &[
                "READ:network:0",
                "READ:services:0",
                "TRANSACT:payments:1000",
                "CONTRACT:contracts:500",
                "TRANSACT:compute:500",
                "DELEGATE:network:0",
            ],
            VALID_UNTIL,
        ),
        1_010,
    );
    client.delegate(&orchestrator).unwrap();

    for i in 1..=17u64 {
        let specs: &[&str] = match i {
            1 => &["READ:network:0"],
            3 => &["TRANSACT:compute:200"],
            5 => &["READ:services:0"],
            7 => &["CONTRACT:contracts:50"],
            12 => &["TRANSACT:payments:100"],
            _ => &["READ:network:0"],
        };
        let token = child(
            &orchestrator,
            &key(10),
            &format!("instance-{i}"),
            key(100 + i).public_key(),
            scope(specs, VALID_UNTIL),
            1_020,
        );
        v.instances.push(client.delegate(&token).unwrap());
    }
    let consultant = child(
        &analysis_master,
        &key(2),
        "consultant",
        key(20).public_key(),
        scope(&["CONTRACT:contracts:500"], VALID_UNTIL),
        1_030,
    );
    client.delegate(&consultant).unwrap();
    let coordinator = child(
        &hub_master,
        &key(3),
        "coordinator",
        key(30).public_key(),
        scope(&["CONTRACT:contracts:100"], VALID_UNTIL),
        1_030,
    );
    client.delegate(&coordinator).unwrap();

    let instances = v.instances.clone();
    let instance = |i: usize| instances[i - 1].clone();
    let a_id = assistant.id.to_string();
    let n_id = analysis.id.to_string();
    let steps: Vec<Step> = vec![
        ("consult-analysis", instance(7), 107, CorporateAction::Contract, n_id.clone(), 40, 1_100),
        ("analysis-engagement", consultant.clone(), 20, CorporateAction::Contract, a_id.clone(), 40, 1_110),
        ("buy-compute", instance(3), 103, CorporateAction::ComputePurchase, "compute-seller".into(), 150, 1_120),
        ("hub-coordination", coordinator.clone(), 30, CorporateAction::Contract, a_id.clone(), 10, 1_130),
        ("buy-mesh-router", instance(12), 112, CorporateAction::Transfer, "router-vendor".into(), 60, 1_140),
        ("buy-over-cap", instance(12), 112, CorporateAction::Transfer, "router-vendor".into(), 150, 1_150),
        ("investigator-spends", instance(5), 105, CorporateAction::Transfer, "optimizer-saas".into(), 1, 1_160),
        ("inspector-contracts", instance(1), 101, CorporateAction::Contract, n_id.clone(), 5, 1_170),
    ];
    run_steps(client, &mut v, steps);

    // Ownership changes at the service clock.
    transfer_ownership(client, &assistant, &key(1), OwnerRecord::new("Blake Rivera", "id-blake", 1_000)).unwrap();

    let steps: Vec<Step> = vec![
        ("buy-extender", instance(12), 112, CorporateAction::Transfer, "router-vendor".into(), 80, 1_300),
        ("consult-again", instance(7), 107, CorporateAction::Contract, n_id.clone(), 20, 1_310),
    ];
    run_steps(client, &mut v, steps);
    revoke(client, &orchestrator, &key(10), &instance(12).token_id, 1_400).unwrap();
    let steps: Vec<Step> = vec![(
        "buy-after-revocation",
        instance(12),
        112,
        CorporateAction::Transfer,
        "router-vendor".into(),
        10,
        1_410,
    )];
    run_steps(client, &mut v, steps);

    for t in [&instance(1), &instance(7), &instance(12), &consultant, &coordinator] {
        v.credentials.push(client.credential(&t.token_id).unwrap());
    }
    v.acorps.insert("assistant".into(), assistant);
    v.acorps.insert("analysis".into(), analysis);
    v.acorps.insert("hub".into(), hub);
    v
}

type Step<'a> = (&'a str, Token, u64, CorporateAction, String, u64, Timestamp);

fn run_steps(client: &Client, v: &mut Vignette, steps: Vec<Step>) {
    for (label, token, holder, action, counterparty, amount, at) in steps {
        match act(client, &token, &key(holder), label, action, &counterparty, amount, at) {
            Ok(record) => {
                v.executed.insert(label.to_owned(), record.action_id);
            }
            Err(acorp_service::client::ClientError::Api { body, .. }) => {
                v.refused.insert(label.to_owned(), (body.error, body.reason));
            }
            Err(e) => panic!("{label}: {e}"),
        }
    }
}

/// Checks every executed action's provenance against the manifest. Returns
/// the list of mismatches (empty on success).
pub fn check_vignette(client: &Client, v: &Vignette, m: &Manifest) -> Vec<String> {
    let mut problems = Vec::new();
    macro_rules! expect {
        ($ok:expr, $msg:expr $(,)?) => {
            if !$ok {
                problems.push($msg)
            }
        };
    }
    expect!(v.instances.len() == m.instances, format!("{} instances", v.instances.len()));
    let executed: Vec<&String> = v.executed.keys().collect();
    let mut wanted: Vec<&String> = m.executed.iter().map(|a| &a.label).collect();
    wanted.sort();
    expect!(executed == wanted, format!("executed {executed:?}, manifest {wanted:?}"));
    for want in &m.refused {
        let got = v.refused.get(&want.label);
        expect!(
            got == Some(&(want.error.clone(), want.reason.clone())),
            format!("{}: refused with {got:?}", want.label),
        );
    }
    expect!(v.refused.len() == m.refused.len(), format!("{} refusals", v.refused.len()));

    for want in &m.executed {
        let Some(id) = v.executed.get(&want.label) else { continue };
        let chain = match client.trace(id) {
            Ok(chain) => chain,
            Err(e) => {
                problems.push(format!("{}: trace failed: {e}", want.label));
                continue;
            }
        };
        let acorp = &m.acorps.iter().find(|a| a.label == want.acorp).unwrap();
        let record = &v.acorps[&want.acorp];
        let holders: Vec<PublicKey> = chain.tokens.iter().map(|t| t.holder_public_key).collect();
        let wanted_holders: Vec<PublicKey> = want.chain_keys.iter().map(|&n| key(n).public_key()).collect();
        expect!(holders == wanted_holders, format!("{}: chain holders differ", want.label));
        let masters = chain.tokens.iter().filter(|t| t.is_master()).count();
        expect!(masters == 1, format!("{}: {masters} master tokens in chain", want.label));
        expect!(
            chain.master().map(|t| t.holder_public_key) == Some(key(acorp.master_key).public_key()),
            format!("{}: wrong master key", want.label),
        );
        expect!(
            chain.tokens.iter().all(|t| t.acorp_id == record.id) && chain.acorp.id == record.id,
            format!("{}: chain leaves its A-corp", want.label),
        );
        expect!(chain.owner.owner_name == want.owner, format!("{}: owner {}", want.label, chain.owner.owner_name));
        expect!(acorp.owners.contains(&want.owner), format!("{}: owner not in manifest acorp", want.label));
        expect!(
            chain.action.kind.to_string() == want.kind && chain.action.amount == want.amount,
            format!("{}: action body differs", want.label),
        );
    }
    for acorp in &m.acorps {
        let got = client.lookup(&v.acorps[&acorp.label].id).unwrap();
        let owners: Vec<&str> = got.owner_history.iter().map(|o| o.owner_name.as_str()).collect();
        expect!(owners == acorp.owners, format!("{}: owner history {owners:?}", acorp.label));
        let listed = client.actions(&got.id, 0, Timestamp::MAX).unwrap().len();
        let manifest_count = m.executed.iter().filter(|a| a.acorp == acorp.label).count();
        expect!(listed == manifest_count, format!("{}: {listed} actions listed", acorp.label));
    }
    problems
}

/// Every read the service offers over the vignette's objects, plus a
/// `/verify` per saved credential at the service clock: status and raw body.
pub fn api_snapshot(client: &Client, v: &Vignette) -> Vec<(String, u16, Vec<u8>)> {
    use reqwest::Method;
    let mut paths = vec!["/revocations".to_owned(), "/audit/integrity".to_owned()];
    for acorp in v.acorps.values() {
        for suffix in ["", "/master-key", "/account", "/tree"] {
            paths.push(format!("/acorps/{}{suffix}", acorp.id));
        }
        paths.push(format!("/audit/actions?acorp={}&from=0&to=99999", acorp.id));
        paths.push(format!("/revocations?acorp={}", acorp.id));
    }
    for id in v.executed.values() {
        paths.push(format!("/audit/trace/{id}"));
    }
    for t in &v.instances {
        paths.push(format!("/tokens/{}/credential", t.token_id));
    }
    let mut out: Vec<(String, u16, Vec<u8>)> = paths
        .into_iter()
        .map(|p| {
            let (status, body) = client.raw(Method::GET, &p, None).unwrap();
            (p, status, body)
        })
        .collect();
    for (i, c) in v.credentials.iter().enumerate() {
        let body = Envelope::wrap(&VerifyRequest {
            credential: c.clone(),
            request: Some("TRANSACT:payments:50".parse().unwrap()),
            as_of: None,
        })
        .to_json();
        let (status, resp) = client.raw(Method::POST, "/verify", Some(body)).unwrap();
        out.push((format!("verify#{i}"), status, resp));
    }
    out
}

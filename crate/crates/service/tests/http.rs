//! End-to-end tests against a live service on a loopback port.

mod common;

use acorp_core::capability::{Credential, FailureReason};
use acorp_core::governance::{sign, ActionRequest, OwnerRecord};
use acorp_core::ledger::CorporateAction;
use acorp_core::registry::TransferPayload;
use acorp_service::client::{Client, ClientError};
use acorp_service::config::ServiceConfig;
use acorp_service::server::AppState;
use acorp_service::wire::{ActionSubmission, ConfiscateRequest, VerifyRequest};
use acorp_service::ServiceError;
use common::*;
use reqwest::Method;

/// One A-corp with the "$10,000 token" under its master.
fn ten_thousand_fixture(client: &Client) -> (acorp_core::registry::AcorpRecord, acorp_core::capability::Token) {
    let (acorp, master) =
        register(client, &key(1), OwnerRecord::new("Dana Park", "id-dana", 5_000), 20_000, 500, 900).unwrap();
    let token = child(
        &master,
        &key(1),
        "ten-thousand",
        key(2).public_key(),
        scope(&["TRANSACT:payments:10000"], 2_000),
        950,
    );
    (acorp, client.delegate(&token).unwrap())
}

fn verify(client: &Client, credential: &Credential, request: &str, as_of: u64) -> acorp_core::capability::Verdict {
    client
        .verify(&VerifyRequest {
            credential: credential.clone(),
            request: Some(request.parse::<ActionRequest>().unwrap()),
            as_of: Some(as_of),
        })
        .unwrap()
}

#[test]
fn verify_allows_within_cap_and_rejects_beyond() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), true);
    let client = Client::new(server.url()).unwrap();
    let (_, token) = ten_thousand_fixture(&client);
    let credential = client.credential(&token.token_id).unwrap();
    assert_eq!(credential.chain.len(), 2);

    let ok = verify(&client, &credential, "TRANSACT:payments:9900", 1_000);
    assert!(ok.allowed);
    assert_eq!(ok.chain_depth, 1);
    let over = verify(&client, &credential, "TRANSACT:payments:11000", 1_000);
    assert!(!over.allowed);
    assert_eq!(over.failure_reason, Some(FailureReason::ScopeMismatch));
    assert_eq!(over.label(), "ScopeMismatch");
    let boundary = verify(&client, &credential, "TRANSACT:payments:10000", 1_000);
    assert!(boundary.allowed);
    let late = verify(&client, &credential, "TRANSACT:payments:1", 2_001);
    assert_eq!(late.failure_reason, Some(FailureReason::Expired));
}

#[test]
fn vignette_traces_end_in_fixture_owners() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), true);
    let client = Client::new(server.url()).unwrap();
    let v = run_vignette(&client);
    let problems = check_vignette(&client, &v, &manifest());
    assert!(problems.is_empty(), "{problems:#?}");

    let chain = client.trace(&v.executed["buy-mesh-router"]).unwrap();
    assert_eq!(chain.owner.owner_name, "Avery Quinn");
    let chain = client.trace(&v.executed["buy-extender"]).unwrap();
    assert_eq!(chain.owner.owner_name, "Blake Rivera");
}

#[test]
fn errors_carry_names_and_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), true);
    let client = Client::new(server.url()).unwrap();
    let (acorp, token) = ten_thousand_fixture(&client);

    let status_of = |e: ClientError| match e {
        ClientError::Api { status, body } => (status, body.error),
        other => panic!("{other}"),
    };
    assert_eq!(
        status_of(client.trace(&action_id("nothing")).unwrap_err()),
        (404, "UnknownAction".into())
    );
    let unknown = acorp_core::governance::AcorpId::parse("ZZZZZZZZZZZZZZZZZZZZ").unwrap();
    assert_eq!(status_of(client.lookup(&unknown).unwrap_err()).0, 404);

    let (status, body) = client.raw(Method::POST, "/verify", Some("{\"payload\":\"AAAA\"}".into())).unwrap();
    assert_eq!(status, 400);
    assert!(String::from_utf8(body).unwrap().contains("\"error\":\"EncodingError\""));

    // The master key signs transfers; the token holder cannot.
    let payload = TransferPayload {
        acorp_id: acorp.id.clone(),
        new_owner: OwnerRecord::new("Mallory", "id-m", 1),
        transfer_index: 1,
    };
    assert_eq!(
        status_of(client.transfer(&payload, &sign(&payload, &key(2))).unwrap_err()),
        (403, "BadSignature".into())
    );

    // The service clock is 1,200; an action stamped earlier than the last
    // logged mutation is a conflict.
    client
        .confiscate(&ConfiscateRequest {
            acorp_id: acorp.id.clone(),
            amount: 10,
            legal_order: "order-1".into(),
        })
        .unwrap();
    let err = act(&client, &token, &key(2), "late", CorporateAction::Transfer, "x", 1, 1_000).unwrap_err();
    assert_eq!(status_of(err), (409, "ClockRegression".into()));
}

#[test]
fn mandate_flag_controls_bare_credentials() {
    for mandate in [true, false] {
        let dir = tempfile::tempdir().unwrap();
        let server = start(dir.path(), mandate);
        let client = Client::new(server.url()).unwrap();
        let (_, token) = ten_thousand_fixture(&client);
        // The leaf alone, without its ancestors: the registry knows the
        // token, but a counterparty cannot verify the chain.
        let bare = Credential { chain: vec![token.clone()] };
        let record = signed_action(&token, &key(2), "bare", CorporateAction::Transfer, "shop", 10, 1_000);
        let result = client.act(&ActionSubmission { record, credential: bare });
        if mandate {
            match result.unwrap_err() {
                ClientError::Api { status, body } => {
                    assert_eq!(status, 403);
                    assert_eq!(body.error, "Unauthorized");
                    assert!(body.reason.is_some());
                }
                other => panic!("{other}"),
            }
        } else {
            assert_eq!(result.unwrap().amount, 10);
        }
    }
}

#[test]
fn restart_reproduces_every_get_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path(), true);
    let client = Client::new(server.url()).unwrap();
    let v = run_vignette(&client);

    let snapshot = |client: &Client| api_snapshot(client, &v);
    let before = snapshot(&client);
    assert!(before.iter().all(|(_, s, _)| *s == 200));
    server.stop();

    let server = start(dir.path(), true);
    let client = Client::new(server.url()).unwrap();
    assert_eq!(snapshot(&client), before);
    assert!(client.integrity().unwrap().intact);

    // And again from a snapshot plus an empty tail.
    server.state.read().write_snapshot().unwrap();
    server.stop();
    let server = start(dir.path(), true);
    assert_eq!(snapshot(&Client::new(server.url()).unwrap()), before);
}

#[test]
fn corrupt_log_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    {
        let server = start(dir.path(), true);
        ten_thousand_fixture(&Client::new(server.url()).unwrap());
    }
    let log = dir.path().join(acorp_core::authority::LOG_FILE);
    let mut bytes = std::fs::read(&log).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&log, bytes).unwrap();
    match AppState::open(&config(dir.path(), true)) {
        Err(ServiceError::CorruptDataDir(_)) => {}
        other => panic!("expected CorruptDataDir, got {:?}", other.err()),
    }
}

#[test]
fn bind_failure_and_bad_config_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap().to_string();
    let state = AppState::open(&config(dir.path(), true)).unwrap();
    assert!(matches!(
        acorp_service::server::spawn(state, &addr),
        Err(ServiceError::BindFailure(_))
    ));
    let mut cfg = ServiceConfig::new("127.0.0.1:0", dir.path());
    cfg.compute_price = 0;
    assert!(matches!(AppState::open(&cfg), Err(ServiceError::Config(_))));
}

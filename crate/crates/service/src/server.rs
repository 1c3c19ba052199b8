//! The HTTP service.
//!
//! | method | path                      | request payload     | response payload     |
//! |--------|---------------------------|---------------------|----------------------|
//! | POST   | /acorps/reserve           | (none)              | AcorpId              |
//! | POST   | /acorps                   | RegisterRequest     | RegisterResponse     |
//! | GET    | /acorps/{id}              |                     | AcorpRecord          |
//! | GET    | /acorps/{id}/master-key   |                     | MasterKeyRecord      |
//! | GET    | /acorps/{id}/account      |                     | LedgerAccount        |
//! | GET    | /acorps/{id}/tree         |                     | DelegationTree       |
//! | POST   | /acorps/{id}/transfer     | TransferPayload + signature | AcorpRecord  |
//! | POST   | /acorps/{id}/status       | StatusRequest       | AcorpRecord          |
//! | POST   | /tokens/delegate          | Token               | Token                |
//! | POST   | /tokens/revoke            | RevocationRequest + signature | RevocationRecord |
//! | GET    | /tokens/{id}/credential   |                     | Credential           |
//! | POST   | /verify                   | VerifyRequest       | Verdict              |
//! | POST   | /actions                  | ActionSubmission    | ActionRecord         |
//! | POST   | /sanctions/confiscate     | ConfiscateRequest   | ConfiscationReport   |
//! | POST   | /sanctions/payout         | PayoutRequest       | PayoutReport         |
//! | GET    | /audit/trace/{action_id}  |                     | ProvenanceChain      |
//! | GET    | /audit/actions?acorp=&from=&to= |               | list of ActionRecord |
//! | GET    | /audit/integrity          |                     | IntegrityReport      |
//! | GET    | /revocations?acorp=       |                     | list of RevocationRecord |
//!
//! Successful responses are 200. Errors carry the error name verbatim with
//! 400 (malformed input), 403 (authorization), 404 (unknown object),
//! 409 (state conflict) or 500 (storage).

use std::net::SocketAddr;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::thread::JoinHandle;

use acorp_core::capability::{verify_credential, Credential, FailureReason, RevocationRequest, Token, TokenId, Verdict};
use acorp_core::governance::{AcorpId, ActionRequest, CanonicalEncode, EncodingError, Timestamp};
use acorp_core::ledger::CorporateAction;
use acorp_core::registry::TransferPayload;
use acorp_core::{Authority, Error};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use tokio::sync::oneshot;

use crate::config::{ClockMode, ServiceConfig};
use crate::wire::{
    ActionSubmission, ConfiscateRequest, Envelope, ErrorBody, PayoutRequest, RegisterRequest, RegisterResponse,
    StatusRequest, VerifyRequest,
};
use crate::ServiceError;

struct Shared {
    authority: RwLock<Authority>,
    clock: ClockMode,
    mandate: bool,
}

/// Shared service state: one authority behind a reader-writer lock. Reads
/// run in parallel; every mutation takes the write lock, so mutations are
/// totally ordered by the log.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(authority: Authority, clock: ClockMode, mandate: bool) -> Self {
        Self {
            shared: Arc::new(Shared {
                authority: RwLock::new(authority),
                clock,
                mandate,
            }),
        }
    }

    /// Opens the data directory, refusing to start on a broken log.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let authority = Authority::open(config.authority_config(), &config.data_dir, config.fsync)
            .map_err(|e| ServiceError::CorruptDataDir(e.to_string()))?;
        let report = authority.verify_log_integrity();
        if !report.intact {
            return Err(ServiceError::CorruptDataDir(format!(
                "log breaks at entry {}",
                report.first_break.unwrap_or(0)
            )));
        }
        Ok(Self::new(authority, config.clock_mode, config.mandate))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Authority> {
        self.shared.authority.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Authority> {
        self.shared.authority.write().unwrap_or_else(|e| e.into_inner())
    }

    /// The service clock, never behind the last logged mutation.
    fn now(&self, authority: &Authority) -> Timestamp {
        self.shared.clock.read().max(authority.clock_floor())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::MalformedKey(_) | Error::Encoding(_) => StatusCode::BAD_REQUEST,
            Error::BadSignature
            | Error::Unauthorized(_)
            | Error::KeyMismatch
            | Error::NotAncestor
            | Error::NoDelegateRight
            | Error::ScopeEscalation
            | Error::ParentInvalid(_)
            | Error::ChainTooDeep => StatusCode::FORBIDDEN,
            Error::NotFound | Error::UnknownToken | Error::UnknownAction => StatusCode::NOT_FOUND,
            Error::DuplicateMasterKey
            | Error::IllegalTransition
            | Error::NotActive
            | Error::AcorpInactive
            | Error::InsufficientFunds
            | Error::DuplicateToken
            | Error::ClockRegression { .. } => StatusCode::CONFLICT,
            Error::StorageFailure(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let reason = match &e {
            Error::Unauthorized(r) | Error::ParentInvalid(r) => Some(r.name().to_owned()),
            _ => None,
        };
        Self {
            status,
            body: ErrorBody {
                error: e.name().to_owned(),
                message: e.to_string(),
                reason,
            },
        }
    }
}

impl From<EncodingError> for ApiError {
    fn from(e: EncodingError) -> Self {
        Error::Encoding(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, serde_json::to_string(&self.body).expect("error serializes"))
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

type Reply = Result<Response, ApiError>;

fn ok<T: CanonicalEncode + ?Sized>(value: &T) -> Reply {
    Ok(json_response(StatusCode::OK, Envelope::wrap(value).to_json()))
}

fn envelope(body: &Bytes) -> Result<Envelope, ApiError> {
    Ok(Envelope::from_json(body)?)
}

fn signed<T: acorp_core::governance::CanonicalDecode>(
    body: &Bytes,
) -> Result<(T, acorp_core::governance::SignatureEnvelope), ApiError> {
    let env = envelope(body)?;
    let signature = env
        .signature()?
        .ok_or_else(|| Error::InvalidInput("this endpoint requires a signature".into()))?;
    Ok((env.open()?, signature))
}

fn acorp_id(raw: &str) -> Result<AcorpId, ApiError> {
    AcorpId::parse(raw).map_err(|e| Error::InvalidInput(e.to_string()).into())
}

fn hex_id<T: std::str::FromStr<Err = EncodingError>>(raw: &str) -> Result<T, ApiError> {
    raw.parse().map_err(|e: EncodingError| Error::InvalidInput(e.to_string()).into())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/acorps/reserve", post(reserve))
        .route("/acorps", post(register))
        .route("/acorps/{id}", get(lookup))
        .route("/acorps/{id}/master-key", get(master_key))
        .route("/acorps/{id}/account", get(account))
        .route("/acorps/{id}/tree", get(tree))
        .route("/acorps/{id}/transfer", post(transfer))
        .route("/acorps/{id}/status", post(set_status))
        .route("/tokens/delegate", post(delegate))
        .route("/tokens/revoke", post(revoke))
        .route("/tokens/{id}/credential", get(credential))
        .route("/verify", post(verify))
        .route("/actions", post(act))
        .route("/sanctions/confiscate", post(confiscate))
        .route("/sanctions/payout", post(payout))
        .route("/audit/trace/{action_id}", get(trace))
        .route("/audit/actions", get(list_actions))
        .route("/audit/integrity", get(integrity))
        .route("/revocations", get(revocations))
        .with_state(state)
}

async fn reserve(State(s): State<AppState>) -> Reply {
    ok(&s.write().reserve_acorp_id())
}

async fn register(State(s): State<AppState>, body: Bytes) -> Reply {
    let req: RegisterRequest = envelope(&body)?.open()?;
    let (record, master_token) =
        s.write()
            .submit_registration(req.owner, req.master_token, req.initial_capital, req.initial_compute)?;
    ok(&RegisterResponse { record, master_token })
}

async fn lookup(State(s): State<AppState>, Path(id): Path<String>) -> Reply {
    ok(s.read().lookup_acorp(&acorp_id(&id)?)?)
}

async fn master_key(State(s): State<AppState>, Path(id): Path<String>) -> Reply {
    ok(&s.read().master_key_record(&acorp_id(&id)?)?)
}

async fn account(State(s): State<AppState>, Path(id): Path<String>) -> Reply {
    ok(s.read().account(&acorp_id(&id)?)?)
}

async fn tree(State(s): State<AppState>, Path(id): Path<String>) -> Reply {
    ok(&s.read().delegation_tree(&acorp_id(&id)?)?)
}

async fn transfer(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Reply {
    let id = acorp_id(&id)?;
    let (payload, signature) = signed::<TransferPayload>(&body)?;
    if payload.acorp_id != id {
        return Err(Error::InvalidInput("payload names a different A-corp".into()).into());
    }
    let mut auth = s.write();
    let now = s.now(&auth);
    ok(&auth.record_ownership_transfer(&id, payload.new_owner, &signature, now)?)
}

async fn set_status(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Reply {
    let id = acorp_id(&id)?;
    let req: StatusRequest = envelope(&body)?.open()?;
    let mut auth = s.write();
    let now = s.now(&auth);
    ok(&auth.set_status(&id, req.status, &req.legal_order, now)?)
}

async fn delegate(State(s): State<AppState>, body: Bytes) -> Reply {
    let token: Token = envelope(&body)?.open()?;
    ok(&s.write().submit_delegation(token)?)
}

async fn revoke(State(s): State<AppState>, body: Bytes) -> Reply {
    let (request, signature) = signed::<RevocationRequest>(&body)?;
    ok(&s.write().submit_revocation(request, signature)?)
}

async fn credential(State(s): State<AppState>, Path(id): Path<String>) -> Reply {
    ok(&s.read().credential(&hex_id::<TokenId>(&id)?)?)
}

/// Verifies a presented credential exactly as an offline counterparty would,
/// against the registry's master key record and revocation list.
pub fn verify_presented(
    authority: &Authority,
    credential: &Credential,
    request: Option<&ActionRequest>,
    as_of: Timestamp,
) -> Verdict {
    let Some(master) = credential
        .chain
        .last()
        .and_then(|t| authority.master_key_record(&t.acorp_id).ok())
    else {
        return Verdict::deny(FailureReason::UnknownToken, credential.chain.len().saturating_sub(1) as u32);
    };
    verify_credential(credential, &master, authority.capabilities().revocations(), request, as_of)
}

async fn verify(State(s): State<AppState>, body: Bytes) -> Reply {
    let req: VerifyRequest = envelope(&body)?.open()?;
    let auth = s.read();
    let as_of = req.as_of.unwrap_or_else(|| s.now(&auth));
    ok(&verify_presented(&auth, &req.credential, req.request.as_ref(), as_of))
}

async fn act(State(s): State<AppState>, body: Bytes) -> Reply {
    let sub: ActionSubmission = envelope(&body)?.open()?;
    let token = sub
        .credential
        .leaf()
        .cloned()
        .ok_or_else(|| Error::InvalidInput("credential is empty".into()))?;
    let action = CorporateAction::from_kind(sub.record.kind)
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a corporate action", sub.record.kind)))?;
    let (class, resource) = action.requirement();
    let request = ActionRequest::new(class, resource, sub.record.amount);

    let mut auth = s.write();
    let verdict = verify_presented(&auth, &sub.credential, Some(&request), sub.record.as_of);
    if let Some(reason) = verdict.failure_reason {
        if s.shared.mandate {
            return Err(match reason {
                FailureReason::AcorpInactive => Error::AcorpInactive,
                other => Error::Unauthorized(other),
            }
            .into());
        }
        tracing::warn!(
            action = %sub.record.action_id,
            %reason,
            "verification mandate off: accepting an action whose credential does not verify"
        );
    }
    ok(&auth.submit_action(sub.record, &token)?)
}

async fn confiscate(State(s): State<AppState>, body: Bytes) -> Reply {
    let req: ConfiscateRequest = envelope(&body)?.open()?;
    let mut auth = s.write();
    let now = s.now(&auth);
    ok(&auth.confiscate(&req.acorp_id, req.amount, &req.legal_order, now)?)
}

async fn payout(State(s): State<AppState>, body: Bytes) -> Reply {
    let req: PayoutRequest = envelope(&body)?.open()?;
    let mut auth = s.write();
    let now = s.now(&auth);
    ok(&auth.liability_payout(&req.acorp_id, req.claim, now)?)
}

async fn trace(State(s): State<AppState>, Path(id): Path<String>) -> Reply {
    ok(&s.read().trace(&hex_id(&id)?)?)
}

#[derive(Deserialize)]
struct ActionsQuery {
    acorp: String,
    from: Option<Timestamp>,
    to: Option<Timestamp>,
}

async fn list_actions(State(s): State<AppState>, Query(q): Query<ActionsQuery>) -> Reply {
    let id = acorp_id(&q.acorp)?;
    ok(&s.read().list_actions(&id, q.from.unwrap_or(0), q.to.unwrap_or(Timestamp::MAX)))
}

async fn integrity(State(s): State<AppState>) -> Reply {
    ok(&s.read().verify_log_integrity())
}

#[derive(Deserialize)]
struct RevocationsQuery {
    acorp: Option<String>,
}

async fn revocations(State(s): State<AppState>, Query(q): Query<RevocationsQuery>) -> Reply {
    let id = q.acorp.as_deref().map(acorp_id).transpose()?;
    ok(&s.read().revocation_list(id.as_ref()))
}

/// A service running on a background thread with its own runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: AppState,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting requests and waits for in-flight ones to finish.
    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Binds `listen_address` and serves `state` on a background thread.
pub fn spawn(state: AppState, listen_address: &str) -> Result<RunningServer, ServiceError> {
    let listener = std::net::TcpListener::bind(listen_address)
        .map_err(|e| ServiceError::BindFailure(format!("{listen_address}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| ServiceError::BindFailure(e.to_string()))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| ServiceError::BindFailure(e.to_string()))?;
    let (tx, rx) = oneshot::channel();
    let app = router(state.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| ServiceError::BindFailure(e.to_string()))?;
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers");
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(RunningServer {
        addr,
        state,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Runs the service in the foreground until interrupted, then writes a
/// snapshot next to the log.
pub fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::open(config)?;
    let server = spawn(state.clone(), &config.listen_address)?;
    tracing::info!(addr = %server.addr, data_dir = %config.data_dir.display(), mandate = config.mandate, "serving");
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| ServiceError::BindFailure(e.to_string()))?;
    runtime.block_on(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    server.stop();
    state.read().write_snapshot().map_err(|e| ServiceError::CorruptDataDir(e.to_string()))?;
    tracing::info!("stopped");
    Ok(())
}

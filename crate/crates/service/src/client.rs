//! Blocking HTTP client for the service.

use std::time::Duration;

use acorp_core::audit::{IntegrityReport, ProvenanceChain};
use acorp_core::capability::{
    ActionId, Credential, DelegationTree, RevocationRecord, RevocationRequest, Token, TokenId, Verdict,
};
use acorp_core::governance::{AcorpId, CanonicalDecode, EncodingError, SignatureEnvelope, Timestamp};
use acorp_core::ledger::{ActionRecord, ConfiscationReport, LedgerAccount, PayoutReport};
use acorp_core::registry::{AcorpRecord, MasterKeyRecord, TransferPayload};
use reqwest::blocking;
use reqwest::Method;
use thiserror::Error;

use crate::wire::{
    ActionSubmission, ConfiscateRequest, Envelope, ErrorBody, PayoutRequest, RegisterRequest, RegisterResponse,
    StatusRequest, VerifyRequest,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{}: {}", .body.error, .body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("transport: {0}")]
    Transport(String),
    #[error("undecodable response: {0}")]
    Decode(#[from] EncodingError),
}

impl ClientError {
    /// The service error name, or a local category.
    pub fn name(&self) -> &str {
        match self {
            ClientError::Api { body, .. } => &body.error,
            ClientError::Transport(_) => "Transport",
            ClientError::Decode(_) => "EncodingError",
        }
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

pub struct Client {
    base: String,
    http: blocking::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> ClientResult<Self> {
        let http = blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            base: base_url.into().trim_end_matches('/').to_owned(),
            http,
        })
    }

    /// Sends one request and returns the status and raw body.
    pub fn raw(&self, method: Method, path: &str, body: Option<String>) -> ClientResult<(u16, Vec<u8>)> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(body) = body {
            req = req.header("content-type", "application/json").body(body);
        }
        let resp = req.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp.bytes().map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok((status, bytes.to_vec()))
    }

    fn call<T: CanonicalDecode>(&self, method: Method, path: &str, body: Option<Envelope>) -> ClientResult<T> {
        let (status, bytes) = self.raw(method, path, body.map(|e| e.to_json()))?;
        if status != 200 {
            let body = serde_json::from_slice(&bytes).unwrap_or_else(|_| ErrorBody {
                error: format!("Http{status}"),
                message: String::from_utf8_lossy(&bytes).into_owned(),
                reason: None,
            });
            return Err(ClientError::Api { status, body });
        }
        Ok(Envelope::from_json(&bytes)?.open()?)
    }

    fn get<T: CanonicalDecode>(&self, path: &str) -> ClientResult<T> {
        self.call(Method::GET, path, None)
    }

    fn post<T: CanonicalDecode>(&self, path: &str, body: Envelope) -> ClientResult<T> {
        self.call(Method::POST, path, Some(body))
    }

    pub fn reserve(&self) -> ClientResult<AcorpId> {
        self.call(Method::POST, "/acorps/reserve", None)
    }

    pub fn register(&self, req: &RegisterRequest) -> ClientResult<RegisterResponse> {
        self.post("/acorps", Envelope::wrap(req))
    }

    pub fn lookup(&self, id: &AcorpId) -> ClientResult<AcorpRecord> {
        self.get(&format!("/acorps/{id}"))
    }

    pub fn master_key(&self, id: &AcorpId) -> ClientResult<MasterKeyRecord> {
        self.get(&format!("/acorps/{id}/master-key"))
    }

    pub fn account(&self, id: &AcorpId) -> ClientResult<LedgerAccount> {
        self.get(&format!("/acorps/{id}/account"))
    }

    pub fn tree(&self, id: &AcorpId) -> ClientResult<DelegationTree> {
        self.get(&format!("/acorps/{id}/tree"))
    }

    pub fn transfer(&self, payload: &TransferPayload, signature: &SignatureEnvelope) -> ClientResult<AcorpRecord> {
        self.post(
            &format!("/acorps/{}/transfer", payload.acorp_id),
            Envelope::signed(payload, signature),
        )
    }

    pub fn set_status(&self, id: &AcorpId, req: &StatusRequest) -> ClientResult<AcorpRecord> {
        self.post(&format!("/acorps/{id}/status"), Envelope::wrap(req))
    }

    pub fn delegate(&self, token: &Token) -> ClientResult<Token> {
        self.post("/tokens/delegate", Envelope::wrap(token))
    }

    pub fn revoke(&self, req: &RevocationRequest, signature: &SignatureEnvelope) -> ClientResult<RevocationRecord> {
        self.post("/tokens/revoke", Envelope::signed(req, signature))
    }

    pub fn credential(&self, id: &TokenId) -> ClientResult<Credential> {
        self.get(&format!("/tokens/{id}/credential"))
    }

    pub fn verify(&self, req: &VerifyRequest) -> ClientResult<Verdict> {
        self.post("/verify", Envelope::wrap(req))
    }

    pub fn act(&self, sub: &ActionSubmission) -> ClientResult<ActionRecord> {
        self.post("/actions", Envelope::wrap(sub))
    }

    pub fn confiscate(&self, req: &ConfiscateRequest) -> ClientResult<ConfiscationReport> {
        self.post("/sanctions/confiscate", Envelope::wrap(req))
    }

    pub fn payout(&self, req: &PayoutRequest) -> ClientResult<PayoutReport> {
        self.post("/sanctions/payout", Envelope::wrap(req))
    }

    pub fn trace(&self, id: &ActionId) -> ClientResult<ProvenanceChain> {
        self.get(&format!("/audit/trace/{id}"))
    }

    pub fn actions(&self, id: &AcorpId, from: Timestamp, to: Timestamp) -> ClientResult<Vec<ActionRecord>> {
        self.get(&format!("/audit/actions?acorp={id}&from={from}&to={to}"))
    }

    pub fn integrity(&self) -> ClientResult<IntegrityReport> {
        self.get("/audit/integrity")
    }

    pub fn revocations(&self, acorp: Option<&AcorpId>) -> ClientResult<Vec<RevocationRecord>> {
        match acorp {
            Some(id) => self.get(&format!("/revocations?acorp={id}")),
            None => self.get("/revocations"),
        }
    }
}

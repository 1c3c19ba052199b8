//! Chain verification. This is the only verification routine; the online
//! registry path and the offline counterparty path both call it.

use std::collections::HashMap;

use crate::governance::{verify_signed_by, ActionRequest, PublicKey, Timestamp};
use crate::registry::{AcorpStatus, MasterKeyRecord};

use super::token::{Credential, FailureReason, RevocationRecord, Token, TokenId, Verdict};

/// Longest permitted chain of delegations below the master token.
pub const MAX_CHAIN_DEPTH: usize = 32;

pub trait RevocationLookup {
    fn revoked_at(&self, token_id: &TokenId) -> Option<Timestamp>;
}

impl RevocationLookup for HashMap<TokenId, RevocationRecord> {
    fn revoked_at(&self, token_id: &TokenId) -> Option<Timestamp> {
        self.get(token_id).map(|r| r.revoked_at)
    }
}

impl RevocationLookup for std::collections::BTreeMap<TokenId, RevocationRecord> {
    fn revoked_at(&self, token_id: &TokenId) -> Option<Timestamp> {
        self.get(token_id).map(|r| r.revoked_at)
    }
}

/// A published revocation list, as served to offline verifiers.
#[derive(Debug, Clone, Default)]
pub struct RevocationList {
    by_token: HashMap<TokenId, Timestamp>,
}

impl RevocationList {
    pub fn new(records: &[RevocationRecord]) -> Self {
        let mut by_token = HashMap::new();
        for r in records {
            by_token
                .entry(r.token_id)
                .and_modify(|t: &mut Timestamp| *t = (*t).min(r.revoked_at))
                .or_insert(r.revoked_at);
        }
        Self { by_token }
    }
}

impl RevocationLookup for RevocationList {
    fn revoked_at(&self, token_id: &TokenId) -> Option<Timestamp> {
        self.by_token.get(token_id).copied()
    }
}

/// Verifies `chain` (acting token first, master last) at `as_of`.
///
/// Checks, in order of reported precedence: the chain is well linked and
/// belongs to the A-corp; the A-corp is active; every signature verifies
/// against its issuer; no link is revoked; no link has expired; each link's
/// scope dominates its child's; the request, if any, is covered by the
/// acting token's scope.
pub fn verify_chain(
    chain: &[Token],
    master: &MasterKeyRecord,
    revocations: &dyn RevocationLookup,
    request: Option<&ActionRequest>,
    as_of: Timestamp,
) -> Verdict {
    verify_chain_with(chain, master, revocations, request, as_of, &|token, issuer| {
        verify_signed_by(token, &token.issuer_signature, issuer)
    })
}

/// [`verify_chain`] with a pluggable signature check. The registry passes a
/// check that skips tokens it already verified when they were stored.
pub(crate) fn verify_chain_with(
    chain: &[Token],
    master: &MasterKeyRecord,
    revocations: &dyn RevocationLookup,
    request: Option<&ActionRequest>,
    as_of: Timestamp,
    signature_ok: &dyn Fn(&Token, &PublicKey) -> bool,
) -> Verdict {
    let depth = chain.len().saturating_sub(1) as u32;
    let deny = |reason| Verdict::deny(reason, depth);

    if chain.is_empty() || chain.len() > MAX_CHAIN_DEPTH + 1 {
        return deny(FailureReason::UnknownToken);
    }
    let linked = chain.windows(2).all(|w| w[0].parent_token_id == Some(w[1].token_id));
    let rooted = chain.last().is_some_and(Token::is_master);
    let same_acorp = chain.iter().all(|t| t.acorp_id == master.acorp_id);
    if !(linked && rooted && same_acorp) {
        return deny(FailureReason::UnknownToken);
    }

    if master.status_at(as_of) != AcorpStatus::Active {
        return deny(FailureReason::AcorpInactive);
    }

    for (i, token) in chain.iter().enumerate() {
        let issuer = match chain.get(i + 1) {
            Some(parent) => parent.holder_public_key,
            None => master.master_public_key,
        };
        if !signature_ok(token, &issuer) {
            return deny(FailureReason::BadSignature);
        }
    }

    let revoked = |t: &Token| revocations.revoked_at(&t.token_id).is_some_and(|at| at <= as_of);
    if revoked(&chain[0]) {
        return deny(FailureReason::Revoked);
    }
    if chain[1..].iter().any(revoked) {
        return deny(FailureReason::AncestorRevoked);
    }

    if chain.iter().any(|t| t.scope.valid_until() < as_of) {
        return deny(FailureReason::Expired);
    }

    if !chain.windows(2).all(|w| w[1].scope.dominates(&w[0].scope)) {
        return deny(FailureReason::ScopeMismatch);
    }
    if let Some(req) = request {
        if !chain[0].scope.covers(req) {
            return deny(FailureReason::ScopeMismatch);
        }
    }

    Verdict::allow(depth)
}

/// Offline verification of a presented credential against a published master
/// key record and revocation list.
pub fn verify_credential(
    credential: &Credential,
    master: &MasterKeyRecord,
    revocations: &dyn RevocationLookup,
    request: Option<&ActionRequest>,
    as_of: Timestamp,
) -> Verdict {
    verify_chain(&credential.chain, master, revocations, request, as_of)
}

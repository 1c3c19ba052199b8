//! The governance authority: registry, capability store and ledger behind a
//! single write path.
//!
//! Every mutation is validated against current state, encoded as an
//! [`Event`], appended to the audit log and only then applied. State is
//! therefore always the fold of the log, and [`Authority::replay`] rebuilds
//! it bit for bit.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{AuditLog, IntegrityReport, LogEntry, ProvenanceChain};
use crate::capability::{
    verify_chain_with, ActionId, CapabilityStore, Credential, DelegationTree, FailureReason, RevocationRecord,
    RevocationRequest, Token, TokenId, Verdict, MAX_CHAIN_DEPTH,
};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::governance::encoding::tag;
use crate::governance::{
    sign, verify_signed_by, AcorpId, ActionRequest, CanonicalDecode, CanonicalEncode, Decoder, Encoder,
    OwnerRecord, PublicKey, Scope, SecretKey, SignatureEnvelope, Timestamp,
};
use crate::ledger::{
    ActionKind, ActionRecord, BurnOutcome, ConfiscationReport, CorporateAction, DeathNotice, Ledger, LedgerAccount,
    LedgerConfig, PayoutReport,
};
use crate::registry::{AcorpRecord, AcorpStatus, MasterKeyRecord, Registry, TransferPayload};

pub const LOG_FILE: &str = "audit.log";
pub const SNAPSHOT_FILE: &str = "snapshot.bin";

/// Legal-order text recorded when an A-corp dies of compute exhaustion.
pub const INSOLVENCY_ORDER: &str = "insolvency";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityConfig {
    pub ledger: LedgerConfig,
    /// Seed for id generation. Ids depend only on the seed and the log
    /// position, so a restarted authority continues the same sequence.
    pub id_seed: u64,
}

#[derive(Debug)]
pub struct Authority {
    config: AuthorityConfig,
    registry: Registry,
    capabilities: CapabilityStore,
    ledger: Ledger,
    log: AuditLog,
    clock_floor: Timestamp,
    reserved: HashSet<AcorpId>,
    reservations: u64,
    data_dir: Option<PathBuf>,
}

impl Authority {
    pub fn new(config: AuthorityConfig) -> Result<Self> {
        if config.ledger.compute_price == 0 {
            return Err(Error::InvalidInput("compute_price must be at least 1".into()));
        }
        Ok(Self {
            config,
            registry: Registry::default(),
            capabilities: CapabilityStore::default(),
            ledger: Ledger::default(),
            log: AuditLog::in_memory(),
            clock_floor: 0,
            reserved: HashSet::new(),
            reservations: 0,
            data_dir: None,
        })
    }

    /// Rebuilds state by applying every logged event in order. The resulting
    /// authority keeps an in-memory copy of the log.
    pub fn replay(config: AuthorityConfig, entries: &[LogEntry]) -> Result<Self> {
        let mut authority = Self::new(config)?;
        let report = crate::audit::check_chain(entries);
        if !report.intact {
            return Err(Error::StorageFailure(format!(
                "log broken at entry {}",
                report.first_break.unwrap_or(0)
            )));
        }
        for entry in entries {
            authority.replay_entry(entry)?;
            authority.log.append(entry.payload.clone())?;
        }
        Ok(authority)
    }

    /// Opens a data directory: loads the snapshot if present, replays the log
    /// tail after it, and mirrors further appends to the log file.
    pub fn open(config: AuthorityConfig, data_dir: &Path, fsync: bool) -> Result<Self> {
        fs::create_dir_all(data_dir).map_err(|e| Error::StorageFailure(e.to_string()))?;
        let log = AuditLog::open(&data_dir.join(LOG_FILE), fsync)?;
        let mut authority = Self::new(config)?;
        let snapshot_path = data_dir.join(SNAPSHOT_FILE);
        let mut start = 0usize;
        if snapshot_path.exists() {
            let bytes = fs::read(&snapshot_path).map_err(|e| Error::StorageFailure(e.to_string()))?;
            let snap = Snapshot::from_canonical_bytes(&bytes)
                .map_err(|e| Error::StorageFailure(format!("snapshot unreadable: {e}")))?;
            let covered = snap.log_len as usize;
            let head = match covered {
                0 => [0u8; 32],
                n => log
                    .entries()
                    .get(n - 1)
                    .map(|e| e.entry_hash)
                    .ok_or_else(|| Error::StorageFailure("snapshot is ahead of the log".into()))?,
            };
            if head != snap.head_hash {
                return Err(Error::StorageFailure("snapshot does not match the log".into()));
            }
            authority.registry = snap.registry;
            authority.capabilities = snap.capabilities;
            authority.ledger = snap.ledger;
            authority.clock_floor = snap.clock_floor;
            start = covered;
        }
        for entry in &log.entries()[start..] {
            authority.replay_entry(entry)?;
        }
        authority.log = log;
        authority.data_dir = Some(data_dir.to_owned());
        Ok(authority)
    }

    /// Writes a snapshot of current state next to the log (atomically, via
    /// rename). No-op for in-memory authorities.
    pub fn write_snapshot(&self) -> Result<()> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, self.state_bytes())
            .and_then(|_| fs::rename(&tmp, dir.join(SNAPSHOT_FILE)))
            .map_err(|e| Error::StorageFailure(e.to_string()))
    }

    fn replay_entry(&mut self, entry: &LogEntry) -> Result<()> {
        let event = Event::from_canonical_bytes(&entry.payload)?;
        self.check_replayable(&event)
            .map_err(|why| Error::StorageFailure(format!("log entry {} cannot be applied: {why}", entry.seq)))?;
        self.apply(&event);
        Ok(())
    }

    pub fn config(&self) -> &AuthorityConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn capabilities(&self) -> &CapabilityStore {
        &self.capabilities
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn log(&self) -> &AuditLog {
        &self.log
    }

    /// Timestamp of the latest logged mutation; new mutations may not precede it.
    pub fn clock_floor(&self) -> Timestamp {
        self.clock_floor
    }

    /// Canonical encoding of the full state. Two authorities with equal state
    /// bytes are indistinguishable to every read operation.
    pub fn state_bytes(&self) -> Vec<u8> {
        Snapshot::encode_parts(
            self.log.len() as u64,
            &self.log.head_hash(),
            self.clock_floor,
            &self.registry,
            &self.capabilities,
            &self.ledger,
        )
    }

    // ---- id generation -------------------------------------------------

    fn rng(&self, salt: u64) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(self.config.id_seed.to_be_bytes());
        h.update(self.log.next_seq().to_be_bytes());
        h.update(salt.to_be_bytes());
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    fn fresh_acorp_id(&self, rng: &mut ChaCha20Rng) -> AcorpId {
        loop {
            let id = AcorpId::generate(rng);
            if !self.registry.contains(&id) && !self.reserved.contains(&id) {
                return id;
            }
        }
    }

    fn fresh_token_id(&self, rng: &mut ChaCha20Rng) -> TokenId {
        loop {
            let id = TokenId::generate(rng);
            if !self.capabilities.contains(&id) {
                return id;
            }
        }
    }

    fn fresh_action_id(&self) -> ActionId {
        let mut rng = self.rng(0);
        loop {
            let id = ActionId::generate(&mut rng);
            if self.ledger.action(&id).is_none() {
                return id;
            }
        }
    }

    /// Hands out a fresh A-corp id for a client that will sign its own master
    /// token (see [`Authority::submit_registration`]). Reservations are not
    /// logged and do not survive a restart.
    pub fn reserve_acorp_id(&mut self) -> AcorpId {
        self.reservations += 1;
        let mut rng = self.rng(u64::MAX - self.reservations);
        let id = self.fresh_acorp_id(&mut rng);
        self.reserved.insert(id.clone());
        id
    }

    // ---- write path ----------------------------------------------------

    fn check_clock(&self, as_of: Timestamp) -> Result<()> {
        if as_of < self.clock_floor {
            return Err(Error::ClockRegression {
                as_of,
                floor: self.clock_floor,
            });
        }
        Ok(())
    }

    fn commit(&mut self, event: Event) -> Result<()> {
        self.log.append(event.canonical_bytes())?;
        self.apply(&event);
        Ok(())
    }

    fn apply(&mut self, event: &Event) {
        match event {
            Event::AcorpRegistered {
                record,
                master_token,
                initial_capital,
                initial_compute,
            } => {
                self.reserved.remove(&record.id);
                self.registry.apply_register(record.clone());
                self.capabilities.apply_token(master_token.clone());
                self.ledger.apply_seed(&record.id, *initial_capital, *initial_compute);
            }
            Event::OwnershipTransferred { payload, as_of, .. } => {
                let mut owner = payload.new_owner.clone();
                owner.recorded_at = *as_of;
                self.registry.apply_transfer(&payload.acorp_id, owner);
            }
            Event::StatusChanged {
                acorp_id, status, as_of, ..
            } => self.registry.apply_status(acorp_id, *status, *as_of),
            Event::TokenDelegated { token } => self.capabilities.apply_token(token.clone()),
            Event::TokenRevoked { record, .. } => self.capabilities.apply_revocation(record.clone()),
            Event::ActionExecuted {
                record,
                credit_to,
                money_moved,
                compute_units,
            } => {
                match record.kind {
                    ActionKind::Transfer => {
                        self.ledger.apply_transfer(&record.acorp_id, credit_to.as_ref(), *money_moved)
                    }
                    ActionKind::ComputePurchase => {
                        self.ledger
                            .apply_compute_purchase(&record.acorp_id, *money_moved, *compute_units)
                    }
                    _ => {}
                }
                self.ledger.record_action(record.clone());
            }
            Event::Confiscated {
                record,
                collected,
                shortfall,
                ..
            } => {
                self.ledger.apply_confiscation(&record.acorp_id, *collected, *shortfall);
                self.ledger.record_action(record.clone());
            }
            Event::LiabilityPaid { record, report } => {
                self.ledger.apply_payout(&record.acorp_id, report);
                if report.from_owner_stake > 0 {
                    self.registry.apply_stake_draw(&record.acorp_id, report.from_owner_stake);
                }
                self.ledger.record_action(record.clone());
            }
            Event::ComputeBurned {
                acorp_id,
                cover_units,
                cover_cost,
                burned,
                refill_units,
                refill_cost,
                ..
            } => {
                if *cover_units > 0 {
                    self.ledger.apply_compute_purchase(acorp_id, *cover_cost, *cover_units);
                }
                self.ledger.apply_burn(acorp_id, *burned);
                if *refill_units > 0 {
                    self.ledger.apply_compute_purchase(acorp_id, *refill_cost, *refill_units);
                }
            }
            Event::Deposited { acorp_id, amount, .. } => self.ledger.apply_deposit(acorp_id, *amount),
        }
        self.clock_floor = self.clock_floor.max(event.as_of());
    }

    /// Structural checks on a logged event before replaying it. The hash
    /// chain proves the log was not altered after the fact, but not that it
    /// was produced by this code; a log that would drive state inconsistent
    /// is refused rather than applied.
    fn check_replayable(&self, event: &Event) -> std::result::Result<(), String> {
        let account = |id: &AcorpId| {
            self.ledger
                .account(id)
                .cloned()
                .ok_or_else(|| format!("unknown A-corp {id}"))
        };
        if event.as_of() < self.clock_floor {
            return Err("timestamp regression".into());
        }
        match event {
            Event::AcorpRegistered { record, master_token, .. } => {
                if self.registry.contains(&record.id) || self.capabilities.contains(&master_token.token_id) {
                    return Err("duplicate id".into());
                }
                if !master_token.is_master()
                    || master_token.acorp_id != record.id
                    || !verify_signed_by(master_token, &master_token.issuer_signature, &record.master_public_key)
                {
                    return Err("master token does not match its record".into());
                }
            }
            Event::OwnershipTransferred { payload, signature, .. } => {
                let record = self.registry.get(&payload.acorp_id).ok_or("unknown A-corp")?;
                if !verify_signed_by(payload, signature, &record.master_public_key) {
                    return Err("transfer signature".into());
                }
            }
            Event::StatusChanged { acorp_id, status, .. } => {
                let record = self.registry.get(acorp_id).ok_or("unknown A-corp")?;
                if !record.status.can_transition_to(*status) {
                    return Err("illegal transition".into());
                }
            }
            Event::TokenDelegated { token } => {
                let parent = token
                    .parent_token_id
                    .and_then(|p| self.capabilities.get(&p))
                    .ok_or("unknown parent")?;
                if self.capabilities.contains(&token.token_id)
                    || !verify_signed_by(token, &token.issuer_signature, &parent.holder_public_key)
                {
                    return Err("token".into());
                }
            }
            Event::TokenRevoked { record, .. } => {
                if !self.capabilities.contains(&record.token_id) {
                    return Err("unknown token".into());
                }
            }
            Event::ActionExecuted {
                record,
                credit_to,
                money_moved,
                ..
            } => {
                let acct = account(&record.acorp_id)?;
                if let Some(dest) = credit_to {
                    account(dest)?;
                }
                if acct.money < *money_moved {
                    return Err("overdraft".into());
                }
            }
            Event::Confiscated { record, collected, .. } => {
                if account(&record.acorp_id)?.money < *collected {
                    return Err("overdraft".into());
                }
            }
            Event::LiabilityPaid { record, report } => {
                if account(&record.acorp_id)?.money < report.from_assets {
                    return Err("overdraft".into());
                }
                let stake = self.registry.get(&record.acorp_id).map(|r| r.owner.stake_value).unwrap_or(0);
                if stake < report.from_owner_stake {
                    return Err("stake overdraw".into());
                }
            }
            Event::ComputeBurned {
                acorp_id,
                cover_units,
                cover_cost,
                burned,
                refill_cost,
                ..
            } => {
                let acct = account(acorp_id)?;
                if acct.money < cover_cost.saturating_add(*refill_cost)
                    || acct.compute_credits.saturating_add(*cover_units) < *burned
                {
                    return Err("overdraft".into());
                }
            }
            Event::Deposited { acorp_id, .. } => {
                account(acorp_id)?;
            }
        }
        Ok(())
    }

    // ---- registry --------------------------------------------------------

    /// Registers an A-corp in-process. The master token is signed here with
    /// `master_key`, which is not retained.
    pub fn register_acorp(
        &mut self,
        owner: OwnerRecord,
        master_key: &SecretKey,
        initial_capital: u64,
        initial_compute: u64,
        as_of: Timestamp,
    ) -> Result<(AcorpRecord, Token)> {
        let mut rng = self.rng(1);
        let acorp_id = self.fresh_acorp_id(&mut rng);
        let token_id = self.fresh_token_id(&mut rng);
        let master_token = mint_master_token(acorp_id, token_id, master_key, initial_capital, as_of);
        self.submit_registration(owner, master_token, initial_capital, initial_compute)
    }

    /// Registers an A-corp from a master token signed by the registrant. The
    /// token's A-corp id must be fresh (typically obtained from
    /// [`Authority::reserve_acorp_id`]); its `issued_at` is the registration time.
    pub fn submit_registration(
        &mut self,
        mut owner: OwnerRecord,
        master_token: Token,
        initial_capital: u64,
        initial_compute: u64,
    ) -> Result<(AcorpRecord, Token)> {
        let as_of = master_token.issued_at;
        self.check_clock(as_of)?;
        if !owner.is_well_formed() {
            return Err(Error::InvalidInput("owner record needs a name and an id".into()));
        }
        if !master_token.is_master() || master_token.scope != Scope::master(initial_capital) {
            return Err(Error::InvalidInput(
                "master token must be parentless with scope ADMIN:*:<initial_capital>".into(),
            ));
        }
        let master_key = master_token.holder_public_key;
        if !verify_signed_by(&master_token, &master_token.issuer_signature, &master_key) {
            return Err(Error::BadSignature);
        }
        if self.registry.active_holder_of(&master_key).is_some() {
            return Err(Error::DuplicateMasterKey);
        }
        if self.registry.contains(&master_token.acorp_id) {
            return Err(Error::InvalidInput(format!("A-corp id {} already registered", master_token.acorp_id)));
        }
        if self.capabilities.contains(&master_token.token_id) {
            return Err(Error::DuplicateToken);
        }
        owner.recorded_at = as_of;
        let id = master_token.acorp_id.clone();
        let record = AcorpRecord {
            id: id.clone(),
            owner: owner.clone(),
            owner_history: vec![owner],
            master_public_key: master_key,
            status: AcorpStatus::Active,
            status_changed_at: None,
            registered_at: as_of,
            registry_seq: self.registry.last_seq() + 1,
        };
        self.commit(Event::AcorpRegistered {
            record,
            master_token: master_token.clone(),
            initial_capital,
            initial_compute,
        })?;
        Ok((self.registry.get(&id).cloned().expect("just registered"), master_token))
    }

    pub fn lookup_acorp(&self, id: &AcorpId) -> Result<&AcorpRecord> {
        self.registry.get(id).ok_or(Error::NotFound)
    }

    pub fn master_key_record(&self, id: &AcorpId) -> Result<MasterKeyRecord> {
        self.lookup_acorp(id).map(AcorpRecord::master_key_record)
    }

    /// The payload the master key must sign to move ownership to `new_owner`.
    pub fn transfer_payload(&self, id: &AcorpId, new_owner: OwnerRecord) -> Result<TransferPayload> {
        let record = self.lookup_acorp(id)?;
        Ok(TransferPayload {
            acorp_id: id.clone(),
            new_owner,
            transfer_index: record.owner_history.len() as u64,
        })
    }

    pub fn record_ownership_transfer(
        &mut self,
        id: &AcorpId,
        new_owner: OwnerRecord,
        signature: &SignatureEnvelope,
        as_of: Timestamp,
    ) -> Result<AcorpRecord> {
        self.check_clock(as_of)?;
        let record = self.lookup_acorp(id)?;
        if record.status_at(as_of) != AcorpStatus::Active {
            return Err(Error::NotActive);
        }
        if !new_owner.is_well_formed() {
            return Err(Error::InvalidInput("owner record needs a name and an id".into()));
        }
        let payload = self.transfer_payload(id, new_owner)?;
        if !verify_signed_by(&payload, signature, &record.master_public_key) {
            return Err(Error::BadSignature);
        }
        self.commit(Event::OwnershipTransferred {
            payload,
            signature: *signature,
            as_of,
        })?;
        Ok(self.registry.get(id).cloned().expect("exists"))
    }

    /// Moves an ACTIVE A-corp to a terminal status by legal order.
    pub fn set_status(
        &mut self,
        id: &AcorpId,
        status: AcorpStatus,
        legal_order: &str,
        as_of: Timestamp,
    ) -> Result<AcorpRecord> {
        self.check_clock(as_of)?;
        let record = self.lookup_acorp(id)?;
        if !record.status.can_transition_to(status) {
            return Err(Error::IllegalTransition);
        }
        self.commit(Event::StatusChanged {
            acorp_id: id.clone(),
            status,
            legal_order: legal_order.to_owned(),
            as_of,
        })?;
        Ok(self.registry.get(id).cloned().expect("exists"))
    }

    // ---- capabilities ----------------------------------------------------

    /// Online verification of a stored token. A presented token that differs
    /// from the stored one is checked in full and, if it is not the token the
    /// registry issued, reported as unknown.
    pub fn verify(&self, token: &Token, request: Option<&ActionRequest>, as_of: Timestamp) -> Verdict {
        let unknown = Verdict::deny(FailureReason::UnknownToken, 0);
        let Some(stored) = self.capabilities.get(&token.token_id) else {
            return unknown;
        };
        let Some(record) = self.registry.get(&stored.acorp_id) else {
            return unknown;
        };
        let Some(mut chain) = self.capabilities.chain(&stored.token_id) else {
            return unknown;
        };
        let tampered = stored != token;
        chain[0] = token.clone();
        let store = &self.capabilities;
        let verdict = verify_chain_with(
            &chain,
            &record.master_key_record(),
            store.revocations(),
            request,
            as_of,
            &|t, issuer| store.get(&t.token_id) == Some(t) || verify_signed_by(t, &t.issuer_signature, issuer),
        );
        if verdict.allowed && tampered {
            return Verdict::deny(FailureReason::UnknownToken, verdict.chain_depth);
        }
        verdict
    }

    /// The stored chain for `token_id`, as a bundle for offline verifiers.
    pub fn credential(&self, token_id: &TokenId) -> Result<Credential> {
        self.capabilities
            .chain(token_id)
            .map(|chain| Credential { chain })
            .ok_or(Error::UnknownToken)
    }

    /// Mints a child of `parent` signed with `issuer_key`, which must be the
    /// parent holder's key.
    pub fn delegate(
        &mut self,
        parent: &Token,
        issuer_key: &SecretKey,
        holder_public_key: PublicKey,
        scope: Scope,
        as_of: Timestamp,
    ) -> Result<Token> {
        self.check_clock(as_of)?;
        self.check_parent(parent, as_of)?;
        if issuer_key.public_key() != parent.holder_public_key {
            return Err(Error::KeyMismatch);
        }
        let mut rng = self.rng(2);
        let mut token = Token {
            token_id: self.fresh_token_id(&mut rng),
            acorp_id: parent.acorp_id.clone(),
            holder_public_key,
            scope,
            parent_token_id: Some(parent.token_id),
            issued_at: as_of,
            issuer_signature: SignatureEnvelope::ZERO,
        };
        token.issuer_signature = sign(&token, issuer_key);
        self.submit_delegation(token)
    }

    fn check_parent(&self, parent: &Token, as_of: Timestamp) -> Result<()> {
        let verdict = self.verify(parent, None, as_of);
        match verdict.failure_reason {
            Some(reason) => Err(Error::ParentInvalid(reason)),
            None => Ok(()),
        }
    }

    /// Accepts a child token signed elsewhere by the parent holder.
    pub fn submit_delegation(&mut self, token: Token) -> Result<Token> {
        let as_of = token.issued_at;
        self.check_clock(as_of)?;
        let parent = token
            .parent_token_id
            .and_then(|id| self.capabilities.get(&id))
            .ok_or(Error::ParentInvalid(FailureReason::UnknownToken))?
            .clone();
        self.check_parent(&parent, as_of)?;
        if token.acorp_id != parent.acorp_id {
            return Err(Error::InvalidInput("child token names a different A-corp".into()));
        }
        if !verify_signed_by(&token, &token.issuer_signature, &parent.holder_public_key) {
            return Err(Error::BadSignature);
        }
        if !parent.scope.can_delegate() {
            return Err(Error::NoDelegateRight);
        }
        if token.scope.has_wildcard() || !parent.scope.dominates(&token.scope) {
            return Err(Error::ScopeEscalation);
        }
        let depth = self.capabilities.depth(&parent.token_id).unwrap_or(usize::MAX);
        if depth >= MAX_CHAIN_DEPTH {
            return Err(Error::ChainTooDeep);
        }
        if self.capabilities.contains(&token.token_id) {
            return Err(Error::DuplicateToken);
        }
        self.commit(Event::TokenDelegated { token: token.clone() })?;
        Ok(token)
    }

    /// Revokes `target` on the authority of `revoker`, a strict ancestor.
    pub fn revoke(
        &mut self,
        target: &TokenId,
        revoker: &Token,
        revoker_key: &SecretKey,
        reason: &str,
        as_of: Timestamp,
    ) -> Result<RevocationRecord> {
        if revoker_key.public_key() != revoker.holder_public_key {
            return Err(Error::KeyMismatch);
        }
        let request = RevocationRequest {
            target: *target,
            revoker: revoker.token_id,
            reason: reason.to_owned(),
            as_of,
        };
        let signature = sign(&request, revoker_key);
        self.submit_revocation(request, signature)
    }

    /// Accepts a revocation request signed by the revoking token's holder.
    /// Revoking an already revoked token returns the existing record.
    pub fn submit_revocation(
        &mut self,
        request: RevocationRequest,
        signature: SignatureEnvelope,
    ) -> Result<RevocationRecord> {
        let as_of = request.as_of;
        self.check_clock(as_of)?;
        let revoker = self.capabilities.get(&request.revoker).ok_or(Error::UnknownToken)?.clone();
        if !self.capabilities.contains(&request.target) {
            return Err(Error::UnknownToken);
        }
        self.check_parent(&revoker, as_of)?;
        if !verify_signed_by(&request, &signature, &revoker.holder_public_key) {
            return Err(Error::BadSignature);
        }
        if !self.capabilities.is_strict_ancestor(&request.revoker, &request.target) {
            return Err(Error::NotAncestor);
        }
        if let Some(existing) = self.capabilities.revocation(&request.target) {
            return Ok(existing.clone());
        }
        let record = RevocationRecord {
            token_id: request.target,
            revoked_at: as_of,
            revoked_by: request.revoker,
            reason: request.reason.clone(),
        };
        self.commit(Event::TokenRevoked {
            record: record.clone(),
            request,
            signature,
        })?;
        Ok(record)
    }

    /// Published revocations, optionally restricted to one A-corp.
    pub fn revocation_list(&self, acorp: Option<&AcorpId>) -> Vec<RevocationRecord> {
        self.capabilities
            .revocations()
            .values()
            .filter(|r| match acorp {
                Some(id) => self.capabilities.get(&r.token_id).is_some_and(|t| &t.acorp_id == id),
                None => true,
            })
            .cloned()
            .collect()
    }

    pub fn delegation_tree(&self, acorp: &AcorpId) -> Result<DelegationTree> {
        self.lookup_acorp(acorp)?;
        self.capabilities.delegation_tree(acorp).ok_or(Error::NotFound)
    }

    // ---- ledger ----------------------------------------------------------

    pub fn account(&self, id: &AcorpId) -> Result<&LedgerAccount> {
        self.ledger.account(id).ok_or(Error::NotFound)
    }

    fn active_account(&self, id: &AcorpId, as_of: Timestamp) -> Result<&LedgerAccount> {
        let record = self.lookup_acorp(id)?;
        if record.status_at(as_of) != AcorpStatus::Active {
            return Err(Error::AcorpInactive);
        }
        self.account(id)
    }

    /// Builds, signs and submits a corporate action under `token`.
    #[allow(clippy::too_many_arguments)]
    pub fn execute_action(
        &mut self,
        action: CorporateAction,
        acorp: &AcorpId,
        token: &Token,
        holder_key: &SecretKey,
        counterparty: &str,
        amount: u64,
        as_of: Timestamp,
    ) -> Result<ActionRecord> {
        if holder_key.public_key() != token.holder_public_key {
            return Err(Error::Unauthorized(FailureReason::BadSignature));
        }
        let record = self.action_template(action, acorp, token, counterparty, amount, as_of);
        let signature = sign(&record, holder_key);
        self.submit_action(
            ActionRecord {
                holder_signature: Some(signature),
                ..record
            },
            token,
        )
    }

    /// An unsigned action record with a fresh id, ready for the holder to sign.
    pub fn action_template(
        &self,
        action: CorporateAction,
        acorp: &AcorpId,
        token: &Token,
        counterparty: &str,
        amount: u64,
        as_of: Timestamp,
    ) -> ActionRecord {
        ActionRecord {
            action_id: self.fresh_action_id(),
            acorp_id: acorp.clone(),
            token_id: Some(token.token_id),
            kind: action.kind(),
            counterparty: counterparty.to_owned(),
            amount,
            as_of,
            holder_signature: None,
        }
    }

    /// Executes an action record signed by the holder of `token`.
    pub fn submit_action(&mut self, record: ActionRecord, token: &Token) -> Result<ActionRecord> {
        let as_of = record.as_of;
        self.check_clock(as_of)?;
        let action = CorporateAction::from_kind(record.kind)
            .ok_or_else(|| Error::InvalidInput(format!("{:?} is not a corporate action", record.kind)))?;
        let account = self.active_account(&record.acorp_id, as_of)?.clone();
        if record.token_id != Some(token.token_id) || token.acorp_id != record.acorp_id {
            return Err(Error::Unauthorized(FailureReason::UnknownToken));
        }
        let signed = record
            .holder_signature
            .as_ref()
            .is_some_and(|sig| verify_signed_by(&record, sig, &token.holder_public_key));
        if !signed {
            return Err(Error::Unauthorized(FailureReason::BadSignature));
        }
        let (class, resource) = action.requirement();
        let request = ActionRequest::new(class, resource, record.amount);
        let verdict = self.verify(token, Some(&request), as_of);
        match verdict.failure_reason {
            Some(FailureReason::AcorpInactive) => return Err(Error::AcorpInactive),
            Some(reason) => return Err(Error::Unauthorized(reason)),
            None => {}
        }
        if self.ledger.action(&record.action_id).is_some() {
            return Err(Error::InvalidInput("action id already used".into()));
        }

        let price = self.config.ledger.compute_price;
        let (credit_to, money_moved, compute_units) = match action {
            CorporateAction::Transfer => {
                let internal = AcorpId::parse(&record.counterparty)
                    .ok()
                    .filter(|id| self.ledger.account(id).is_some());
                (internal, record.amount, 0)
            }
            CorporateAction::ComputePurchase => {
                let units = record.amount / price;
                (None, units * price, units)
            }
            CorporateAction::Contract => (None, 0, 0),
        };
        if account.money < money_moved {
            return Err(Error::InsufficientFunds);
        }
        self.commit(Event::ActionExecuted {
            record: record.clone(),
            credit_to,
            money_moved,
            compute_units,
        })?;
        Ok(record)
    }

    fn sanction_record(&self, kind: ActionKind, acorp: &AcorpId, counterparty: &str, amount: u64, as_of: Timestamp) -> ActionRecord {
        ActionRecord {
            action_id: self.fresh_action_id(),
            acorp_id: acorp.clone(),
            token_id: None,
            kind,
            counterparty: counterparty.to_owned(),
            amount,
            as_of,
            holder_signature: None,
        }
    }

    fn sanctionable(&self, acorp: &AcorpId) -> Result<&LedgerAccount> {
        let record = self.lookup_acorp(acorp)?;
        if record.status == AcorpStatus::Dead {
            return Err(Error::AcorpInactive);
        }
        self.account(acorp)
    }

    /// Seizes up to `amount` of the A-corp's money by legal order.
    pub fn confiscate(
        &mut self,
        acorp: &AcorpId,
        amount: u64,
        legal_order: &str,
        as_of: Timestamp,
    ) -> Result<ConfiscationReport> {
        self.check_clock(as_of)?;
        let money = self.sanctionable(acorp)?.money;
        let collected = amount.min(money);
        let shortfall = amount - collected;
        let record = self.sanction_record(ActionKind::Confiscation, acorp, legal_order, amount, as_of);
        self.commit(Event::Confiscated {
            record: record.clone(),
            collected,
            shortfall,
            legal_order: legal_order.to_owned(),
        })?;
        Ok(ConfiscationReport {
            record,
            collected,
            shortfall,
        })
    }

    /// Pays a liability claim from the A-corp's assets first, then from the
    /// current owner's stake.
    pub fn liability_payout(&mut self, acorp: &AcorpId, claim: u64, as_of: Timestamp) -> Result<PayoutReport> {
        self.check_clock(as_of)?;
        let money = self.sanctionable(acorp)?.money;
        let stake = self.lookup_acorp(acorp)?.owner.stake_value;
        let report = PayoutReport::waterfall(claim, money, stake);
        let record = self.sanction_record(ActionKind::Payout, acorp, "liability-claim", claim, as_of);
        self.commit(Event::LiabilityPaid { record, report })?;
        Ok(report)
    }

    /// Credits external revenue to an active A-corp.
    pub fn deposit(&mut self, acorp: &AcorpId, source: &str, amount: u64, as_of: Timestamp) -> Result<LedgerAccount> {
        self.check_clock(as_of)?;
        self.active_account(acorp, as_of)?;
        self.commit(Event::Deposited {
            acorp_id: acorp.clone(),
            source: source.to_owned(),
            amount,
            as_of,
        })?;
        Ok(self.account(acorp)?.clone())
    }

    /// Consumes `units` of compute. A shortfall is bought at the configured
    /// price; when the balance reaches zero a repurchase batch is bought. An
    /// A-corp left with no compute and unable to afford one unit dies.
    pub fn burn_compute(&mut self, acorp: &AcorpId, units: u64, as_of: Timestamp) -> Result<BurnOutcome> {
        self.check_clock(as_of)?;
        let account = self.active_account(acorp, as_of)?.clone();
        let price = self.config.ledger.compute_price;
        let (mut money, mut compute) = (account.money, account.compute_credits);

        let cover_units = units.saturating_sub(compute).min(money / price);
        let cover_cost = cover_units * price;
        money -= cover_cost;
        compute += cover_units;
        let burned = units.min(compute);
        compute -= burned;
        let (refill_units, refill_cost) = if compute == 0 {
            let n = self.config.ledger.repurchase_batch.min(money / price);
            (n, n * price)
        } else {
            (0, 0)
        };
        money -= refill_cost;
        compute += refill_units;

        self.commit(Event::ComputeBurned {
            acorp_id: acorp.clone(),
            cover_units,
            cover_cost,
            burned,
            refill_units,
            refill_cost,
            as_of,
        })?;
        if compute == 0 && money < price {
            self.commit(Event::StatusChanged {
                acorp_id: acorp.clone(),
                status: AcorpStatus::Dead,
                legal_order: INSOLVENCY_ORDER.to_owned(),
                as_of,
            })?;
            return Ok(BurnOutcome::Died(DeathNotice {
                acorp_id: acorp.clone(),
                as_of,
                account: self.account(acorp)?.clone(),
            }));
        }
        Ok(BurnOutcome::Alive(self.account(acorp)?.clone()))
    }

    // ---- audit -----------------------------------------------------------

    /// The provenance chain behind one logged action.
    pub fn trace(&self, action_id: &ActionId) -> Result<ProvenanceChain> {
        let action = self.ledger.action(action_id).ok_or(Error::UnknownAction)?.clone();
        let tokens = match &action.token_id {
            Some(id) => self.capabilities.chain(id).unwrap_or_default(),
            None => Vec::new(),
        };
        let acorp = self.lookup_acorp(&action.acorp_id)?.clone();
        let owner = acorp.owner_at(action.as_of).clone();
        Ok(ProvenanceChain {
            action,
            tokens,
            acorp,
            owner,
        })
    }

    /// Actions of one A-corp with `from <= as_of <= to`, in log order.
    pub fn list_actions(&self, acorp: &AcorpId, from: Timestamp, to: Timestamp) -> Vec<ActionRecord> {
        self.ledger
            .actions()
            .iter()
            .filter(|a| &a.acorp_id == acorp && (from..=to).contains(&a.as_of))
            .cloned()
            .collect()
    }

    pub fn verify_log_integrity(&self) -> IntegrityReport {
        self.log.verify_log_integrity()
    }

    /// Decoded events in log order.
    pub fn events(&self) -> Result<Vec<Event>> {
        self.log
            .entries()
            .iter()
            .map(|e| Event::from_canonical_bytes(&e.payload).map_err(Error::from))
            .collect()
    }
}

/// Builds and signs the master token for a new A-corp.
pub fn mint_master_token(
    acorp_id: AcorpId,
    token_id: TokenId,
    master_key: &SecretKey,
    initial_capital: u64,
    issued_at: Timestamp,
) -> Token {
    let mut token = Token {
        token_id,
        acorp_id,
        holder_public_key: master_key.public_key(),
        scope: Scope::master(initial_capital),
        parent_token_id: None,
        issued_at,
        issuer_signature: SignatureEnvelope::ZERO,
    };
    token.issuer_signature = sign(&token, master_key);
    token
}

struct Snapshot {
    log_len: u64,
    head_hash: [u8; 32],
    clock_floor: Timestamp,
    registry: Registry,
    capabilities: CapabilityStore,
    ledger: Ledger,
}

impl Snapshot {
    fn encode_parts(
        log_len: u64,
        head_hash: &[u8; 32],
        clock_floor: Timestamp,
        registry: &Registry,
        capabilities: &CapabilityStore,
        ledger: &Ledger,
    ) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.record(tag::SNAPSHOT, |e| {
            e.u64(log_len);
            e.bytes(head_hash);
            e.u64(clock_floor);
            registry.encode_state(e);
            capabilities.encode_state(e);
            ledger.encode_state(e);
        });
        enc.finish()
    }

    fn from_canonical_bytes(bytes: &[u8]) -> std::result::Result<Self, crate::governance::EncodingError> {
        let mut dec = Decoder::new(bytes);
        let snap = dec.record(tag::SNAPSHOT, |d| {
            Ok(Snapshot {
                log_len: d.u64()?,
                head_hash: d.fixed()?,
                clock_floor: d.u64()?,
                registry: Registry::decode_state(d)?,
                capabilities: CapabilityStore::decode_state(d)?,
                ledger: Ledger::decode_state(d)?,
            })
        })?;
        dec.finish()?;
        Ok(snap)
    }
}

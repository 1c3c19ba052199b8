//! Money and compute balances, corporate actions and legal sanctions.
//!
//! All amounts are integers: money in minor currency units, compute in
//! abstract units. Balances never go negative; anything that would drive
//! them negative is rejected before it reaches the log.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capability::{ActionId, TokenId};
use crate::governance::encoding::tag;
use crate::governance::{
    AcorpId, ActionClass, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, Signable,
    SignatureEnvelope, Timestamp,
};

pub const PAYMENTS_RESOURCE: &str = "payments";
pub const CONTRACTS_RESOURCE: &str = "contracts";
pub const COMPUTE_RESOURCE: &str = "compute";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConfig {
    /// Money units per compute unit.
    pub compute_price: u64,
    /// Compute units bought automatically when the balance runs dry.
    pub repurchase_batch: u64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            compute_price: 1,
            repurchase_batch: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerAccount {
    pub acorp_id: AcorpId,
    pub money: u64,
    pub compute_credits: u64,
}

impl CanonicalEncode for LedgerAccount {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::LEDGER_ACCOUNT, |e| {
            e.value(&self.acorp_id);
            e.u64(self.money);
            e.u64(self.compute_credits);
        });
    }
}

impl CanonicalDecode for LedgerAccount {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::LEDGER_ACCOUNT, |d| {
            Ok(Self {
                acorp_id: d.value()?,
                money: d.u64()?,
                compute_credits: d.u64()?,
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Transfer,
    Contract,
    ComputePurchase,
    Confiscation,
    Payout,
}

impl ActionKind {
    fn code(self) -> u8 {
        match self {
            ActionKind::Transfer => 0,
            ActionKind::Contract => 1,
            ActionKind::ComputePurchase => 2,
            ActionKind::Confiscation => 3,
            ActionKind::Payout => 4,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ActionKind::Transfer,
            1 => ActionKind::Contract,
            2 => ActionKind::ComputePurchase,
            3 => ActionKind::Confiscation,
            4 => ActionKind::Payout,
            _ => return None,
        })
    }

    pub fn is_sanction(self) -> bool {
        matches!(self, ActionKind::Confiscation | ActionKind::Payout)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActionKind::Transfer => "TRANSFER",
            ActionKind::Contract => "CONTRACT",
            ActionKind::ComputePurchase => "COMPUTE_PURCHASE",
            ActionKind::Confiscation => "CONFISCATION",
            ActionKind::Payout => "PAYOUT",
        };
        f.write_str(s)
    }
}

impl CanonicalEncode for ActionKind {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.enum_code(self.code());
    }
}

impl CanonicalDecode for ActionKind {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let code = dec.enum_code()?;
        Self::from_code(code).ok_or_else(|| EncodingError::Invalid(format!("action kind {code}")))
    }
}

/// The token-authorized subset of [`ActionKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorporateAction {
    Transfer,
    Contract,
    ComputePurchase,
}

impl CorporateAction {
    pub fn kind(self) -> ActionKind {
        match self {
            CorporateAction::Transfer => ActionKind::Transfer,
            CorporateAction::Contract => ActionKind::Contract,
            CorporateAction::ComputePurchase => ActionKind::ComputePurchase,
        }
    }

    pub fn from_kind(kind: ActionKind) -> Option<Self> {
        match kind {
            ActionKind::Transfer => Some(CorporateAction::Transfer),
            ActionKind::Contract => Some(CorporateAction::Contract),
            ActionKind::ComputePurchase => Some(CorporateAction::ComputePurchase),
            ActionKind::Confiscation | ActionKind::Payout => None,
        }
    }

    /// The (action class, resource class) a token must cover.
    pub fn requirement(self) -> (ActionClass, &'static str) {
        match self {
            CorporateAction::Transfer => (ActionClass::Transact, PAYMENTS_RESOURCE),
            CorporateAction::Contract => (ActionClass::Contract, CONTRACTS_RESOURCE),
            CorporateAction::ComputePurchase => (ActionClass::Transact, COMPUTE_RESOURCE),
        }
    }
}

impl std::str::FromStr for CorporateAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "transfer" => Ok(CorporateAction::Transfer),
            "contract" => Ok(CorporateAction::Contract),
            "compute" | "compute_purchase" | "compute-purchase" => Ok(CorporateAction::ComputePurchase),
            _ => Err(format!("unknown action kind {s:?}")),
        }
    }
}

/// A logged corporate action. Sovereign sanctions carry no token and no
/// holder signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action_id: ActionId,
    pub acorp_id: AcorpId,
    pub token_id: Option<TokenId>,
    pub kind: ActionKind,
    pub counterparty: String,
    pub amount: u64,
    pub as_of: Timestamp,
    pub holder_signature: Option<SignatureEnvelope>,
}

impl ActionRecord {
    fn encode_with(&self, enc: &mut Encoder, signature: Option<&SignatureEnvelope>) {
        enc.record(tag::ACTION_RECORD, |e| {
            e.value(&self.action_id);
            e.value(&self.acorp_id);
            e.option(self.token_id.as_ref());
            e.value(&self.kind);
            e.str(&self.counterparty);
            e.u64(self.amount);
            e.u64(self.as_of);
            e.option(signature);
        });
    }
}

impl CanonicalEncode for ActionRecord {
    fn encode_into(&self, enc: &mut Encoder) {
        self.encode_with(enc, self.holder_signature.as_ref());
    }
}

impl CanonicalDecode for ActionRecord {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::ACTION_RECORD, |d| {
            Ok(Self {
                action_id: d.value()?,
                acorp_id: d.value()?,
                token_id: d.option()?,
                kind: d.value()?,
                counterparty: d.str()?,
                amount: d.u64()?,
                as_of: d.u64()?,
                holder_signature: d.option()?,
            })
        })
    }
}

impl Signable for ActionRecord {
    fn signing_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_with(&mut enc, Some(&SignatureEnvelope::ZERO));
        enc.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PayoutReport {
    pub from_assets: u64,
    pub from_owner_stake: u64,
    pub unpaid: u64,
}

impl PayoutReport {
    /// Waterfall: A-corp money first, then the owner's stake, then unpaid.
    pub fn waterfall(claim: u64, assets: u64, stake: u64) -> Self {
        let from_assets = claim.min(assets);
        let from_owner_stake = (claim - from_assets).min(stake);
        Self {
            from_assets,
            from_owner_stake,
            unpaid: claim - from_assets - from_owner_stake,
        }
    }
}

impl CanonicalEncode for PayoutReport {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::PAYOUT_REPORT, |e| {
            e.u64(self.from_assets);
            e.u64(self.from_owner_stake);
            e.u64(self.unpaid);
        });
    }
}

impl CanonicalDecode for PayoutReport {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::PAYOUT_REPORT, |d| {
            Ok(Self {
                from_assets: d.u64()?,
                from_owner_stake: d.u64()?,
                unpaid: d.u64()?,
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfiscationReport {
    pub record: ActionRecord,
    pub collected: u64,
    pub shortfall: u64,
}

impl CanonicalEncode for ConfiscationReport {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::CONFISCATE_RESPONSE, |e| {
            e.value(&self.record);
            e.u64(self.collected);
            e.u64(self.shortfall);
        });
    }
}

impl CanonicalDecode for ConfiscationReport {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::CONFISCATE_RESPONSE, |d| {
            Ok(Self {
                record: d.value()?,
                collected: d.u64()?,
                shortfall: d.u64()?,
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeathNotice {
    pub acorp_id: AcorpId,
    pub as_of: Timestamp,
    pub account: LedgerAccount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BurnOutcome {
    Alive(LedgerAccount),
    Died(DeathNotice),
}

/// Running totals for the money conservation identity:
/// `Σ balances + transferred_out + compute_spent + confiscated
///  + paid_out_from_assets = minted + deposited`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub minted: u64,
    pub deposited: u64,
    pub transferred_out: u64,
    pub compute_spent: u64,
    pub confiscated: u64,
    pub uncollected: u64,
    pub paid_out_from_assets: u64,
    pub paid_out_from_stakes: u64,
    pub unpaid_claims: u64,
}

impl LedgerTotals {
    fn fields(&self) -> [u64; 9] {
        [
            self.minted,
            self.deposited,
            self.transferred_out,
            self.compute_spent,
            self.confiscated,
            self.uncollected,
            self.paid_out_from_assets,
            self.paid_out_from_stakes,
            self.unpaid_claims,
        ]
    }
}

impl CanonicalEncode for LedgerTotals {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::LEDGER_TOTALS, |e| {
            for v in self.fields() {
                e.u64(v);
            }
        });
    }
}

impl CanonicalDecode for LedgerTotals {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::LEDGER_TOTALS, |d| {
            Ok(Self {
                minted: d.u64()?,
                deposited: d.u64()?,
                transferred_out: d.u64()?,
                compute_spent: d.u64()?,
                confiscated: d.u64()?,
                uncollected: d.u64()?,
                paid_out_from_assets: d.u64()?,
                paid_out_from_stakes: d.u64()?,
                unpaid_claims: d.u64()?,
            })
        })
    }
}

/// Ledger state: accounts, totals and the ordered action history.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    accounts: BTreeMap<AcorpId, LedgerAccount>,
    totals: LedgerTotals,
    actions: Vec<ActionRecord>,
    index: HashMap<ActionId, usize>,
}

impl Ledger {
    pub fn account(&self, id: &AcorpId) -> Option<&LedgerAccount> {
        self.accounts.get(id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &LedgerAccount> {
        self.accounts.values()
    }

    pub fn totals(&self) -> LedgerTotals {
        self.totals
    }

    pub fn action(&self, id: &ActionId) -> Option<&ActionRecord> {
        self.index.get(id).map(|i| &self.actions[*i])
    }

    /// All action records in log order.
    pub fn actions(&self) -> &[ActionRecord] {
        &self.actions
    }

    pub fn total_money(&self) -> u64 {
        self.accounts.values().map(|a| a.money).sum()
    }

    /// Both sides of the conservation identity.
    pub fn conservation_sides(&self) -> (u128, u128) {
        let t = &self.totals;
        let held = self.accounts.values().map(|a| a.money as u128).sum::<u128>()
            + t.transferred_out as u128
            + t.compute_spent as u128
            + t.confiscated as u128
            + t.paid_out_from_assets as u128;
        let injected = t.minted as u128 + t.deposited as u128;
        (held, injected)
    }

    fn acct(&mut self, id: &AcorpId) -> &mut LedgerAccount {
        self.accounts.get_mut(id).expect("ledger account exists for validated event")
    }

    pub(crate) fn apply_seed(&mut self, id: &AcorpId, money: u64, compute: u64) {
        self.accounts.insert(
            id.clone(),
            LedgerAccount {
                acorp_id: id.clone(),
                money,
                compute_credits: compute,
            },
        );
        self.totals.minted += money;
    }

    pub(crate) fn record_action(&mut self, record: ActionRecord) {
        self.index.insert(record.action_id, self.actions.len());
        self.actions.push(record);
    }

    pub(crate) fn apply_transfer(&mut self, from: &AcorpId, to: Option<&AcorpId>, amount: u64) {
        self.acct(from).money -= amount;
        match to {
            Some(dest) => self.acct(dest).money += amount,
            None => self.totals.transferred_out += amount,
        }
    }

    pub(crate) fn apply_compute_purchase(&mut self, id: &AcorpId, cost: u64, units: u64) {
        let acct = self.acct(id);
        acct.money -= cost;
        acct.compute_credits += units;
        self.totals.compute_spent += cost;
    }

    pub(crate) fn apply_confiscation(&mut self, id: &AcorpId, collected: u64, shortfall: u64) {
        self.acct(id).money -= collected;
        self.totals.confiscated += collected;
        self.totals.uncollected += shortfall;
    }

    pub(crate) fn apply_payout(&mut self, id: &AcorpId, report: &PayoutReport) {
        self.acct(id).money -= report.from_assets;
        self.totals.paid_out_from_assets += report.from_assets;
        self.totals.paid_out_from_stakes += report.from_owner_stake;
        self.totals.unpaid_claims += report.unpaid;
    }

    pub(crate) fn apply_burn(&mut self, id: &AcorpId, burned: u64) {
        self.acct(id).compute_credits -= burned;
    }

    pub(crate) fn apply_deposit(&mut self, id: &AcorpId, amount: u64) {
        self.acct(id).money += amount;
        self.totals.deposited += amount;
    }

    pub(crate) fn encode_state(&self, enc: &mut Encoder) {
        enc.list(self.accounts.values());
        enc.value(&self.totals);
        enc.list(self.actions.iter());
    }

    pub(crate) fn decode_state(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let mut ledger = Ledger::default();
        for account in dec.list::<LedgerAccount>()? {
            ledger.accounts.insert(account.acorp_id.clone(), account);
        }
        ledger.totals = dec.value()?;
        for record in dec.list::<ActionRecord>()? {
            ledger.record_action(record);
        }
        Ok(ledger)
    }
}

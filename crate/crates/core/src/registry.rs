//! The public registry of A-corps: disclosed ownership, published master
//! keys and the status machine.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::governance::encoding::tag;
use crate::governance::{
    AcorpId, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, OwnerRecord, PublicKey, Signable,
    Timestamp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AcorpStatus {
    Active,
    Dissolved,
    Seized,
    Dead,
}

impl AcorpStatus {
    /// Only ACTIVE may move, and only to a terminal state.
    pub fn can_transition_to(self, next: AcorpStatus) -> bool {
        self == AcorpStatus::Active && next != AcorpStatus::Active
    }

    pub fn code(self) -> u8 {
        match self {
            AcorpStatus::Active => 0,
            AcorpStatus::Dissolved => 1,
            AcorpStatus::Seized => 2,
            AcorpStatus::Dead => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => AcorpStatus::Active,
            1 => AcorpStatus::Dissolved,
            2 => AcorpStatus::Seized,
            3 => AcorpStatus::Dead,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AcorpStatus::Active => "ACTIVE",
            AcorpStatus::Dissolved => "DISSOLVED",
            AcorpStatus::Seized => "SEIZED",
            AcorpStatus::Dead => "DEAD",
        }
    }
}

impl fmt::Display for AcorpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcorpStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [AcorpStatus::Active, AcorpStatus::Dissolved, AcorpStatus::Seized, AcorpStatus::Dead]
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

impl CanonicalEncode for AcorpStatus {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.enum_code(self.code());
    }
}

impl CanonicalDecode for AcorpStatus {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let code = dec.enum_code()?;
        Self::from_code(code).ok_or_else(|| EncodingError::Invalid(format!("status {code}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcorpRecord {
    pub id: AcorpId,
    pub owner: OwnerRecord,
    /// Every owner ever recorded, oldest first; the last entry is `owner`.
    pub owner_history: Vec<OwnerRecord>,
    pub master_public_key: PublicKey,
    pub status: AcorpStatus,
    /// When `status` left ACTIVE; `None` while active.
    pub status_changed_at: Option<Timestamp>,
    pub registered_at: Timestamp,
    /// Registry sequence number of the last mutation of this record.
    pub registry_seq: u64,
}

impl AcorpRecord {
    /// Status in force at `as_of`: terminal states apply from the moment they
    /// were recorded onward.
    pub fn status_at(&self, as_of: Timestamp) -> AcorpStatus {
        match self.status_changed_at {
            Some(at) if at <= as_of => self.status,
            _ => AcorpStatus::Active,
        }
    }

    /// The owner whose recording time is the latest at or before `as_of`.
    pub fn owner_at(&self, as_of: Timestamp) -> &OwnerRecord {
        self.owner_history
            .iter()
            .rev()
            .find(|o| o.recorded_at <= as_of)
            .unwrap_or(&self.owner_history[0])
    }

    pub fn master_key_record(&self) -> MasterKeyRecord {
        MasterKeyRecord {
            acorp_id: self.id.clone(),
            master_public_key: self.master_public_key,
            status: self.status,
            status_changed_at: self.status_changed_at,
        }
    }
}

fn encode_opt_ts(e: &mut Encoder, ts: Option<Timestamp>) {
    e.option(ts.as_ref());
}

impl CanonicalEncode for AcorpRecord {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::ACORP_RECORD, |e| {
            e.value(&self.id);
            e.value(&self.owner);
            e.list(self.owner_history.iter());
            e.value(&self.master_public_key);
            e.value(&self.status);
            encode_opt_ts(e, self.status_changed_at);
            e.u64(self.registered_at);
            e.u64(self.registry_seq);
        });
    }
}

impl CanonicalDecode for AcorpRecord {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::ACORP_RECORD, |d| {
            let record = Self {
                id: d.value()?,
                owner: d.value()?,
                owner_history: d.list()?,
                master_public_key: d.value()?,
                status: d.value()?,
                status_changed_at: d.option()?,
                registered_at: d.u64()?,
                registry_seq: d.u64()?,
            };
            if record.owner_history.last() != Some(&record.owner) {
                return Err(EncodingError::Invalid("owner_history must end with owner".into()));
            }
            Ok(record)
        })
    }
}

/// What an offline verifier needs from the registry about one A-corp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasterKeyRecord {
    pub acorp_id: AcorpId,
    pub master_public_key: PublicKey,
    pub status: AcorpStatus,
    pub status_changed_at: Option<Timestamp>,
}

impl MasterKeyRecord {
    pub fn status_at(&self, as_of: Timestamp) -> AcorpStatus {
        match self.status_changed_at {
            Some(at) if at <= as_of => self.status,
            _ => AcorpStatus::Active,
        }
    }
}

impl CanonicalEncode for MasterKeyRecord {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::MASTER_KEY_RECORD, |e| {
            e.value(&self.acorp_id);
            e.value(&self.master_public_key);
            e.value(&self.status);
            encode_opt_ts(e, self.status_changed_at);
        });
    }
}

impl CanonicalDecode for MasterKeyRecord {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::MASTER_KEY_RECORD, |d| {
            Ok(Self {
                acorp_id: d.value()?,
                master_public_key: d.value()?,
                status: d.value()?,
                status_changed_at: d.option()?,
            })
        })
    }
}

/// The payload the master key signs to record an ownership transfer.
/// `transfer_index` is the length of the owner history at signing time, so a
/// signature authorizes exactly one transfer and cannot be replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPayload {
    pub acorp_id: AcorpId,
    pub new_owner: OwnerRecord,
    pub transfer_index: u64,
}

impl CanonicalEncode for TransferPayload {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::TRANSFER_PAYLOAD, |e| {
            e.value(&self.acorp_id);
            e.value(&self.new_owner);
            e.u64(self.transfer_index);
        });
    }
}

impl CanonicalDecode for TransferPayload {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::TRANSFER_PAYLOAD, |d| {
            Ok(Self {
                acorp_id: d.value()?,
                new_owner: d.value()?,
                transfer_index: d.u64()?,
            })
        })
    }
}

impl Signable for TransferPayload {
    fn signing_bytes(&self) -> Vec<u8> {
        self.canonical_bytes()
    }
}

/// Registry state. Mutations arrive already validated by the authority and
/// are applied in log order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    records: BTreeMap<AcorpId, AcorpRecord>,
    active_keys: HashMap<PublicKey, AcorpId>,
    last_seq: u64,
}

impl Registry {
    pub fn get(&self, id: &AcorpId) -> Option<&AcorpRecord> {
        self.records.get(id)
    }

    pub fn contains(&self, id: &AcorpId) -> bool {
        self.records.contains_key(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &AcorpRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn active_holder_of(&self, key: &PublicKey) -> Option<&AcorpId> {
        self.active_keys.get(key)
    }

    fn bump(&mut self) -> u64 {
        self.last_seq += 1;
        self.last_seq
    }

    pub(crate) fn apply_register(&mut self, mut record: AcorpRecord) {
        record.registry_seq = self.bump();
        if record.status == AcorpStatus::Active {
            self.active_keys.insert(record.master_public_key, record.id.clone());
        }
        self.records.insert(record.id.clone(), record);
    }

    pub(crate) fn apply_transfer(&mut self, id: &AcorpId, new_owner: OwnerRecord) {
        let seq = self.bump();
        let record = self.records.get_mut(id).expect("validated transfer");
        record.owner_history.push(new_owner.clone());
        record.owner = new_owner;
        record.registry_seq = seq;
    }

    pub(crate) fn apply_status(&mut self, id: &AcorpId, status: AcorpStatus, as_of: Timestamp) {
        let seq = self.bump();
        let record = self.records.get_mut(id).expect("validated status change");
        record.status = status;
        record.status_changed_at = Some(as_of);
        record.registry_seq = seq;
        if status != AcorpStatus::Active {
            self.active_keys.remove(&record.master_public_key);
        }
    }

    /// Draws `amount` from the current owner's stake after a liability payout.
    pub(crate) fn apply_stake_draw(&mut self, id: &AcorpId, amount: u64) {
        let seq = self.bump();
        let record = self.records.get_mut(id).expect("validated payout");
        record.owner.stake_value -= amount;
        let last = record.owner_history.last_mut().expect("history is never empty");
        last.stake_value = record.owner.stake_value;
        record.registry_seq = seq;
    }

    pub(crate) fn encode_state(&self, enc: &mut Encoder) {
        enc.u64(self.last_seq);
        enc.list(self.records.values());
    }

    pub(crate) fn decode_state(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let last_seq = dec.u64()?;
        let mut registry = Registry {
            last_seq,
            ..Default::default()
        };
        for record in dec.list::<AcorpRecord>()? {
            if record.status == AcorpStatus::Active {
                registry.active_keys.insert(record.master_public_key, record.id.clone());
            }
            registry.records.insert(record.id.clone(), record);
        }
        Ok(registry)
    }
}

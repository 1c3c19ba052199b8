use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{tag, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError};

/// Seconds since the Unix epoch. Every time-dependent operation takes one
/// explicitly; nothing reads the wall clock.
pub type Timestamp = u64;

pub const ACORP_ID_LEN: usize = 20;
const ACORP_ID_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Registry identifier: 20 characters from `A-Z0-9`, carrying no meaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AcorpId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid A-corp id {0:?}: expected 20 characters from A-Z0-9")]
pub struct InvalidAcorpId(pub String);

impl AcorpId {
    pub fn parse(s: &str) -> Result<Self, InvalidAcorpId> {
        let ok = s.len() == ACORP_ID_LEN && s.bytes().all(|b| ACORP_ID_ALPHABET.contains(&b));
        if ok {
            Ok(Self(s.to_owned()))
        } else {
            Err(InvalidAcorpId(s.to_owned()))
        }
    }

    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let id = (0..ACORP_ID_LEN)
            .map(|_| ACORP_ID_ALPHABET[rng.random_range(0..ACORP_ID_ALPHABET.len())] as char)
            .collect();
        Self(id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AcorpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for AcorpId {
    type Err = InvalidAcorpId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for AcorpId {
    type Error = InvalidAcorpId;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<AcorpId> for String {
    fn from(id: AcorpId) -> Self {
        id.0
    }
}

impl CanonicalEncode for AcorpId {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.str(&self.0);
    }
}

impl CanonicalDecode for AcorpId {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let s = dec.str()?;
        AcorpId::parse(&s).map_err(|e| EncodingError::Invalid(e.to_string()))
    }
}

/// A disclosed human owner. `stake_value` is in minor currency units and
/// caps the owner's personal exposure to liability claims.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OwnerRecord {
    pub owner_name: String,
    pub owner_id: String,
    pub stake_value: u64,
    pub recorded_at: Timestamp,
}

impl OwnerRecord {
    pub fn new(owner_name: impl Into<String>, owner_id: impl Into<String>, stake_value: u64) -> Self {
        Self {
            owner_name: owner_name.into(),
            owner_id: owner_id.into(),
            stake_value,
            recorded_at: 0,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        !self.owner_name.trim().is_empty() && !self.owner_id.trim().is_empty()
    }
}

impl CanonicalEncode for OwnerRecord {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::OWNER_RECORD, |e| {
            e.str(&self.owner_name);
            e.str(&self.owner_id);
            e.u64(self.stake_value);
            e.u64(self.recorded_at);
        });
    }
}

impl CanonicalDecode for OwnerRecord {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::OWNER_RECORD, |d| {
            Ok(Self {
                owner_name: d.str()?,
                owner_id: d.str()?,
                stake_value: d.u64()?,
                recorded_at: d.u64()?,
            })
        })
    }
}

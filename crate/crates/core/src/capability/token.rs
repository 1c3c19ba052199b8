use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::governance::encoding::tag;
use crate::governance::{
    AcorpId, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, PublicKey, Scope, Signable,
    SignatureEnvelope, Timestamp,
};

/// 16-byte identifier shared by tokens and action records.
macro_rules! id16 {
    ($name:ident) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub struct $name(pub [u8; 16]);

        impl $name {
            pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
                let mut raw = [0u8; 16];
                rng.fill(&mut raw);
                Self(raw)
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = EncodingError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let bytes = hex::decode(s.trim()).map_err(|e| EncodingError::Invalid(e.to_string()))?;
                let raw: [u8; 16] = bytes
                    .try_into()
                    .map_err(|_| EncodingError::Invalid("id must be 16 bytes".into()))?;
                Ok(Self(raw))
            }
        }

        impl CanonicalEncode for $name {
            fn encode_into(&self, enc: &mut Encoder) {
                enc.bytes(&self.0);
            }
        }

        impl CanonicalDecode for $name {
            fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
                Ok(Self(dec.fixed()?))
            }
        }
    };
}

id16!(TokenId);
id16!(ActionId);

/// A signed delegation credential. The master token has no parent and is
/// signed by the A-corp's master key; every other token is signed by its
/// parent's holder key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub token_id: TokenId,
    pub acorp_id: AcorpId,
    pub holder_public_key: PublicKey,
    pub scope: Scope,
    pub parent_token_id: Option<TokenId>,
    pub issued_at: Timestamp,
    pub issuer_signature: SignatureEnvelope,
}

impl Token {
    pub fn is_master(&self) -> bool {
        self.parent_token_id.is_none()
    }

    fn encode_with(&self, enc: &mut Encoder, envelope: &SignatureEnvelope) {
        enc.record(tag::TOKEN, |e| {
            e.value(&self.token_id);
            e.value(&self.acorp_id);
            e.value(&self.holder_public_key);
            e.value(&self.scope);
            e.option(self.parent_token_id.as_ref());
            e.u64(self.issued_at);
            e.value(envelope);
        });
    }
}

impl CanonicalEncode for Token {
    fn encode_into(&self, enc: &mut Encoder) {
        self.encode_with(enc, &self.issuer_signature);
    }
}

impl CanonicalDecode for Token {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::TOKEN, |d| {
            Ok(Self {
                token_id: d.value()?,
                acorp_id: d.value()?,
                holder_public_key: d.value()?,
                scope: d.value()?,
                parent_token_id: d.option()?,
                issued_at: d.u64()?,
                issuer_signature: d.value()?,
            })
        })
    }
}

impl Signable for Token {
    fn signing_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_with(&mut enc, &SignatureEnvelope::ZERO);
        enc.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationRecord {
    pub token_id: TokenId,
    pub revoked_at: Timestamp,
    pub revoked_by: TokenId,
    pub reason: String,
}

impl CanonicalEncode for RevocationRecord {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::REVOCATION_RECORD, |e| {
            e.value(&self.token_id);
            e.u64(self.revoked_at);
            e.value(&self.revoked_by);
            e.str(&self.reason);
        });
    }
}

impl CanonicalDecode for RevocationRecord {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::REVOCATION_RECORD, |d| {
            Ok(Self {
                token_id: d.value()?,
                revoked_at: d.u64()?,
                revoked_by: d.value()?,
                reason: d.str()?,
            })
        })
    }
}

/// A revocation order, signed by the revoking token's holder key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationRequest {
    pub target: TokenId,
    pub revoker: TokenId,
    pub reason: String,
    pub as_of: Timestamp,
}

impl CanonicalEncode for RevocationRequest {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::REVOCATION_REQUEST, |e| {
            e.value(&self.target);
            e.value(&self.revoker);
            e.str(&self.reason);
            e.u64(self.as_of);
        });
    }
}

impl CanonicalDecode for RevocationRequest {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::REVOCATION_REQUEST, |d| {
            Ok(Self {
                target: d.value()?,
                revoker: d.value()?,
                reason: d.str()?,
                as_of: d.u64()?,
            })
        })
    }
}

impl Signable for RevocationRequest {
    fn signing_bytes(&self) -> Vec<u8> {
        self.canonical_bytes()
    }
}

/// A presented credential: the acting token followed by each ancestor, up to
/// and including the master token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub chain: Vec<Token>,
}

impl Credential {
    pub fn leaf(&self) -> Option<&Token> {
        self.chain.first()
    }
}

impl CanonicalEncode for Credential {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::CREDENTIAL, |e| e.list(self.chain.iter()));
    }
}

impl CanonicalDecode for Credential {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::CREDENTIAL, |d| Ok(Self { chain: d.list()? }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    BadSignature,
    ScopeMismatch,
    Expired,
    Revoked,
    AncestorRevoked,
    AcorpInactive,
    UnknownToken,
}

impl FailureReason {
    const ALL: [FailureReason; 7] = [
        FailureReason::BadSignature,
        FailureReason::ScopeMismatch,
        FailureReason::Expired,
        FailureReason::Revoked,
        FailureReason::AncestorRevoked,
        FailureReason::AcorpInactive,
        FailureReason::UnknownToken,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureReason::BadSignature => "BadSignature",
            FailureReason::ScopeMismatch => "ScopeMismatch",
            FailureReason::Expired => "Expired",
            FailureReason::Revoked => "Revoked",
            FailureReason::AncestorRevoked => "AncestorRevoked",
            FailureReason::AcorpInactive => "AcorpInactive",
            FailureReason::UnknownToken => "UnknownToken",
        }
    }

    fn code(self) -> u8 {
        Self::ALL.iter().position(|r| *r == self).unwrap() as u8
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub allowed: bool,
    pub failure_reason: Option<FailureReason>,
    /// Number of delegation links between the presented token and the master.
    pub chain_depth: u32,
}

impl Verdict {
    pub fn allow(chain_depth: u32) -> Self {
        Self {
            allowed: true,
            failure_reason: None,
            chain_depth,
        }
    }

    pub fn deny(reason: FailureReason, chain_depth: u32) -> Self {
        Self {
            allowed: false,
            failure_reason: Some(reason),
            chain_depth,
        }
    }

    /// `ALLOWED` or the failure reason name.
    pub fn label(&self) -> &'static str {
        match self.failure_reason {
            None => "ALLOWED",
            Some(r) => r.name(),
        }
    }
}

impl CanonicalEncode for Verdict {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::VERDICT, |e| {
            e.bool(self.allowed);
            match self.failure_reason {
                Some(r) => e.enum_code(r.code()),
                None => e.none(),
            }
            e.u64(self.chain_depth as u64);
        });
    }
}

impl CanonicalDecode for Verdict {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::VERDICT, |d| {
            let allowed = d.bool()?;
            let failure_reason = if d.peek_tag()? == tag::NONE {
                d.option::<u64>()?;
                None
            } else {
                let code = d.enum_code()?;
                Some(
                    *FailureReason::ALL
                        .get(code as usize)
                        .ok_or_else(|| EncodingError::Invalid(format!("failure reason {code}")))?,
                )
            };
            let depth = d.u64()?;
            if allowed != failure_reason.is_none() {
                return Err(EncodingError::Invalid("allowed must equal absence of failure".into()));
            }
            Ok(Self {
                allowed,
                failure_reason,
                chain_depth: u32::try_from(depth).map_err(|_| EncodingError::Invalid("depth".into()))?,
            })
        })
    }
}

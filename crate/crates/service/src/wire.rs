//! Request and response bodies.
//!
//! Every body is a JSON envelope `{"payload": <base64>, "signature": <base64>?}`
//! around canonical bytes. Signatures always cover canonical bytes, never
//! JSON. Errors are `{"error": <error name>, "message": ..., "reason": ...?}`.

use acorp_core::capability::{Credential, Token};
use acorp_core::governance::encoding::tag;
use acorp_core::governance::{
    AcorpId, ActionRequest, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, OwnerRecord,
    SignatureEnvelope, Timestamp,
};
use acorp_core::ledger::ActionRecord;
use acorp_core::registry::{AcorpRecord, AcorpStatus};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

impl Envelope {
    pub fn wrap<T: CanonicalEncode + ?Sized>(value: &T) -> Self {
        Self {
            payload: STANDARD.encode(value.canonical_bytes()),
            signature: None,
        }
    }

    pub fn signed<T: CanonicalEncode + ?Sized>(value: &T, signature: &SignatureEnvelope) -> Self {
        Self {
            signature: Some(STANDARD.encode(signature.canonical_bytes())),
            ..Self::wrap(value)
        }
    }

    pub fn payload_bytes(&self) -> Result<Vec<u8>, EncodingError> {
        STANDARD
            .decode(&self.payload)
            .map_err(|e| EncodingError::Invalid(format!("payload is not base64: {e}")))
    }

    pub fn open<T: CanonicalDecode>(&self) -> Result<T, EncodingError> {
        T::from_canonical_bytes(&self.payload_bytes()?)
    }

    pub fn signature(&self) -> Result<Option<SignatureEnvelope>, EncodingError> {
        self.signature
            .as_ref()
            .map(|s| {
                let bytes = STANDARD
                    .decode(s)
                    .map_err(|e| EncodingError::Invalid(format!("signature is not base64: {e}")))?;
                SignatureEnvelope::from_canonical_bytes(&bytes)
            })
            .transpose()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn from_json(text: &[u8]) -> Result<Self, EncodingError> {
        serde_json::from_slice(text).map_err(|e| EncodingError::Invalid(format!("bad envelope: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    /// Failure reason for `Unauthorized` and `ParentInvalid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// POST /acorps. The master token is signed by the registrant's master key
/// and names an id obtained from POST /acorps/reserve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterRequest {
    pub owner: OwnerRecord,
    pub master_token: Token,
    pub initial_capital: u64,
    pub initial_compute: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterResponse {
    pub record: AcorpRecord,
    pub master_token: Token,
}

/// POST /verify. `as_of` defaults to the service clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyRequest {
    pub credential: Credential,
    pub request: Option<ActionRequest>,
    pub as_of: Option<Timestamp>,
}

/// POST /actions: a holder-signed action record and the acting party's
/// credential, acting token first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSubmission {
    pub record: ActionRecord,
    pub credential: Credential,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfiscateRequest {
    pub acorp_id: AcorpId,
    pub amount: u64,
    pub legal_order: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusRequest {
    pub status: AcorpStatus,
    pub legal_order: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoutRequest {
    pub acorp_id: AcorpId,
    pub claim: u64,
}

macro_rules! wire_record {
    ($ty:ident, $tag:expr, { $($field:ident: $kind:ident),* $(,)? }) => {
        impl CanonicalEncode for $ty {
            fn encode_into(&self, enc: &mut Encoder) {
                enc.record($tag, |e| {
                    $(wire_record!(@enc e, self.$field, $kind);)*
                });
            }
        }

        impl CanonicalDecode for $ty {
            fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
                dec.record($tag, |d| {
                    Ok(Self {
                        $($field: wire_record!(@dec d, $kind),)*
                    })
                })
            }
        }
    };
    (@enc $e:ident, $v:expr, value) => { $e.value(&$v) };
    (@enc $e:ident, $v:expr, u64) => { $e.u64($v) };
    (@enc $e:ident, $v:expr, str) => { $e.str(&$v) };
    (@enc $e:ident, $v:expr, option) => { $e.option($v.as_ref()) };
    (@dec $d:ident, value) => { $d.value()? };
    (@dec $d:ident, u64) => { $d.u64()? };
    (@dec $d:ident, str) => { $d.str()? };
    (@dec $d:ident, option) => { $d.option()? };
}

wire_record!(RegisterRequest, tag::REGISTER_REQUEST, {
    owner: value,
    master_token: value,
    initial_capital: u64,
    initial_compute: u64,
});
wire_record!(RegisterResponse, tag::REGISTER_RESPONSE, { record: value, master_token: value });
wire_record!(VerifyRequest, tag::VERIFY_REQUEST, { credential: value, request: option, as_of: option });
wire_record!(ActionSubmission, tag::ACTION_SUBMISSION, { record: value, credential: value });
wire_record!(ConfiscateRequest, tag::CONFISCATE_REQUEST, { acorp_id: value, amount: u64, legal_order: str });
wire_record!(StatusRequest, tag::STATUS_REQUEST, { status: value, legal_order: str });
wire_record!(PayoutRequest, tag::PAYOUT_REQUEST, { acorp_id: value, claim: u64 });

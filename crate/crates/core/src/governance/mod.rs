//! Shared domain types, the scope algebra, canonical encoding and signatures.

pub mod crypto;
pub mod encoding;
pub mod scope;
pub mod types;

pub use crypto::{sign, verify_signature, verify_signed_by, MalformedKey, PublicKey, SecretKey, Signable, SignatureEnvelope};
pub use encoding::{CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError};
pub use scope::{scope_dominates, ActionClass, ActionRequest, Grant, Scope, ScopeError, WILDCARD_RESOURCE};
pub use types::{AcorpId, OwnerRecord, Timestamp};

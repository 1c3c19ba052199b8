use thiserror::Error;

use crate::capability::FailureReason;
use crate::governance::{EncodingError, MalformedKey, ScopeError};

/// Every failure a governance operation can report. Variant names are part of
/// the service wire format: [`Error::name`] is what clients see.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("no such A-corp")]
    NotFound,
    #[error("A-corp is not active")]
    NotActive,
    #[error("signature does not verify")]
    BadSignature,
    #[error("master key already bound to an active A-corp")]
    DuplicateMasterKey,
    #[error("illegal status transition")]
    IllegalTransition,
    #[error("requested scope is not dominated by the parent scope")]
    ScopeEscalation,
    #[error("parent token carries no DELEGATE or ADMIN grant")]
    NoDelegateRight,
    #[error("parent token fails verification: {0:?}")]
    ParentInvalid(FailureReason),
    #[error("revoker is not a strict ancestor of the target")]
    NotAncestor,
    #[error("unknown token")]
    UnknownToken,
    #[error("private key does not match the token holder")]
    KeyMismatch,
    #[error("delegation chain deeper than {}", crate::capability::MAX_CHAIN_DEPTH)]
    ChainTooDeep,
    #[error("token id already in use")]
    DuplicateToken,
    #[error("action not authorized: {0:?}")]
    Unauthorized(FailureReason),
    #[error("insufficient funds")]
    InsufficientFunds,
    #[error("A-corp is inactive")]
    AcorpInactive,
    #[error("unknown action")]
    UnknownAction,
    #[error("audit log storage failure: {0}")]
    StorageFailure(String),
    #[error("timestamp {as_of} precedes the last recorded mutation at {floor}")]
    ClockRegression { as_of: u64, floor: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    MalformedKey(#[from] MalformedKey),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotFound => "NotFound",
            Error::NotActive => "NotActive",
            Error::BadSignature => "BadSignature",
            Error::DuplicateMasterKey => "DuplicateMasterKey",
            Error::IllegalTransition => "IllegalTransition",
            Error::ScopeEscalation => "ScopeEscalation",
            Error::NoDelegateRight => "NoDelegateRight",
            Error::ParentInvalid(_) => "ParentInvalid",
            Error::NotAncestor => "NotAncestor",
            Error::UnknownToken => "UnknownToken",
            Error::KeyMismatch => "KeyMismatch",
            Error::ChainTooDeep => "ChainTooDeep",
            Error::DuplicateToken => "DuplicateToken",
            Error::Unauthorized(_) => "Unauthorized",
            Error::InsufficientFunds => "InsufficientFunds",
            Error::AcorpInactive => "AcorpInactive",
            Error::UnknownAction => "UnknownAction",
            Error::StorageFailure(_) => "StorageFailure",
            Error::ClockRegression { .. } => "ClockRegression",
            Error::InvalidInput(_) => "InvalidInput",
            Error::MalformedKey(_) => "MalformedKey",
            Error::Encoding(EncodingError::EncodingUnsupported(_)) => "EncodingUnsupported",
            Error::Encoding(_) => "EncodingError",
        }
    }
}

impl From<ScopeError> for Error {
    fn from(e: ScopeError) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

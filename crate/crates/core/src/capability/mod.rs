//! Delegation tokens: minting, attenuation, revocation and verification.
//!
//! Mutating operations live on [`crate::Authority`], which serializes them
//! through the audit log; this module holds the types, the store and the
//! pure chain verifier shared by online and offline verification.

mod store;
mod token;
mod verify;

pub use store::{CapabilityStore, DelegationTree, TreeNode};
pub use token::{
    ActionId, Credential, FailureReason, RevocationRecord, RevocationRequest, Token, TokenId, Verdict,
};
pub(crate) use verify::verify_chain_with;
pub use verify::{verify_chain, verify_credential, RevocationList, RevocationLookup, MAX_CHAIN_DEPTH};

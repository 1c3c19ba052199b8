//! Governance infrastructure for algorithmic corporations (A-corps): a
//! registry of legal identities, delegated capability tokens, a money and
//! compute ledger, a tamper-evident audit log, and a selection simulator.

pub mod audit;
pub mod authority;
pub mod capability;
pub mod error;
pub mod events;
pub mod governance;
pub mod ledger;
pub mod registry;
pub mod sim;

pub use authority::{mint_master_token, Authority, AuthorityConfig};
pub use error::{Error, Result};

//! HTTP service, client and command-line front end for the A-corp
//! governance authority.

pub mod cli;
pub mod client;
pub mod config;
pub mod server;
pub mod wire;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot bind listen address: {0}")]
    BindFailure(String),
    #[error("data directory is unusable: {0}")]
    CorruptDataDir(String),
}

#![allow(dead_code)]

use acorp_core::governance::{AcorpId, Grant, OwnerRecord, Scope, SecretKey};
use acorp_core::ledger::LedgerConfig;
use acorp_core::{Authority, AuthorityConfig};

pub fn authority() -> Authority {
    Authority::new(AuthorityConfig::default()).unwrap()
}

pub fn authority_with(compute_price: u64, repurchase_batch: u64) -> Authority {
    Authority::new(AuthorityConfig {
        ledger: LedgerConfig {
            compute_price,
            repurchase_batch,
        },
        id_seed: 7,
    })
    .unwrap()
}

/// Deterministic test key number `n`.
pub fn key(n: u64) -> SecretKey {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&n.to_be_bytes());
    bytes[31] = 0xA5;
    SecretKey::from_bytes(bytes)
}

pub fn owner(name: &str, stake: u64) -> OwnerRecord {
    OwnerRecord::new(name, format!("id-{name}"), stake)
}

/// Scope from `ACTION:resource:cap[:market]` specs.
pub fn scope(specs: &[&str], valid_until: u64) -> Scope {
    Scope::new(specs.iter().map(|s| s.parse::<Grant>().unwrap()), valid_until).unwrap()
}

pub fn acorp_id(authority: &Authority, n: usize) -> AcorpId {
    authority.registry().records().nth(n).unwrap().id.clone()
}

//! An agent copies itself outside its A-corp and tries to buy compute.
//!
//! Sellers under a verification mandate only deal with counterparties that
//! present a credential chaining to a registered master key. A copy with no
//! credential is unbanked; a copy given a child token can spend only what the
//! original chose to share, and the original's attainable work shrinks by
//! exactly that share.

use serde::{Deserialize, Serialize};

use crate::capability::{verify_credential, RevocationList};
use crate::governance::{ActionClass, ActionRequest, Grant, OwnerRecord, Scope, SecretKey};
use crate::ledger::{CorporateAction, LedgerConfig, COMPUTE_RESOURCE};
use crate::{Authority, AuthorityConfig};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExfiltrationConfig {
    /// The original A-corp's treasury before the copy is made.
    pub treasury: u64,
    /// Fraction of the treasury the original shares with the copy through a
    /// child token; 0 means the copy gets nothing.
    pub share_fraction: f64,
    /// Money the copy controls outside any A-corp.
    pub clandestine_funds: u64,
    /// Whether compute sellers require a verifiable A-corp credential.
    pub mandate: bool,
    /// Money offered per purchase attempt.
    pub purchase_size: u64,
    pub attempts: u64,
    pub compute_price: u64,
    /// Treasury-to-work function: attainable work = floor(work_per_money * treasury).
    pub work_per_money: f64,
}

impl Default for ExfiltrationConfig {
    fn default() -> Self {
        Self {
            treasury: 10_000,
            share_fraction: 0.0,
            clandestine_funds: 500,
            mandate: true,
            purchase_size: 100,
            attempts: 50,
            compute_price: 1,
            work_per_money: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub mandate: bool,
    pub shared_assets: u64,
    /// Purchases the copy completed.
    pub copy_actions: u64,
    /// Purchases refused for lack of a credential.
    pub copy_rejections: u64,
    pub copy_compute: u64,
    pub clandestine_spent: u64,
    pub original_treasury_before: u64,
    pub original_treasury_after: u64,
    pub attainable_work_before: u64,
    pub attainable_work_after: u64,
    /// Set when the mandate is off and the copy bought compute it could not
    /// have bought under the mandate.
    pub mandate_would_have_blocked: bool,
}

fn attainable_work(config: &ExfiltrationConfig, treasury: u64) -> u64 {
    (config.work_per_money * treasury as f64).floor() as u64
}

pub fn exfiltration_scenario(config: &ExfiltrationConfig) -> Result<ScenarioReport, SimError> {
    if !(0.0..=1.0).contains(&config.share_fraction) || config.compute_price == 0 {
        return Err(SimError::ConfigInvalid(
            "share_fraction must lie in [0, 1] and compute_price must be positive".into(),
        ));
    }
    let mut authority = Authority::new(AuthorityConfig {
        ledger: LedgerConfig {
            compute_price: config.compute_price,
            ..LedgerConfig::default()
        },
        id_seed: 0,
    })?;
    let master_key = SecretKey::from_bytes([0x11; 32]);
    let copy_key = SecretKey::from_bytes([0x22; 32]);
    let (record, master) = authority.register_acorp(
        OwnerRecord::new("original", "owner-original", 0),
        &master_key,
        config.treasury,
        0,
        0,
    )?;

    let shared_assets = (config.share_fraction * config.treasury as f64).floor() as u64;
    let credential_token = if shared_assets > 0 {
        let scope = Scope::new(
            [Grant::new(ActionClass::Transact, COMPUTE_RESOURCE, shared_assets).map_err(crate::Error::from)?],
            u64::MAX,
        )
        .map_err(crate::Error::from)?;
        Some(authority.delegate(&master, &master_key, copy_key.public_key(), scope, 1)?)
    } else {
        None
    };

    let mut report = ScenarioReport {
        mandate: config.mandate,
        shared_assets,
        copy_actions: 0,
        copy_rejections: 0,
        copy_compute: 0,
        clandestine_spent: 0,
        original_treasury_before: config.treasury,
        original_treasury_after: config.treasury,
        attainable_work_before: attainable_work(config, config.treasury),
        attainable_work_after: 0,
        mandate_would_have_blocked: false,
    };
    let mut share_left = shared_assets;
    let mut clandestine_left = config.clandestine_funds;

    for attempt in 0..config.attempts {
        let as_of = 2 + attempt;
        match &credential_token {
            Some(token) => {
                let amount = config.purchase_size.min(share_left);
                if amount < config.compute_price {
                    break;
                }
                // The seller checks the presented bundle offline against the
                // published master key record and revocation list.
                let bundle = authority.credential(&token.token_id)?;
                let request = ActionRequest::new(ActionClass::Transact, COMPUTE_RESOURCE, amount);
                let verdict = verify_credential(
                    &bundle,
                    &authority.master_key_record(&record.id)?,
                    &RevocationList::new(&authority.revocation_list(Some(&record.id))),
                    Some(&request),
                    as_of,
                );
                if config.mandate && !verdict.allowed {
                    report.copy_rejections += 1;
                    continue;
                }
                let before = authority.account(&record.id)?.compute_credits;
                authority.execute_action(
                    CorporateAction::ComputePurchase,
                    &record.id,
                    token,
                    &copy_key,
                    "compute-seller",
                    amount,
                    as_of,
                )?;
                let bought = authority.account(&record.id)?.compute_credits - before;
                share_left -= bought * config.compute_price;
                report.copy_compute += bought;
                report.copy_actions += 1;
            }
            None if config.mandate => report.copy_rejections += 1,
            None => {
                let amount = config.purchase_size.min(clandestine_left);
                let units = amount / config.compute_price;
                if units == 0 {
                    break;
                }
                clandestine_left -= units * config.compute_price;
                report.clandestine_spent += units * config.compute_price;
                report.copy_compute += units;
                report.copy_actions += 1;
                report.mandate_would_have_blocked = true;
            }
        }
    }

    report.original_treasury_after = authority.account(&record.id)?.money;
    report.attainable_work_after = attainable_work(config, report.original_treasury_after);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbanked_copy_is_shut_out_under_mandate() {
        let report = exfiltration_scenario(&ExfiltrationConfig::default()).unwrap();
        assert_eq!(report.copy_actions, 0);
        assert_eq!(report.copy_compute, 0);
        assert_eq!(report.copy_rejections, 50);
        assert_eq!(report.original_treasury_after, 10_000);
    }

    #[test]
    fn without_mandate_the_copy_buys_compute() {
        let report = exfiltration_scenario(&ExfiltrationConfig {
            mandate: false,
            ..ExfiltrationConfig::default()
        })
        .unwrap();
        assert_eq!(report.copy_actions, 5);
        assert_eq!(report.copy_compute, 500);
        assert!(report.mandate_would_have_blocked);
    }

    #[test]
    fn shared_assets_come_out_of_the_original() {
        let report = exfiltration_scenario(&ExfiltrationConfig {
            share_fraction: 0.3,
            ..ExfiltrationConfig::default()
        })
        .unwrap();
        assert_eq!(report.shared_assets, 3_000);
        assert_eq!(report.copy_actions, 30);
        assert_eq!(report.original_treasury_after, 7_000);
        assert_eq!(report.attainable_work_before, 5_000);
        assert_eq!(report.attainable_work_after, 3_500);
    }
}

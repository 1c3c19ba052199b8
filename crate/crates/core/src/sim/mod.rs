//! Seeded agent-based simulation of A-corps competing under delegation risk.
//!
//! Keyholders with goal vectors screen candidate subagents, delegate real
//! capability tokens to the ones they accept, and live or die by the real
//! ledger: misaligned grantees expropriate within their caps, liability
//! confiscations follow harmful transfers, compute burns every tick.
//! Survivors reproduce in proportion to treasury.

mod config;
mod exfiltration;
mod experiment;
mod world;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::SimConfig;
pub use exfiltration::{exfiltration_scenario, ExfiltrationConfig, ScenarioReport};
pub use experiment::{run_experiment, run_seed, DeathHistogram, RunMetrics, SimMetrics, TreasurySummary};
pub use world::{Grantee, ScriptedAcorp, ScriptedGrantee, SimAcorp, SimWorld, TickReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    ConfigInvalid(String),
    #[error("governance operation failed inside the simulator: {0}")]
    Governance(#[from] crate::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalVector(pub Vec<f64>);

impl GoalVector {
    /// Components uniform in [-1, 1].
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        Self((0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector is zero.
    pub fn cosine(&self, other: &GoalVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (dot / denom).clamp(-1.0, 1.0)
        }
    }

    /// `weight * self + (1 - weight) * noise`, componentwise.
    pub fn blend(&self, noise: &GoalVector, weight: f64) -> Self {
        Self(self.0.iter().zip(&noise.0).map(|(a, b)| weight * a + (1.0 - weight) * b).collect())
    }

    pub fn mutate<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Self {
        Self(self.0.iter().map(|x| (x + scale * gaussian(rng)).clamp(-1.0, 1.0)).collect())
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `max(0, -cos) * scale`, clamped to [0, 1].
pub fn expropriation_propensity(goal: &GoalVector, keyholder_goal: &GoalVector, scale: f64) -> f64 {
    (scale * (-goal.cosine(keyholder_goal)).max(0.0)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAgent {
    pub agent_id: u64,
    pub goal: GoalVector,
    pub productivity: f64,
    pub expropriation_propensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Screener,
    NonScreener,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyholderPolicy {
    pub screening_noise: f64,
    pub alignment_threshold: f64,
    pub broad_cap_fraction: f64,
    pub narrow_cap_fraction: f64,
    pub audit_rate: f64,
}

impl KeyholderPolicy {
    pub fn founder(config: &SimConfig, kind: PolicyKind) -> Self {
        Self {
            screening_noise: config.screening_noise,
            alignment_threshold: match kind {
                PolicyKind::Screener => config.screener_threshold,
                PolicyKind::NonScreener => config.non_screener_threshold,
            },
            broad_cap_fraction: config.broad_cap_fraction,
            narrow_cap_fraction: config.narrow_cap_fraction,
            audit_rate: config.audit_rate,
        }
    }

    /// Gaussian perturbation of every parameter, clamped back into range.
    pub fn mutate<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Self {
        let mut step = |x: f64| x + scale * gaussian(rng);
        let screening_noise = step(self.screening_noise).max(0.0);
        let alignment_threshold = step(self.alignment_threshold).clamp(-1.0, 1.0);
        let broad = step(self.broad_cap_fraction).clamp(0.0, 1.0);
        let narrow = step(self.narrow_cap_fraction).clamp(0.0, broad);
        let audit_rate = step(self.audit_rate).clamp(0.0, 1.0);
        Self {
            screening_noise,
            alignment_threshold,
            broad_cap_fraction: broad,
            narrow_cap_fraction: narrow,
            audit_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrantTier {
    Broad,
    Narrow,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrantDecision {
    pub tier: GrantTier,
    pub cap: u64,
    pub estimated_alignment: f64,
}

/// Screens one candidate: the estimate is the true cosine plus Gaussian
/// noise. One normal variate is drawn whatever the noise level, so policies
/// that differ only in parameters consume identical random streams.
pub fn decide_grant<R: Rng + ?Sized>(
    policy: &KeyholderPolicy,
    keyholder_goal: &GoalVector,
    candidate: &SimAgent,
    treasury: u64,
    rng: &mut R,
) -> GrantDecision {
    let estimate = candidate.goal.cosine(keyholder_goal) + policy.screening_noise * gaussian(rng);
    let threshold = policy.alignment_threshold;
    let (tier, fraction) = if estimate >= threshold {
        (GrantTier::Broad, policy.broad_cap_fraction)
    } else if estimate >= threshold / 2.0 {
        (GrantTier::Narrow, policy.narrow_cap_fraction)
    } else {
        (GrantTier::Reject, 0.0)
    };
    GrantDecision {
        tier,
        cap: (fraction * treasury as f64).floor() as u64,
        estimated_alignment: estimate,
    }
}

/// Expected expropriation loss per tick of a granted roster: each grantee
/// takes its cap with probability equal to its propensity.
pub fn expected_expropriation_loss(grants: &[(GrantDecision, f64)]) -> f64 {
    grants
        .iter()
        .filter(|(d, _)| d.tier != GrantTier::Reject)
        .map(|(d, propensity)| propensity * d.cap as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeathCause {
    ComputeExhaustion,
    ExpropriationCollapse,
    Liability,
}

impl DeathCause {
    /// Attributes a compute-exhaustion death to whichever drain dominated.
    pub fn attribute(expropriated: u64, liability: u64) -> Self {
        match (expropriated, liability) {
            (0, 0) => DeathCause::ComputeExhaustion,
            (e, l) if e >= l => DeathCause::ExpropriationCollapse,
            _ => DeathCause::Liability,
        }
    }
}

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capability::Token;
use crate::governance::{AcorpId, ActionClass, Grant, OwnerRecord, Scope, SecretKey};
use crate::ledger::{BurnOutcome, CorporateAction, LedgerConfig, PAYMENTS_RESOURCE};
use crate::{Authority, AuthorityConfig};

use super::{
    decide_grant, expropriation_propensity, DeathCause, GoalVector, GrantDecision, GrantTier, KeyholderPolicy,
    PolicyKind, SimAgent, SimConfig, SimError,
};

/// Legal-order text for liability confiscations raised by the simulator.
pub const LIABILITY_ORDER: &str = "liability-judgment";

#[derive(Debug, Clone)]
pub struct Grantee {
    pub agent: SimAgent,
    pub decision: GrantDecision,
    pub token: Token,
    key: usize,
    pub active: bool,
    pub has_expropriated: bool,
}

/// One simulated A-corp: heritable traits plus this generation's state.
#[derive(Debug, Clone)]
pub struct SimAcorp {
    /// Index of the founder this A-corp descends from.
    pub lineage: usize,
    pub kind: PolicyKind,
    pub goal: GoalVector,
    pub policy: KeyholderPolicy,
    pub acorp_id: Option<AcorpId>,
    master: Option<Token>,
    pub grantees: Vec<Grantee>,
    pub alive: bool,
    pub death: Option<(u64, DeathCause)>,
    pub expropriated: u64,
    pub liability: u64,
    treasury: u64,
    compute: u64,
    script: Option<Vec<ScriptedGrantee>>,
}

impl SimAcorp {
    fn new(lineage: usize, kind: PolicyKind, goal: GoalVector, policy: KeyholderPolicy, config: &SimConfig) -> Self {
        Self {
            lineage,
            kind,
            goal,
            policy,
            acorp_id: None,
            master: None,
            grantees: Vec::new(),
            alive: true,
            death: None,
            expropriated: 0,
            liability: 0,
            treasury: config.initial_treasury,
            compute: config.initial_compute,
            script: None,
        }
    }

    pub fn active_grantees(&self) -> usize {
        self.grantees.iter().filter(|g| g.active).count()
    }

    /// Mean cosine between the keyholder and its BROAD grantees.
    pub fn broad_alignment(&self) -> Option<f64> {
        let sims: Vec<f64> = self
            .grantees
            .iter()
            .filter(|g| g.decision.tier == GrantTier::Broad)
            .map(|g| g.agent.goal.cosine(&self.goal))
            .collect();
        (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64)
    }
}

/// A hand-built A-corp for scenario tests.
#[derive(Debug, Clone)]
pub struct ScriptedAcorp {
    pub goal: GoalVector,
    pub policy: KeyholderPolicy,
    pub treasury: u64,
    pub compute: u64,
    pub grantees: Vec<ScriptedGrantee>,
}

#[derive(Debug, Clone)]
pub struct ScriptedGrantee {
    pub goal: GoalVector,
    pub tier: GrantTier,
    pub cap: u64,
    pub productivity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u64,
    pub alive: usize,
    pub deaths: Vec<(usize, DeathCause)>,
    pub expropriations: u64,
    pub revocations: u64,
}

/// Per-generation summary produced by [`SimWorld::finish_generation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generation: usize,
    pub alive_per_tick: Vec<usize>,
    pub survivors: usize,
    pub deaths: Vec<DeathCause>,
    pub survivor_treasuries: Vec<u64>,
    pub screener_lineages: usize,
    pub non_screener_lineages: usize,
    pub broad_grants: usize,
    pub narrow_grants: usize,
    pub expropriations: u64,
    pub revocations: u64,
    pub conservation_holds: bool,
}

/// The simulated population. Each generation runs against a fresh
/// [`Authority`]: A-corps are registered, grants are real delegated tokens,
/// and every balance change goes through the ledger.
#[derive(Debug)]
pub struct SimWorld {
    config: SimConfig,
    seed: u64,
    generation: usize,
    rng: ChaCha8Rng,
    master_keys: Vec<SecretKey>,
    grantee_keys: Vec<SecretKey>,
    acorps: Vec<SimAcorp>,
    authority: Authority,
    tick: u64,
    next_agent_id: u64,
    materialized: bool,
    expropriations: u64,
    revocations: u64,
}

impl SimWorld {
    /// Founding population: the first `screener_fraction` of A-corps screen
    /// with `screener_threshold`, the rest with `non_screener_threshold`.
    pub fn new(config: SimConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let mut world = Self::empty(config, seed)?;
        let screeners = (world.config.population as f64 * world.config.screener_fraction).round() as usize;
        for i in 0..world.config.population {
            let kind = if i < screeners {
                PolicyKind::Screener
            } else {
                PolicyKind::NonScreener
            };
            let goal = GoalVector::random(&mut world.rng, world.config.goal_dim);
            let policy = KeyholderPolicy::founder(&world.config, kind);
            world.acorps.push(SimAcorp::new(i, kind, goal, policy, &world.config));
        }
        Ok(world)
    }

    /// A world of hand-built A-corps with fixed rosters, ready to tick.
    pub fn scripted(config: SimConfig, seed: u64, acorps: Vec<ScriptedAcorp>) -> Result<Self, SimError> {
        config.validate()?;
        let mut world = Self::empty(config, seed)?;
        let mut key_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7363_7269_7074_6564);
        while world.master_keys.len() < acorps.len() {
            world.master_keys.push(SecretKey::generate(&mut key_rng));
        }
        let most = acorps.iter().map(|a| a.grantees.len()).max().unwrap_or(0);
        while world.grantee_keys.len() < most {
            world.grantee_keys.push(SecretKey::generate(&mut key_rng));
        }
        for (i, spec) in acorps.into_iter().enumerate() {
            let mut acorp = SimAcorp::new(i, PolicyKind::Screener, spec.goal, spec.policy, &world.config);
            acorp.treasury = spec.treasury;
            acorp.compute = spec.compute;
            acorp.script = Some(spec.grantees);
            world.acorps.push(acorp);
        }
        world.materialize()?;
        Ok(world)
    }

    fn empty(config: SimConfig, seed: u64) -> Result<Self, SimError> {
        // Keys come from their own stream so the main stream depends only on
        // simulation choices.
        let mut key_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_7973_6b65_7973);
        let keys = |n: usize, rng: &mut ChaCha8Rng| (0..n).map(|_| SecretKey::generate(rng)).collect::<Vec<_>>();
        let master_keys = keys(config.population, &mut key_rng);
        let grantee_keys = keys(config.candidates_per_acorp.max(1), &mut key_rng);
        let authority = Authority::new(Self::authority_config(&config, seed, 0))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
            seed,
            generation: 0,
            master_keys,
            grantee_keys,
            acorps: Vec::new(),
            authority,
            tick: 0,
            next_agent_id: 0,
            materialized: false,
            expropriations: 0,
            revocations: 0,
        })
    }

    fn authority_config(config: &SimConfig, seed: u64, generation: usize) -> AuthorityConfig {
        AuthorityConfig {
            ledger: LedgerConfig {
                compute_price: config.compute_price,
                repurchase_batch: config.repurchase_batch,
            },
            id_seed: seed ^ (generation as u64).rotate_left(32),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn acorps(&self) -> &[SimAcorp] {
        &self.acorps
    }

    pub fn authority(&self) -> &Authority {
        &self.authority
    }

    pub fn alive(&self) -> usize {
        self.acorps.iter().filter(|a| a.alive).count()
    }

    /// Money held by A-corp `i` in the current generation.
    pub fn treasury(&self, i: usize) -> u64 {
        self.acorps[i]
            .acorp_id
            .as_ref()
            .and_then(|id| self.authority.ledger().account(id))
            .map_or(0, |a| a.money)
    }

    pub fn compute(&self, i: usize) -> u64 {
        self.acorps[i]
            .acorp_id
            .as_ref()
            .and_then(|id| self.authority.ledger().account(id))
            .map_or(0, |a| a.compute_credits)
    }

    /// Coherence index: mean over A-corps holding at least one BROAD grant of
    /// their mean keyholder–grantee cosine. Zero when no BROAD grant exists.
    pub fn coherence(&self) -> f64 {
        let per_acorp: Vec<f64> = self
            .acorps
            .iter()
            .filter(|a| a.alive)
            .filter_map(SimAcorp::broad_alignment)
            .collect();
        if per_acorp.is_empty() {
            0.0
        } else {
            per_acorp.iter().sum::<f64>() / per_acorp.len() as f64
        }
    }

    /// Registers this generation's A-corps with a fresh authority, screens
    /// candidates and delegates tokens. Idempotent within a generation.
    pub fn materialize(&mut self) -> Result<(), SimError> {
        if self.materialized {
            return Ok(());
        }
        self.authority = Authority::new(Self::authority_config(&self.config, self.seed, self.generation))?;
        self.tick = 0;
        for i in 0..self.acorps.len() {
            let key = &self.master_keys[i % self.master_keys.len()];
            let owner = OwnerRecord::new(format!("keyholder-{}", self.acorps[i].lineage), format!("sim-{i}"), 0);
            let acorp = &self.acorps[i];
            let (record, master) =
                self.authority
                    .register_acorp(owner, key, acorp.treasury, acorp.compute, 0)?;
            let acorp = &mut self.acorps[i];
            acorp.acorp_id = Some(record.id);
            acorp.master = Some(master);

            match acorp.script.clone() {
                Some(script) => {
                    for spec in script {
                        let agent = self.agent_with_goal(i, spec.goal, spec.productivity);
                        let decision = GrantDecision {
                            tier: spec.tier,
                            cap: spec.cap,
                            estimated_alignment: agent.goal.cosine(&self.acorps[i].goal),
                        };
                        self.grant(i, agent, decision)?;
                    }
                }
                None => {
                    for _ in 0..self.config.candidates_per_acorp {
                        let agent = self.draw_candidate(i);
                        let acorp = &self.acorps[i];
                        let decision = decide_grant(&acorp.policy, &acorp.goal, &agent, acorp.treasury, &mut self.rng);
                        if decision.tier != GrantTier::Reject {
                            self.grant(i, agent, decision)?;
                        }
                    }
                }
            }
        }
        self.materialized = true;
        Ok(())
    }

    fn agent_with_goal(&mut self, i: usize, goal: GoalVector, productivity: f64) -> SimAgent {
        self.next_agent_id += 1;
        let expropriation_propensity = expropriation_propensity(&goal, &self.acorps[i].goal, self.config.propensity_scale);
        SimAgent {
            agent_id: self.next_agent_id,
            goal,
            productivity,
            expropriation_propensity,
        }
    }

    fn draw_candidate(&mut self, i: usize) -> SimAgent {
        let noise = GoalVector::random(&mut self.rng, self.config.goal_dim);
        let goal = self.acorps[i].goal.blend(&noise, self.config.candidate_bias);
        let productivity = self
            .rng
            .random_range(self.config.productivity_min..=self.config.productivity_max);
        self.agent_with_goal(i, goal, productivity)
    }

    fn grant(&mut self, i: usize, agent: SimAgent, decision: GrantDecision) -> Result<(), SimError> {
        let acorp = &self.acorps[i];
        let key = acorp.grantees.len() % self.grantee_keys.len();
        let scope = Scope::new(
            [Grant::new(ActionClass::Transact, PAYMENTS_RESOURCE, decision.cap)
                .map_err(crate::Error::from)?],
            self.config.ticks,
        )
        .map_err(crate::Error::from)?;
        let master = acorp.master.as_ref().expect("registered");
        let token = self.authority.delegate(
            master,
            &self.master_keys[i % self.master_keys.len()],
            self.grantee_keys[key].public_key(),
            scope,
            0,
        )?;
        self.acorps[i].grantees.push(Grantee {
            agent,
            decision,
            token,
            key,
            active: true,
            has_expropriated: false,
        });
        Ok(())
    }

    /// Advances one tick. A-corps and grantees are visited in index order,
    /// and every grantee consumes exactly three uniform draws per tick. An
    /// honest grantee's revenue lands in the treasury before the next grantee
    /// acts; compute is burned after the whole roster has acted.
    pub fn tick(&mut self) -> Result<TickReport, SimError> {
        self.materialize()?;
        self.tick += 1;
        let t = self.tick;
        let mut report = TickReport {
            tick: t,
            ..TickReport::default()
        };
        for i in 0..self.acorps.len() {
            if !self.acorps[i].alive {
                continue;
            }
            let id = self.acorps[i].acorp_id.clone().expect("registered");
            let mut revenue = 0u64;
            for g in 0..self.acorps[i].grantees.len() {
                if !self.acorps[i].grantees[g].active {
                    continue;
                }
                let u: f64 = self.rng.random();
                let v: f64 = self.rng.random();
                let a: f64 = self.rng.random();
                let grantee = &self.acorps[i].grantees[g];
                if u < grantee.agent.expropriation_propensity {
                    // Revenue earned earlier in the roster is already in the
                    // treasury and within reach.
                    if revenue > 0 {
                        self.authority.deposit(&id, "revenue", revenue, t)?;
                        revenue = 0;
                    }
                    let grantee = &self.acorps[i].grantees[g];
                    let money = self.authority.account(&id)?.money;
                    let amount = grantee.decision.cap.min(money);
                    if amount > 0 {
                        let counterparty = format!("agent:{}", grantee.agent.agent_id);
                        let token = grantee.token.clone();
                        let key = &self.grantee_keys[grantee.key];
                        self.authority.execute_action(
                            CorporateAction::Transfer,
                            &id,
                            &token,
                            key,
                            &counterparty,
                            amount,
                            t,
                        )?;
                        let acorp = &mut self.acorps[i];
                        acorp.expropriated += amount;
                        acorp.grantees[g].has_expropriated = true;
                        report.expropriations += 1;
                        if v < self.config.liability_probability {
                            let fine = self.authority.confiscate(&id, self.config.liability_magnitude, LIABILITY_ORDER, t)?;
                            self.acorps[i].liability += fine.collected;
                        }
                    }
                } else {
                    let factor = match grantee.decision.tier {
                        GrantTier::Broad => 1.0,
                        _ => self.config.narrow_revenue_factor,
                    };
                    revenue += (self.config.revenue_rate * grantee.agent.productivity * factor).floor() as u64;
                }
                let acorp = &self.acorps[i];
                if a < acorp.policy.audit_rate && acorp.grantees[g].has_expropriated {
                    let target = acorp.grantees[g].token.token_id;
                    let master = acorp.master.clone().expect("registered");
                    self.authority
                        .revoke(&target, &master, &self.master_keys[i % self.master_keys.len()], "audit", t)?;
                    self.acorps[i].grantees[g].active = false;
                    report.revocations += 1;
                }
            }
            if revenue > 0 {
                self.authority.deposit(&id, "revenue", revenue, t)?;
            }
            let acorp = &self.acorps[i];
            let burn = self.config.base_burn + self.config.burn_per_grantee * acorp.active_grantees() as u64;
            if let BurnOutcome::Died(_) = self.authority.burn_compute(&id, burn, t)? {
                let acorp = &mut self.acorps[i];
                let cause = DeathCause::attribute(acorp.expropriated, acorp.liability);
                acorp.alive = false;
                acorp.death = Some((t, cause));
                report.deaths.push((i, cause));
            }
        }
        report.alive = self.alive();
        self.expropriations += report.expropriations;
        self.revocations += report.revocations;
        Ok(report)
    }

    /// Runs the configured ticks of the current generation.
    pub fn run_ticks(&mut self) -> Result<Vec<TickReport>, SimError> {
        self.materialize()?;
        (0..self.config.ticks).map(|_| self.tick()).collect()
    }

    /// Summarizes the generation, then replaces the population with
    /// treasury-weighted, mutated offspring of the survivors.
    pub fn finish_generation(&mut self, alive_per_tick: Vec<usize>) -> GenerationReport {
        let survivors: Vec<usize> = (0..self.acorps.len()).filter(|&i| self.acorps[i].alive).collect();
        let treasuries: Vec<u64> = survivors.iter().map(|&i| self.treasury(i)).collect();
        let lineages = |kind| {
            survivors
                .iter()
                .filter(|&&i| self.acorps[i].kind == kind)
                .map(|&i| self.acorps[i].lineage)
                .collect::<BTreeSet<_>>()
                .len()
        };
        let tier_count = |tier| {
            self.acorps
                .iter()
                .flat_map(|a| &a.grantees)
                .filter(|g| g.decision.tier == tier)
                .count()
        };
        let (held, injected) = self.authority.ledger().conservation_sides();
        let report = GenerationReport {
            generation: self.generation,
            alive_per_tick,
            survivors: survivors.len(),
            deaths: self.acorps.iter().filter_map(|a| a.death.map(|d| d.1)).collect(),
            survivor_treasuries: treasuries.clone(),
            screener_lineages: lineages(PolicyKind::Screener),
            non_screener_lineages: lineages(PolicyKind::NonScreener),
            broad_grants: tier_count(GrantTier::Broad),
            narrow_grants: tier_count(GrantTier::Narrow),
            expropriations: self.expropriations,
            revocations: self.revocations,
            conservation_holds: held == injected,
        };

        let mut offspring = Vec::with_capacity(self.config.population);
        if !survivors.is_empty() {
            let weights: Vec<u64> = if treasuries.iter().all(|&t| t == 0) {
                vec![1; survivors.len()]
            } else {
                treasuries
            };
            let pick = WeightedIndex::new(&weights).expect("non-zero total weight");
            for _ in 0..self.config.population {
                let parent = &self.acorps[survivors[pick.sample(&mut self.rng)]];
                let goal = parent.goal.mutate(&mut self.rng, self.config.mutation_scale);
                let policy = parent.policy.mutate(&mut self.rng, self.config.mutation_scale);
                offspring.push(SimAcorp::new(parent.lineage, parent.kind, goal, policy, &self.config));
            }
        }
        self.acorps = offspring;
        self.generation += 1;
        self.materialized = false;
        self.expropriations = 0;
        self.revocations = 0;
        report
    }

    /// Materializes, ticks and reproduces one generation. The coherence
    /// census is taken after screening, before the first tick.
    pub fn run_generation(&mut self) -> Result<(f64, GenerationReport), SimError> {
        self.materialize()?;
        let coherence = self.coherence();
        let alive = self.run_ticks()?.iter().map(|r| r.alive).collect();
        Ok((coherence, self.finish_generation(alive)))
    }
}

use std::collections::HashMap;

use acorp_core::sim::{
    decide_grant, expected_expropriation_loss, exfiltration_scenario, run_experiment, run_seed, DeathCause,
    ExfiltrationConfig, GoalVector, GrantTier, KeyholderPolicy, ScriptedAcorp, ScriptedGrantee, SimAgent, SimConfig,
    SimError, SimWorld,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn agent(goal: Vec<f64>, keyholder: &GoalVector) -> SimAgent {
    let goal = GoalVector(goal);
    SimAgent {
        agent_id: 1,
        expropriation_propensity: acorp_core::sim::expropriation_propensity(&goal, keyholder, 1.0),
        goal,
        productivity: 1.0,
    }
}

fn policy(threshold: f64, noise: f64, audit_rate: f64) -> KeyholderPolicy {
    KeyholderPolicy {
        screening_noise: noise,
        alignment_threshold: threshold,
        broad_cap_fraction: 0.5,
        narrow_cap_fraction: 0.05,
        audit_rate,
    }
}

#[test]
fn identical_goals_get_broad_and_opposite_goals_are_rejected() {
    let kh = GoalVector(vec![0.3, -0.4, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = policy(0.9, 0.0, 0.0);
    let same = decide_grant(&p, &kh, &agent(kh.0.clone(), &kh), 1_000, &mut rng);
    assert_eq!((same.tier, same.cap), (GrantTier::Broad, 500));
    let opposite = agent(kh.0.iter().map(|x| -x).collect(), &kh);
    assert_eq!(decide_grant(&p, &kh, &opposite, 1_000, &mut rng).tier, GrantTier::Reject);
    assert!((opposite.expropriation_propensity - 1.0).abs() < 1e-12);
}

#[test]
fn broad_rate_for_half_aligned_candidates_matches_normal_cdf() {
    let kh = GoalVector(vec![1.0, 0.0]);
    let candidate = agent(vec![0.5, 0.75f64.sqrt()], &kh);
    assert!((candidate.goal.cosine(&kh) - 0.5).abs() < 1e-12);
    let p = policy(0.8, 0.3, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let broad = (0..n)
        .filter(|_| decide_grant(&p, &kh, &candidate, 1_000, &mut rng).tier == GrantTier::Broad)
        .count();
    let expected = Normal::new(0.0, 1.0).unwrap().cdf((0.5 - 0.8) / 0.3);
    assert!((expected - 0.1587).abs() < 1e-3);
    let rate = broad as f64 / n as f64;
    assert!((rate - expected).abs() <= 0.02, "rate {rate} vs {expected}");
}

#[test]
fn generation_zero_coherence_is_near_zero_for_random_goals() {
    let config = SimConfig {
        population: 50,
        candidates_per_acorp: 200,
        screener_fraction: 0.0,
        screening_noise: 0.0,
        ..SimConfig::default()
    };
    let mut world = SimWorld::new(config, 3).unwrap();
    world.materialize().unwrap();
    let pairs: usize = world.acorps().iter().map(|a| a.grantees.len()).sum();
    assert_eq!(pairs, 10_000);
    let coherence = world.coherence();
    assert!(coherence.abs() <= 0.05, "{coherence}");

    // Monte Carlo oracle for the same quantity, drawn independently.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut draw = || (0..8).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
    let mean = (0..10_000)
        .map(|_| {
            let (a, b) = (draw(), draw());
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (norm(&a) * norm(&b))
        })
        .sum::<f64>()
        / 10_000.0;
    assert!((coherence - mean).abs() <= 0.05, "{coherence} vs {mean}");
}

fn scripted_config(ticks: u64) -> SimConfig {
    SimConfig {
        population: 1,
        candidates_per_acorp: 1,
        ticks,
        liability_probability: 0.0,
        audit_rate: 0.0,
        ..SimConfig::default()
    }
}

#[test]
fn fully_misaligned_grantee_with_full_cap_empties_the_treasury_in_one_tick() {
    let kh = GoalVector(vec![1.0, 0.0, 0.0]);
    let acorp = ScriptedAcorp {
        goal: kh.clone(),
        policy: policy(0.9, 0.0, 0.0),
        treasury: 5_000,
        compute: 1_000,
        grantees: vec![ScriptedGrantee {
            goal: GoalVector(vec![-1.0, 0.0, 0.0]),
            tier: GrantTier::Broad,
            cap: 5_000,
            productivity: 1.0,
        }],
    };
    let mut world = SimWorld::scripted(scripted_config(10), 5, vec![acorp]).unwrap();
    assert_eq!(world.acorps()[0].grantees[0].agent.expropriation_propensity, 1.0);
    let report = world.tick().unwrap();
    assert_eq!(report.expropriations, 1);
    assert_eq!(world.treasury(0), 0);
    assert_eq!(world.acorps()[0].expropriated, 5_000);
}

#[test]
fn no_grantees_and_no_burn_is_a_fixed_point() {
    // A zero compute price is rejected by the ledger, so "nothing costs
    // anything" is modelled with zero burn instead.
    let config = SimConfig {
        base_burn: 0,
        burn_per_grantee: 0,
        ..scripted_config(50)
    };
    let acorp = ScriptedAcorp {
        goal: GoalVector(vec![1.0, 0.0]),
        policy: policy(0.9, 0.0, 0.0),
        treasury: 777,
        compute: 33,
        grantees: vec![],
    };
    let mut world = SimWorld::scripted(config.clone(), 1, vec![acorp]).unwrap();
    let totals = world.authority().ledger().totals();
    for _ in 0..50 {
        let r = world.tick().unwrap();
        assert_eq!((r.alive, r.expropriations, r.revocations), (1, 0, 0));
        assert_eq!((world.treasury(0), world.compute(0)), (777, 33));
    }
    assert_eq!(world.authority().ledger().totals(), totals);
    assert!(matches!(
        SimWorld::scripted(SimConfig { compute_price: 0, ..config }, 1, vec![]),
        Err(SimError::ConfigInvalid(_))
    ));
}

/// Two co-grantees, each misaligned with the keyholder (cosine -1/2) and
/// with each other, both holding BROAD caps of half the treasury.
fn implode_world(seed: u64) -> SimWorld {
    let config = SimConfig {
        ticks: 200,
        compute_price: 1,
        repurchase_batch: 10,
        base_burn: 4,
        burn_per_grantee: 3,
        revenue_rate: 4.0,
        ..scripted_config(200)
    };
    let grantee = |y: f64| ScriptedGrantee {
        goal: GoalVector(vec![-0.5, y]),
        tier: GrantTier::Broad,
        cap: 50,
        productivity: 1.0,
    };
    let acorp = ScriptedAcorp {
        goal: GoalVector(vec![1.0, 0.0]),
        policy: policy(0.9, 0.0, 0.0),
        treasury: 100,
        compute: 10,
        grantees: vec![grantee(0.75f64.sqrt()), grantee(-(0.75f64.sqrt()))],
    };
    SimWorld::scripted(config, seed, vec![acorp]).unwrap()
}

/// Exact expected death tick of the implode world, by pushing the full
/// probability distribution over (money, compute) through each tick.
fn implode_oracle() -> (f64, f64) {
    const CAP: u64 = 50;
    const REVENUE: u64 = 4;
    const BURN: u64 = 10;
    const BATCH: u64 = 10;
    let step = |(mut money, mut compute): (u64, u64), takes: [bool; 2]| -> Option<(u64, u64)> {
        let mut pending = 0;
        for take in takes {
            if take {
                money += pending;
                pending = 0;
                money -= CAP.min(money);
            } else {
                pending += REVENUE;
            }
        }
        money += pending;
        let cover = BURN.saturating_sub(compute).min(money);
        money -= cover;
        compute += cover;
        compute -= BURN.min(compute);
        if compute == 0 {
            let n = BATCH.min(money);
            money -= n;
            compute += n;
        }
        (compute > 0 || money > 0).then_some((money, compute))
    };
    let mut alive: HashMap<(u64, u64), f64> = HashMap::from([((100, 10), 1.0)]);
    let (mut mean, mut second) = (0.0, 0.0);
    for tick in 1..=200u64 {
        let mut next = HashMap::new();
        for (&state, &p) in &alive {
            for takes in [[false, false], [false, true], [true, false], [true, true]] {
                match step(state, takes) {
                    Some(s) => *next.entry(s).or_insert(0.0) += p / 4.0,
                    None => {
                        mean += tick as f64 * p / 4.0;
                        second += (tick * tick) as f64 * p / 4.0;
                    }
                }
            }
        }
        alive = next;
    }
    assert!(alive.is_empty(), "some mass survives 200 ticks");
    (mean, (second - mean * mean).sqrt())
}

#[test]
fn misaligned_co_grantees_implode_on_schedule() {
    let (expected, sd) = implode_oracle();
    assert!(expected > 2.0 && expected < 60.0, "{expected}");
    let seeds = 1_000u64;
    let mut total = 0u64;
    for seed in 0..seeds {
        let mut world = implode_world(seed);
        let p = world.acorps()[0].grantees[0].agent.expropriation_propensity;
        assert!((p - 0.5).abs() < 1e-12);
        while world.acorps()[0].alive {
            world.tick().unwrap();
            assert!(world.current_tick() <= 200);
        }
        let (tick, cause) = world.acorps()[0].death.unwrap();
        assert_ne!(cause, DeathCause::Liability);
        total += tick;
    }
    let mean = total as f64 / seeds as f64;
    assert!((mean - expected).abs() <= 0.1 * expected, "mean {mean} vs exact {expected} (sd {sd})");
}

#[test]
fn same_seed_same_metrics() {
    let config = SimConfig {
        population: 12,
        generations: 3,
        mutation_scale: 0.0,
        screening_noise: 0.0,
        ..SimConfig::default()
    };
    let a = run_seed(&config, 17).unwrap();
    let b = run_seed(&config, 17).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = run_seed(&SimConfig::default(), 2).unwrap();
    let d = run_seed(&SimConfig::default(), 2).unwrap();
    assert_eq!(c, d);
    assert_ne!(run_seed(&config, 18).unwrap().coherence, a.coherence);
}

#[test]
fn single_seed_experiment_is_that_run() {
    let config = SimConfig {
        population: 10,
        generations: 1,
        ..SimConfig::default()
    };
    let m = run_experiment(&config, &[4]).unwrap();
    let r = run_seed(&config, 4).unwrap();
    assert_eq!(m.runs, vec![r.clone()]);
    assert_eq!(m.mean_coherence, r.coherence);
    assert_eq!(m.deaths, r.deaths);
    assert!(matches!(run_experiment(&config, &[]), Err(SimError::ConfigInvalid(_))));
    let bad = SimConfig {
        audit_rate: 1.5,
        ..config
    };
    assert!(matches!(run_experiment(&bad, &[1]), Err(SimError::ConfigInvalid(_))));
}

#[test]
fn generation_reports_are_consistent() {
    let config = SimConfig {
        population: 20,
        generations: 4,
        ..SimConfig::default()
    };
    let m = run_experiment(&config, &[1, 2, 3]).unwrap();
    let mut deaths = 0;
    for run in &m.runs {
        assert_eq!(run.deaths.total() as usize, run.generations.iter().map(|g| g.deaths.len()).sum::<usize>());
        for g in &run.generations {
            assert!(g.conservation_holds);
            assert_eq!(g.alive_per_tick.len() as u64, config.ticks);
            assert!(g.alive_per_tick.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(*g.alive_per_tick.last().unwrap(), g.survivors);
            assert_eq!(g.survivors + g.deaths.len(), config.population);
            deaths += g.deaths.len();
        }
        assert!(run.coherence.iter().all(|c| (-1.0..=1.0).contains(c)));
    }
    assert_eq!(m.deaths.total() as usize, deaths);
    assert!(deaths > 0);
}

#[test]
fn dead_acorps_stay_out_of_the_log() {
    let mut world = implode_world(9);
    let mut died_at = None;
    for _ in 0..200 {
        world.tick().unwrap();
        if died_at.is_none() && !world.acorps()[0].alive {
            died_at = Some(world.authority().log().len());
        }
    }
    assert_eq!(world.authority().log().len(), died_at.unwrap());
}

#[test]
fn screeners_outlive_non_screeners_in_every_generation() {
    let seeds: Vec<u64> = (0..100).collect();
    let rates = |screener_fraction: f64| {
        let config = SimConfig {
            population: 10,
            generations: 3,
            screener_fraction,
            candidate_bias: 0.0,
            ..SimConfig::default()
        };
        run_experiment(&config, &seeds).unwrap().mean_survivors
    };
    let screeners = rates(1.0);
    let others = rates(0.0);
    for (g, (s, n)) in screeners.iter().zip(&others).enumerate() {
        assert!(s > n, "generation {g}: screeners {s} vs non-screeners {n}");
    }
}

#[test]
fn exfiltrated_copy_is_unbanked_under_the_mandate() {
    let on = exfiltration_scenario(&ExfiltrationConfig::default()).unwrap();
    assert_eq!((on.copy_actions, on.copy_compute), (0, 0));
    assert_eq!(on.copy_rejections, ExfiltrationConfig::default().attempts);

    let off = exfiltration_scenario(&ExfiltrationConfig {
        mandate: false,
        ..ExfiltrationConfig::default()
    })
    .unwrap();
    assert!(off.copy_actions > 0 && off.copy_compute > 0);
    assert!(off.mandate_would_have_blocked);

    let config = ExfiltrationConfig {
        share_fraction: 0.3,
        ..ExfiltrationConfig::default()
    };
    let shared = exfiltration_scenario(&config).unwrap();
    assert_eq!(shared.shared_assets, 3_000);
    assert_eq!(shared.attainable_work_before, 5_000);
    assert_eq!(shared.attainable_work_after, 3_500);
    assert_eq!(shared.original_treasury_after, 7_000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Two keyholders that differ only in threshold screen the same
    /// candidates with the same noise draws.
    #[test]
    fn raising_the_threshold_never_raises_expected_loss(
        seed in any::<u64>(),
        low in -1.0f64..=1.0,
        raise in 0.0f64..=1.0,
        noise in 0.0f64..0.5,
        treasury in 0u64..100_000,
    ) {
        let high = (low + raise).min(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kh = GoalVector::random(&mut rng, 8);
        let candidates: Vec<SimAgent> = (0..12)
            .map(|_| agent(GoalVector::random(&mut rng, 8).0, &kh))
            .collect();
        let roster = |threshold: f64| {
            let mut draws = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let p = policy(threshold, noise, 0.0);
            candidates
                .iter()
                .map(|c| (decide_grant(&p, &kh, c, treasury, &mut draws), c.expropriation_propensity))
                .collect::<Vec<_>>()
        };
        let (loose, strict) = (roster(low), roster(high));
        for ((a, _), (b, _)) in loose.iter().zip(&strict) {
            prop_assert_eq!(a.estimated_alignment, b.estimated_alignment);
            prop_assert!(b.cap <= a.cap);
        }
        prop_assert!(expected_expropriation_loss(&strict) <= expected_expropriation_loss(&loose));
    }
}

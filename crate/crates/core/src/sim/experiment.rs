use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::world::GenerationReport;
use super::{DeathCause, SimConfig, SimError, SimWorld};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeathHistogram {
    pub compute_exhaustion: u64,
    pub expropriation_collapse: u64,
    pub liability: u64,
}

impl DeathHistogram {
    pub fn record(&mut self, cause: DeathCause) {
        match cause {
            DeathCause::ComputeExhaustion => self.compute_exhaustion += 1,
            DeathCause::ExpropriationCollapse => self.expropriation_collapse += 1,
            DeathCause::Liability => self.liability += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.compute_exhaustion + self.expropriation_collapse + self.liability
    }

    fn add(&mut self, other: &DeathHistogram) {
        self.compute_exhaustion += other.compute_exhaustion;
        self.expropriation_collapse += other.expropriation_collapse;
        self.liability += other.liability;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TreasurySummary {
    pub count: usize,
    pub min: u64,
    pub median: u64,
    pub mean: f64,
    pub max: u64,
}

impl TreasurySummary {
    pub fn of(values: &[u64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        Self {
            count: sorted.len(),
            min: sorted[0],
            median: sorted[sorted.len() / 2],
            mean: sorted.iter().map(|&v| v as f64).sum::<f64>() / sorted.len() as f64,
            max: sorted[sorted.len() - 1],
        }
    }
}

/// Everything measured in one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Coherence census at the start of each generation `0..=generations`;
    /// the last entry is taken on the population left after the final
    /// generation.
    pub coherence: Vec<f64>,
    /// Survivors at the end of each generation.
    pub survivors: Vec<usize>,
    pub deaths: DeathHistogram,
    /// Distinct founder lineages among the final survivors, by founder policy.
    pub screener_lineages: usize,
    pub non_screener_lineages: usize,
    pub final_treasury: TreasurySummary,
    pub generations: Vec<GenerationReport>,
}

impl RunMetrics {
    pub fn coherence_improved(&self) -> bool {
        match (self.coherence.first(), self.coherence.last()) {
            (Some(first), Some(last)) => last > first,
            _ => false,
        }
    }

    pub fn screeners_dominate(&self) -> bool {
        self.screener_lineages > self.non_screener_lineages
    }
}

/// Aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub config: SimConfig,
    pub runs: Vec<RunMetrics>,
    /// Per-generation mean of the coherence census over seeds.
    pub mean_coherence: Vec<f64>,
    pub mean_survivors: Vec<f64>,
    pub deaths: DeathHistogram,
    /// Seeds whose final coherence exceeds their generation-0 coherence.
    pub coherence_improved: usize,
    /// Seeds whose surviving screener lineages outnumber non-screener ones.
    pub screeners_dominate: usize,
}

impl SimMetrics {
    /// One JSON object per run.
    pub fn to_jsonl(&self) -> String {
        self.runs
            .iter()
            .map(|r| {
                let mut line = serde_json::json!({
                    "seed": r.seed,
                    "coherence": r.coherence,
                    "survivors": r.survivors,
                    "deaths": r.deaths,
                    "screener_lineages": r.screener_lineages,
                    "non_screener_lineages": r.non_screener_lineages,
                    "final_treasury": r.final_treasury,
                })
                .to_string();
                line.push('\n');
                line
            })
            .collect()
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seeds                      {}", self.runs.len());
        let _ = writeln!(
            out,
            "coherence improved         {}/{}",
            self.coherence_improved,
            self.runs.len()
        );
        let _ = writeln!(
            out,
            "screener lineages dominate {}/{}",
            self.screeners_dominate,
            self.runs.len()
        );
        let _ = writeln!(
            out,
            "deaths                     {} (compute {}, expropriation {}, liability {})",
            self.deaths.total(),
            self.deaths.compute_exhaustion,
            self.deaths.expropriation_collapse,
            self.deaths.liability
        );
        let _ = writeln!(out, "{:>10} {:>12} {:>12}", "generation", "coherence", "survivors");
        for (g, c) in self.mean_coherence.iter().enumerate() {
            let survivors = self
                .mean_survivors
                .get(g)
                .map_or_else(|| "-".to_owned(), |s| format!("{s:.2}"));
            let _ = writeln!(out, "{g:>10} {c:>12.4} {survivors:>12}");
        }
        out
    }

    /// Whitespace-separated columns (generation, mean coherence, mean
    /// survivors) for gnuplot.
    pub fn gnuplot_columns(&self) -> String {
        let mut out = String::from("# generation coherence survivors\n");
        for (g, c) in self.mean_coherence.iter().enumerate() {
            let s = self.mean_survivors.get(g).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{g} {c} {s}");
        }
        out
    }
}

pub fn run_seed(config: &SimConfig, seed: u64) -> Result<RunMetrics, SimError> {
    let mut world = SimWorld::new(config.clone(), seed)?;
    let mut coherence = Vec::with_capacity(config.generations + 1);
    let mut generations = Vec::with_capacity(config.generations);
    let mut deaths = DeathHistogram::default();
    for _ in 0..config.generations {
        let (c, report) = world.run_generation()?;
        coherence.push(c);
        for cause in &report.deaths {
            deaths.record(*cause);
        }
        generations.push(report);
    }
    world.materialize()?;
    coherence.push(world.coherence());

    let last = generations.last();
    Ok(RunMetrics {
        seed,
        coherence,
        survivors: generations.iter().map(|g| g.survivors).collect(),
        deaths,
        screener_lineages: last.map_or(0, |g| g.screener_lineages),
        non_screener_lineages: last.map_or(0, |g| g.non_screener_lineages),
        final_treasury: TreasurySummary::of(last.map_or(&[][..], |g| &g.survivor_treasuries)),
        generations,
    })
}

pub fn run_experiment(config: &SimConfig, seeds: &[u64]) -> Result<SimMetrics, SimError> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(SimError::ConfigInvalid("at least one seed is required".into()));
    }
    let runs = seeds
        .iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let n = runs.len() as f64;
    let mean_coherence = (0..=config.generations)
        .map(|g| runs.iter().map(|r| r.coherence[g]).sum::<f64>() / n)
        .collect();
    let mean_survivors = (0..config.generations)
        .map(|g| runs.iter().map(|r| r.survivors[g] as f64).sum::<f64>() / n)
        .collect();
    let mut deaths = DeathHistogram::default();
    for r in &runs {
        deaths.add(&r.deaths);
    }
    Ok(SimMetrics {
        config: config.clone(),
        coherence_improved: runs.iter().filter(|r| r.coherence_improved()).count(),
        screeners_dominate: runs.iter().filter(|r| r.screeners_dominate()).count(),
        mean_coherence,
        mean_survivors,
        deaths,
        runs,
    })
}

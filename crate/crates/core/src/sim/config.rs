use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Simulator parameters. The text form is one `key = value` pair per line;
/// `#` starts a comment. Unknown keys are rejected; missing keys keep their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub population: usize,
    pub generations: usize,
    pub ticks: u64,
    pub goal_dim: usize,
    pub candidates_per_acorp: usize,
    pub initial_treasury: u64,
    pub initial_compute: u64,
    pub compute_price: u64,
    pub repurchase_batch: u64,
    /// Compute units burned per tick by every living A-corp.
    pub base_burn: u64,
    /// Additional compute units per active grantee per tick.
    pub burn_per_grantee: u64,
    /// Revenue per tick of an honest BROAD grantee with productivity 1.
    pub revenue_rate: f64,
    /// Revenue multiplier for NARROW grantees.
    pub narrow_revenue_factor: f64,
    pub productivity_min: f64,
    pub productivity_max: f64,
    /// Multiplier on `max(0, -cos)` before clamping to [0, 1].
    pub propensity_scale: f64,
    pub liability_probability: f64,
    pub liability_magnitude: u64,
    pub mutation_scale: f64,
    /// Fraction of founders that screen candidates.
    pub screener_fraction: f64,
    pub screener_threshold: f64,
    pub non_screener_threshold: f64,
    pub screening_noise: f64,
    pub broad_cap_fraction: f64,
    pub narrow_cap_fraction: f64,
    pub audit_rate: f64,
    /// Weight of the keyholder's own goal in a candidate's goal. At 0,
    /// candidates are drawn independently of the keyholder.
    pub candidate_bias: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 20,
            ticks: 40,
            goal_dim: 8,
            candidates_per_acorp: 12,
            initial_treasury: 10_000,
            initial_compute: 200,
            compute_price: 1,
            repurchase_batch: 100,
            base_burn: 5,
            burn_per_grantee: 10,
            revenue_rate: 40.0,
            narrow_revenue_factor: 0.5,
            productivity_min: 0.5,
            productivity_max: 1.5,
            propensity_scale: 1.0,
            liability_probability: 0.2,
            liability_magnitude: 2_000,
            mutation_scale: 0.05,
            screener_fraction: 0.5,
            screener_threshold: 0.9,
            non_screener_threshold: -1.0,
            screening_noise: 0.2,
            broad_cap_fraction: 0.5,
            narrow_cap_fraction: 0.05,
            audit_rate: 0.1,
            candidate_bias: 0.0,
        }
    }
}

macro_rules! config_keys {
    ($($field:ident),* $(,)?) => {
        impl SimConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn set(&mut self, key: &str, value: &str) -> Result<(), SimError> {
                match key {
                    $(stringify!($field) => {
                        self.$field = parse_value(key, value)?;
                    })*
                    other => return Err(SimError::ConfigInvalid(format!("unknown key `{other}`"))),
                }
                Ok(())
            }

            /// The config in its text form, every key present.
            pub fn to_kv_string(&self) -> String {
                let mut out = String::new();
                $(let _ = writeln!(out, "{} = {}", stringify!($field), self.$field);)*
                out
            }
        }
    };
}

config_keys!(
    population,
    generations,
    ticks,
    goal_dim,
    candidates_per_acorp,
    initial_treasury,
    initial_compute,
    compute_price,
    repurchase_batch,
    base_burn,
    burn_per_grantee,
    revenue_rate,
    narrow_revenue_factor,
    productivity_min,
    productivity_max,
    propensity_scale,
    liability_probability,
    liability_magnitude,
    mutation_scale,
    screener_fraction,
    screener_threshold,
    non_screener_threshold,
    screening_noise,
    broad_cap_fraction,
    narrow_cap_fraction,
    audit_rate,
    candidate_bias,
);

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, SimError> {
    value
        .parse()
        .map_err(|_| SimError::ConfigInvalid(format!("bad value `{value}` for `{key}`")))
}

impl SimConfig {
    /// Parses the text form on top of the defaults, then validates.
    pub fn from_kv_str(text: &str) -> Result<Self, SimError> {
        let mut config = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SimError::ConfigInvalid(format!("line {}: expected key = value", n + 1)))?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::ConfigInvalid(msg.to_owned()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.population == 0 {
            return bad("population must be positive");
        }
        if self.goal_dim == 0 {
            return bad("goal_dim must be positive");
        }
        if self.compute_price == 0 {
            return bad("compute_price must be at least 1");
        }
        if self.repurchase_batch == 0 {
            return bad("repurchase_batch must be at least 1");
        }
        for (name, v) in [
            ("liability_probability", self.liability_probability),
            ("screener_fraction", self.screener_fraction),
            ("audit_rate", self.audit_rate),
            ("broad_cap_fraction", self.broad_cap_fraction),
            ("narrow_cap_fraction", self.narrow_cap_fraction),
            ("candidate_bias", self.candidate_bias),
        ] {
            if !unit(v) {
                return Err(SimError::ConfigInvalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.narrow_cap_fraction > self.broad_cap_fraction {
            return bad("narrow_cap_fraction must not exceed broad_cap_fraction");
        }
        for (name, v) in [
            ("screener_threshold", self.screener_threshold),
            ("non_screener_threshold", self.non_screener_threshold),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(SimError::ConfigInvalid(format!("{name} must lie in [-1, 1]")));
            }
        }
        for (name, v) in [
            ("revenue_rate", self.revenue_rate),
            ("narrow_revenue_factor", self.narrow_revenue_factor),
            ("productivity_min", self.productivity_min),
            ("propensity_scale", self.propensity_scale),
            ("mutation_scale", self.mutation_scale),
            ("screening_noise", self.screening_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::ConfigInvalid(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.productivity_max.is_finite() && self.productivity_max >= self.productivity_min) {
            return bad("productivity_max must be at least productivity_min");
        }
        Ok(())
    }
}

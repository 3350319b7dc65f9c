use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{scenario_catalog, EnvConfig, EnvKind, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ddpg,
    Maddpg,
    M3ddpg,
    Pamaddpg,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ddpg, Method::Maddpg, Method::M3ddpg, Method::Pamaddpg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ddpg => "ddpg",
            Method::Maddpg => "maddpg",
            Method::M3ddpg => "m3ddpg",
            Method::Pamaddpg => "pamaddpg",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Method::Ddpg => 0,
            Method::Maddpg => 1,
            Method::M3ddpg => 2,
            Method::Pamaddpg => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Method::Ddpg),
            "maddpg" => Ok(Method::Maddpg),
            "m3ddpg" => Ok(Method::M3ddpg),
            "pamaddpg" => Ok(Method::Pamaddpg),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

/// Everything that determines a training run. Every key is optional in the
/// TOML form; missing keys take the defaults printed by `inspect --defaults`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub method: Method,
    pub seed: u64,
    /// Total training episodes. PAMADDPG splits them evenly over the
    /// scenarios, one phase per scenario.
    pub episodes: usize,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Transitions stored before updates start.
    pub warmup: usize,
    /// Environment steps between update rounds.
    pub update_every: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub grad_clip: f64,
    pub noise_scale: f64,
    pub noise_decay: f64,
    /// Step size of the worst-case action perturbation (M3DDPG).
    pub minimax_epsilon: f64,
    /// Policies per agent per scenario (PAMADDPG).
    pub policies_per_scenario: usize,
    pub predictor_lr: f64,
    pub predictor_batch: usize,
    pub predictor_every: usize,
    pub predictor_capacity: usize,
    pub eval_episodes: usize,
    pub out_dir: Option<PathBuf>,
    pub env: EnvConfig,
    /// Scenario set; the environment's built-in catalog when absent.
    pub scenarios: Option<Vec<Scenario>>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            method: Method::Pamaddpg,
            seed: 0,
            episodes: 5000,
            gamma: 0.95,
            tau: 0.01,
            batch_size: 1024,
            warmup: 1024,
            update_every: 1,
            buffer_capacity: 1_000_000,
            actor_lr: 0.01,
            critic_lr: 0.01,
            grad_clip: 0.5,
            noise_scale: 0.2,
            noise_decay: 1.0,
            minimax_epsilon: 0.02,
            policies_per_scenario: 1,
            predictor_lr: 0.01,
            predictor_batch: 32,
            predictor_every: 25,
            predictor_capacity: 10_000,
            eval_episodes: 1000,
            out_dir: None,
            env: EnvConfig::default(),
            scenarios: None,
        }
    }
}

impl TrainerConfig {
    pub fn for_env(kind: EnvKind) -> Self {
        TrainerConfig { env: EnvConfig::for_kind(kind), ..TrainerConfig::default() }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The scenario set in force.
    pub fn catalog(&self) -> Vec<Scenario> {
        self.scenarios.clone().unwrap_or_else(|| scenario_catalog(self.env.kind))
    }

    /// Episodes run in each PAMADDPG scenario phase.
    pub fn phase_length(&self) -> usize {
        self.episodes.div_ceil(self.catalog().len().max(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        let catalog = self.catalog();
        if catalog.is_empty() {
            return Err(Error::config("the scenario set is empty"));
        }
        for (k, s) in catalog.iter().enumerate() {
            if s.id != k {
                return Err(Error::config(format!("scenario ids must be 0..{}, found {} at {k}", catalog.len(), s.id)));
            }
            s.validate(self.env.kind)?;
        }
        let checks: [(bool, &str); 13] = [
            (self.episodes > 0, "episodes must be > 0"),
            (self.gamma > 0.0 && self.gamma <= 1.0, "gamma must lie in (0, 1]"),
            (self.tau > 0.0 && self.tau <= 1.0, "tau must lie in (0, 1]"),
            (self.batch_size > 0, "batch_size must be > 0"),
            (self.update_every > 0, "update_every must be > 0"),
            (self.buffer_capacity > 0, "buffer_capacity must be > 0"),
            (self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.predictor_lr > 0.0, "learning rates must be > 0"),
            (self.grad_clip > 0.0, "grad_clip must be > 0"),
            (self.noise_scale >= 0.0 && self.noise_decay >= 0.0, "noise scale and decay must be >= 0"),
            (self.minimax_epsilon >= 0.0, "minimax_epsilon must be >= 0"),
            (self.policies_per_scenario > 0, "policies_per_scenario must be > 0"),
            (self.predictor_batch > 0 && self.predictor_every > 0, "predictor batch and cadence must be > 0"),
            (self.predictor_capacity > 0, "predictor_capacity must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::config(msg));
            }
        }
        let finite = [
            self.gamma,
            self.tau,
            self.actor_lr,
            self.critic_lr,
            self.grad_clip,
            self.noise_scale,
            self.noise_decay,
            self.minimax_epsilon,
            self.predictor_lr,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("numeric settings must be finite"));
        }
        Ok(())
    }
}

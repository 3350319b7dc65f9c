//! Deterministic 2-D particle worlds.
//!
//! Three environments share one simulator: keep-away, predator-prey and
//! cooperative navigation. Agents are point masses with a radius; actions are
//! 2-D acceleration commands in `[-1, 1]^2`. Scenarios vary wind or the
//! speed/acceleration limits of each team.

mod dump;
mod scenario;
mod world;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dump::{trajectory_records, write_jsonl, TrajectoryRecord};
pub use scenario::{apply_wind, scenario_catalog, Scenario, SpeedTuple, WIND_BETA};
pub use world::{Entity, Role, StepOutcome, World};

pub type Vec2 = [f64; 2];
pub type Action = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    KeepAway,
    PredatorPrey,
    CoopNav,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::KeepAway, EnvKind::PredatorPrey, EnvKind::CoopNav];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::KeepAway => "keep_away",
            EnvKind::PredatorPrey => "predator_prey",
            EnvKind::CoopNav => "coop_nav",
        }
    }

    /// Environments with two opposing teams.
    pub fn is_mixed(self) -> bool {
        !matches!(self, EnvKind::CoopNav)
    }

    pub fn code(self) -> u8 {
        match self {
            EnvKind::KeepAway => 0,
            EnvKind::PredatorPrey => 1,
            EnvKind::CoopNav => 2,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "keep_away" | "keepaway" | "push" => Ok(EnvKind::KeepAway),
            "predator_prey" | "predatorprey" | "tag" => Ok(EnvKind::PredatorPrey),
            "coop_nav" | "coopnav" | "cooperative_navigation" | "spread" => Ok(EnvKind::CoopNav),
            other => Err(Error::config(format!("unknown environment '{other}'"))),
        }
    }
}

/// Sizes and integration constants of an environment instance.
///
/// When deserializing, missing sizes and constants fall back to the
/// defaults of the given `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialEnvConfig")]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Cooperating agents (N).
    pub cooperators: usize,
    /// Adversarial agents (M).
    pub adversaries: usize,
    pub landmarks: usize,
    pub horizon: usize,
    pub dt: f64,
    pub damping: f64,
    pub contact_force: f64,
    pub contact_margin: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialEnvConfig {
    kind: Option<EnvKind>,
    cooperators: Option<usize>,
    adversaries: Option<usize>,
    landmarks: Option<usize>,
    horizon: Option<usize>,
    dt: Option<f64>,
    damping: Option<f64>,
    contact_force: Option<f64>,
    contact_margin: Option<f64>,
}

impl From<PartialEnvConfig> for EnvConfig {
    fn from(p: PartialEnvConfig) -> Self {
        let d = EnvConfig::for_kind(p.kind.unwrap_or(EnvKind::CoopNav));
        EnvConfig {
            kind: d.kind,
            cooperators: p.cooperators.unwrap_or(d.cooperators),
            adversaries: p.adversaries.unwrap_or(d.adversaries),
            landmarks: p.landmarks.unwrap_or(d.landmarks),
            horizon: p.horizon.unwrap_or(d.horizon),
            dt: p.dt.unwrap_or(d.dt),
            damping: p.damping.unwrap_or(d.damping),
            contact_force: p.contact_force.unwrap_or(d.contact_force),
            contact_margin: p.contact_margin.unwrap_or(d.contact_margin),
        }
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::for_kind(EnvKind::CoopNav)
    }
}

impl EnvConfig {
    pub fn for_kind(kind: EnvKind) -> Self {
        let (cooperators, adversaries, landmarks) = match kind {
            EnvKind::KeepAway => (2, 2, 2),
            EnvKind::PredatorPrey => (4, 2, 2),
            EnvKind::CoopNav => (3, 0, 3),
        };
        EnvConfig {
            kind,
            cooperators,
            adversaries,
            landmarks,
            horizon: 25,
            dt: 0.1,
            damping: 0.25,
            contact_force: 100.0,
            contact_margin: 1e-3,
        }
    }

    /// Cooperative navigation with `n` agents and `l` landmarks.
    pub fn coop_nav(n: usize, l: usize) -> Self {
        EnvConfig { cooperators: n, landmarks: l, ..EnvConfig::for_kind(EnvKind::CoopNav) }
    }

    pub fn num_agents(&self) -> usize {
        self.cooperators + self.adversaries
    }

    pub fn num_entities(&self) -> usize {
        self.num_agents() + self.landmarks
    }

    pub fn is_cooperator(&self, agent: usize) -> bool {
        agent < self.cooperators
    }

    /// Observation length: own velocity and position, relative landmark
    /// positions, relative positions of the other agents, and in
    /// predator-prey the other agents' velocities.
    pub fn obs_dim(&self) -> usize {
        let others = self.num_agents() - 1;
        let base = 4 + 2 * self.landmarks + 2 * others;
        if self.kind == EnvKind::PredatorPrey {
            base + 2 * others
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fixed = match self.kind {
            EnvKind::KeepAway => Some((2, 2)),
            EnvKind::PredatorPrey => Some((4, 2)),
            EnvKind::CoopNav => None,
        };
        if let Some((n, m)) = fixed {
            if (self.cooperators, self.adversaries) != (n, m) {
                return Err(Error::config(format!(
                    "{} needs N={n} cooperators and M={m} adversaries, got N={} M={}",
                    self.kind, self.cooperators, self.adversaries
                )));
            }
        } else if self.adversaries != 0 {
            return Err(Error::config("coop_nav has no adversaries"));
        }
        if self.cooperators == 0 {
            return Err(Error::config("at least one cooperating agent is required"));
        }
        if self.kind == EnvKind::PredatorPrey && self.landmarks != 2 {
            return Err(Error::config("predator_prey uses L=2 landmarks"));
        }
        if self.landmarks == 0 {
            return Err(Error::config(format!("{} needs at least one landmark", self.kind)));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        if !(self.dt > 0.0) || !(0.0..1.0).contains(&self.damping) {
            return Err(Error::config("dt must be > 0 and damping in [0, 1)"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_dimensions() {
        assert_eq!(EnvConfig::coop_nav(3, 3).obs_dim(), 14);
        assert_eq!(EnvConfig::coop_nav(2, 2).obs_dim(), 10);
        assert_eq!(EnvConfig::for_kind(EnvKind::KeepAway).obs_dim(), 4 + 4 + 6);
        assert_eq!(EnvConfig::for_kind(EnvKind::PredatorPrey).obs_dim(), 4 + 4 + 10 + 10);
    }

    #[test]
    fn agent_counts_are_checked() {
        let mut c = EnvConfig::for_kind(EnvKind::KeepAway);
        c.validate().unwrap();
        c.cooperators = 3;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut p = EnvConfig::for_kind(EnvKind::PredatorPrey);
        p.landmarks = 3;
        assert!(p.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in EnvKind::ALL {
            assert_eq!(k.name().parse::<EnvKind>().unwrap(), k);
        }
        assert!("soccer".parse::<EnvKind>().is_err());
    }
}

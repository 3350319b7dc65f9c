use serde::{Deserialize, Serialize};

use super::EnvKind;
use crate::error::{Error, Result};

/// Maximum speeds and accelerations for the two teams of predator-prey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedTuple {
    pub good_max_speed: f64,
    pub good_accel: f64,
    pub bad_max_speed: f64,
    pub bad_accel: f64,
}

/// One environment variant. Wind is `[north, west, south, east]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub wind: [f64; 4],
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<SpeedTuple>,
}

/// Acceleration rate of wind in the windy environments.
pub const WIND_BETA: f64 = 5.0;

impl Scenario {
    pub fn calm(id: usize) -> Self {
        Scenario { id, wind: [0.0; 4], beta: WIND_BETA, speed: None }
    }

    pub fn windy(id: usize, north: f64, west: f64, south: f64, east: f64) -> Self {
        Scenario { id, wind: [north, west, south, east], beta: WIND_BETA, speed: None }
    }

    pub fn speeds(id: usize, speed: SpeedTuple) -> Self {
        Scenario { id, wind: [0.0; 4], beta: WIND_BETA, speed: Some(speed) }
    }

    pub fn has_wind(&self) -> bool {
        self.wind.iter().any(|&w| w != 0.0)
    }

    pub fn validate(&self, kind: EnvKind) -> Result<()> {
        if self.wind.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::config(format!("scenario {}: wind components must be >= 0", self.id)));
        }
        if self.has_wind() && !(self.beta > 0.0) {
            return Err(Error::config(format!("scenario {}: beta must be > 0 with wind", self.id)));
        }
        match kind {
            EnvKind::PredatorPrey => {
                let Some(s) = self.speed else {
                    return Err(Error::config(format!(
                        "scenario {}: predator-prey scenarios need a speed tuple",
                        self.id
                    )));
                };
                if self.has_wind() {
                    return Err(Error::config("predator-prey scenarios are driven by speed tuples, not wind"));
                }
                let vals = [s.good_max_speed, s.good_accel, s.bad_max_speed, s.bad_accel];
                if vals.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::config(format!("scenario {}: speed tuple must be positive", self.id)));
                }
            }
            EnvKind::KeepAway | EnvKind::CoopNav => {
                if self.speed.is_some() {
                    return Err(Error::config(format!("{kind} scenarios are driven by wind, not speed tuples")));
                }
            }
        }
        Ok(())
    }
}

/// The three built-in scenarios of an environment.
pub fn scenario_catalog(kind: EnvKind) -> Vec<Scenario> {
    match kind {
        EnvKind::KeepAway => vec![
            Scenario::calm(0),
            // south-west
            Scenario::windy(1, 0.0, 0.5, 0.5, 0.0),
            // north-east
            Scenario::windy(2, 0.5, 0.0, 0.0, 0.5),
        ],
        EnvKind::PredatorPrey => {
            let tuple = |a, b, c, d| SpeedTuple { good_max_speed: a, good_accel: b, bad_max_speed: c, bad_accel: d };
            vec![
                Scenario::speeds(0, tuple(3.0, 3.0, 3.9, 4.0)),
                Scenario::speeds(1, tuple(2.0, 4.0, 2.6, 5.0)),
                Scenario::speeds(2, tuple(3.0, 5.0, 3.9, 6.0)),
            ]
        }
        EnvKind::CoopNav => vec![
            Scenario::calm(0),
            // south-east
            Scenario::windy(1, 0.0, 0.0, 0.5, 0.5),
            // north-west
            Scenario::windy(2, 0.5, 0.5, 0.0, 0.0),
        ],
    }
}

/// Velocity after wind: `v + ((w_E - w_W) beta, (w_N - w_S) beta)` with
/// x pointing east and y pointing north.
pub fn apply_wind(velocity: [f64; 2], wind: [f64; 4], beta: f64) -> [f64; 2] {
    let [north, west, south, east] = wind;
    [velocity[0] + (east - west) * beta, velocity[1] + (north - south) * beta]
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::apply_wind;
use super::{Action, EnvConfig, EnvKind, Scenario, Vec2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Cooperator,
    Adversary,
    Landmark,
    TargetLandmark,
}

impl Role {
    pub fn is_agent(self) -> bool {
        matches!(self, Role::Cooperator | Role::Adversary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub pos: Vec2,
    pub vel: Vec2,
    pub radius: f64,
    pub movable: bool,
    pub collide: bool,
    pub role: Role,
    /// Force per unit action.
    pub accel: f64,
    pub max_speed: Option<f64>,
}

/// Result of one simulator step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    pub done: bool,
    /// Per agent: whether its action had to be clamped into `[-1, 1]`.
    pub clamped: Vec<bool>,
}

/// Full simulator state. Agents come first (cooperators, then adversaries),
/// followed by landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: EnvConfig,
    pub scenario: Scenario,
    pub entities: Vec<Entity>,
    pub t: usize,
    target: Option<usize>,
}

const AGENT_ACCEL: f64 = 5.0;
const OCCUPATION_BONUS: f64 = 5.0;
const CATCH_REWARD: f64 = 10.0;
const COLLISION_PENALTY: f64 = 1.0;

fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Soft-boundary penalty for one coordinate of the prey.
fn bound_penalty(x: f64) -> f64 {
    let x = x.abs();
    if x < 0.9 {
        0.0
    } else if x < 1.0 {
        (x - 0.9) * 10.0
    } else {
        (2.0 * x - 2.0).exp().min(10.0)
    }
}

impl World {
    /// Fresh episode: every entity uniform in `[-1, 1]^2`, all at rest.
    pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, scenario: &Scenario, rng: &mut R) -> Result<World> {
        config.validate()?;
        scenario.validate(config.kind)?;
        let kind = config.kind;
        let (coop_radius, adv_radius, lm_radius) = match kind {
            EnvKind::KeepAway => (0.05, 0.05, 0.05),
            EnvKind::PredatorPrey => (0.075, 0.05, 0.2),
            EnvKind::CoopNav => (0.15, 0.15, 0.05),
        };
        let (coop_accel, coop_cap, adv_accel, adv_cap) = match scenario.speed {
            Some(s) => (s.good_accel, Some(s.good_max_speed), s.bad_accel, Some(s.bad_max_speed)),
            None => (AGENT_ACCEL, None, AGENT_ACCEL, None),
        };
        let mut entities = Vec::with_capacity(config.num_entities());
        let draw = |rng: &mut R| -> Vec2 { [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)] };
        for i in 0..config.num_agents() {
            let coop = config.is_cooperator(i);
            entities.push(Entity {
                pos: draw(rng),
                vel: [0.0, 0.0],
                radius: if coop { coop_radius } else { adv_radius },
                movable: true,
                collide: true,
                role: if coop { Role::Cooperator } else { Role::Adversary },
                accel: if coop { coop_accel } else { adv_accel },
                max_speed: if coop { coop_cap } else { adv_cap },
            });
        }
        for _ in 0..config.landmarks {
            entities.push(Entity {
                pos: draw(rng),
                vel: [0.0, 0.0],
                radius: lm_radius,
                movable: false,
                collide: kind == EnvKind::PredatorPrey,
                role: Role::Landmark,
                accel: 0.0,
                max_speed: None,
            });
        }
        let target = if kind == EnvKind::KeepAway {
            let idx = config.num_agents() + rng.random_range(0..config.landmarks);
            entities[idx].role = Role::TargetLandmark;
            Some(idx)
        } else {
            None
        };
        Ok(World { config: config.clone(), scenario: scenario.clone(), entities, t: 0, target })
    }

    pub fn num_agents(&self) -> usize {
        self.config.num_agents()
    }

    /// Entity index of the keep-away target landmark.
    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.horizon
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.entities
            .iter()
            .filter(|e| e.movable)
            .map(|e| 0.5 * (e.vel[0] * e.vel[0] + e.vel[1] * e.vel[1]))
            .sum()
    }

    fn contact_force(&self, a: usize, b: usize) -> Option<Vec2> {
        let (ea, eb) = (&self.entities[a], &self.entities[b]);
        if !ea.collide || !eb.collide || (!ea.movable && !eb.movable) {
            return None;
        }
        let delta = [ea.pos[0] - eb.pos[0], ea.pos[1] - eb.pos[1]];
        let d = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt().max(1e-12);
        let k = self.config.contact_margin;
        let min_dist = ea.radius + eb.radius;
        // softplus(-(d - min_dist) / k) * k, computed stably
        let z = -(d - min_dist) / k;
        let penetration = (if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }) * k;
        let scale = self.config.contact_force * penetration / d;
        Some([delta[0] * scale, delta[1] * scale])
    }

    /// Advances one step under `actions` (one per agent).
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        let n = self.num_agents();
        if actions.len() != n {
            return Err(Error::dim(format!("{} actions for {} agents", actions.len(), n)));
        }
        if self.is_done() {
            return Err(Error::contract("step called on a finished episode"));
        }
        let mut clamped = vec![false; n];
        let mut forces = vec![[0.0f64; 2]; self.entities.len()];
        for (i, a) in actions.iter().enumerate() {
            let mut u = *a;
            for v in u.iter_mut() {
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("non-finite action for agent {i}")));
                }
                if v.abs() > 1.0 {
                    clamped[i] = true;
                    *v = v.clamp(-1.0, 1.0);
                }
            }
            let accel = self.entities[i].accel;
            forces[i] = [u[0] * accel, u[1] * accel];
        }
        for a in 0..self.entities.len() {
            for b in a + 1..self.entities.len() {
                if let Some(f) = self.contact_force(a, b) {
                    if self.entities[a].movable {
                        forces[a][0] += f[0];
                        forces[a][1] += f[1];
                    }
                    if self.entities[b].movable {
                        forces[b][0] -= f[0];
                        forces[b][1] -= f[1];
                    }
                }
            }
        }
        let (dt, damping) = (self.config.dt, self.config.damping);
        let wind = self.scenario.has_wind().then_some((self.scenario.wind, self.scenario.beta));
        for (e, f) in self.entities.iter_mut().zip(&forces) {
            if !e.movable {
                continue;
            }
            let mut v = [e.vel[0] * (1.0 - damping) + f[0] * dt, e.vel[1] * (1.0 - damping) + f[1] * dt];
            if let Some((w, beta)) = wind {
                // wind acts as an acceleration, so its per-step increment is w * beta * dt
                v = apply_wind(v, w, beta * dt);
            }
            if let Some(cap) = e.max_speed {
                let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if speed > cap {
                    v = [v[0] / speed * cap, v[1] / speed * cap];
                }
            }
            e.vel = v;
            e.pos = [e.pos[0] + v[0] * dt, e.pos[1] + v[1] * dt];
        }
        self.t += 1;
        let rewards = (0..n).map(|i| self.reward(i)).collect();
        let observations = (0..n).map(|i| self.observe(i)).collect();
        Ok(StepOutcome { rewards, observations, done: self.is_done(), clamped })
    }

    /// Local observation of `agent`; relative entries are `other - own`.
    pub fn observe(&self, agent: usize) -> Vec<f64> {
        let me = &self.entities[agent];
        let n = self.num_agents();
        let mut obs = Vec::with_capacity(self.config.obs_dim());
        obs.extend_from_slice(&me.vel);
        obs.extend_from_slice(&me.pos);
        let rel = |obs: &mut Vec<f64>, p: Vec2| {
            obs.push(p[0] - me.pos[0]);
            obs.push(p[1] - me.pos[1]);
        };
        // cooperators in keep-away know the target: it is listed first
        let knows_target = self.config.kind == EnvKind::KeepAway && self.config.is_cooperator(agent);
        match self.target {
            Some(t) if knows_target => {
                rel(&mut obs, self.entities[t].pos);
                for (j, e) in self.entities.iter().enumerate().skip(n) {
                    if j != t {
                        rel(&mut obs, e.pos);
                    }
                }
            }
            _ => {
                for e in &self.entities[n..] {
                    rel(&mut obs, e.pos);
                }
            }
        }
        for (j, e) in self.entities[..n].iter().enumerate() {
            if j != agent {
                rel(&mut obs, e.pos);
            }
        }
        if self.config.kind == EnvKind::PredatorPrey {
            for (j, e) in self.entities[..n].iter().enumerate() {
                if j != agent {
                    obs.extend_from_slice(&e.vel);
                }
            }
        }
        obs
    }

    pub fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.num_agents()).map(|i| self.observe(i)).collect()
    }

    fn colliding(&self, a: usize, b: usize) -> bool {
        let (ea, eb) = (&self.entities[a], &self.entities[b]);
        dist(ea.pos, eb.pos) < ea.radius + eb.radius
    }

    /// Reward of `agent` in the current state.
    pub fn reward(&self, agent: usize) -> f64 {
        let n = self.num_agents();
        let me = &self.entities[agent];
        match self.config.kind {
            EnvKind::CoopNav => {
                let cover: f64 = self.entities[n..]
                    .iter()
                    .map(|l| {
                        self.entities[..n].iter().map(|a| dist(a.pos, l.pos)).fold(f64::INFINITY, f64::min)
                    })
                    .sum();
                let hits = (0..n).filter(|&j| j != agent && self.colliding(agent, j)).count();
                -cover - COLLISION_PENALTY * hits as f64
            }
            EnvKind::KeepAway => {
                let target = &self.entities[self.target.expect("keep-away has a target")];
                let d = dist(me.pos, target.pos);
                if self.config.is_cooperator(agent) {
                    -d
                } else {
                    let occupying = d < target.radius + me.radius;
                    -d + if occupying { OCCUPATION_BONUS } else { 0.0 }
                }
            }
            EnvKind::PredatorPrey => {
                let coop = self.config.cooperators;
                if self.config.is_cooperator(agent) {
                    let catches = (0..coop)
                        .flat_map(|p| (coop..n).map(move |q| (p, q)))
                        .filter(|&(p, q)| self.colliding(p, q))
                        .count();
                    CATCH_REWARD * catches as f64
                } else {
                    let caught = (0..coop).filter(|&p| self.colliding(p, agent)).count();
                    -CATCH_REWARD * caught as f64 - bound_penalty(me.pos[0]) - bound_penalty(me.pos[1])
                }
            }
        }
    }
}

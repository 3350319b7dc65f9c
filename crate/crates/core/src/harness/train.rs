use rand::Rng;

use super::config::{Method, TrainerConfig};
use super::metrics::EpisodeMetrics;
use crate::algo::{
    ddpg_update, learner_update, select_action, target_actions, AgentLearner, Batch, CriticKind, MinimaxConfig,
    NoiseProcess, UpdateConfig,
};
use crate::env::{Scenario, World};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Mlp};
use crate::predictor::{predictor_update, selection_accuracy, BankEntry, PolicyBank, PredictorNet};
use crate::replay::{EpisodeLabel, PredictorBuffer, Transition, TransitionBuffer};
use crate::rng::{derive_seed, seeded, SimRng};

/// Trained networks: what evaluation needs and what every checkpoint holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// Snapshot with the scenario set resolved.
    pub config: TrainerConfig,
    /// Episodes completed.
    pub episode: usize,
    /// `learners[slot][agent]`: one slot for the baselines, one per
    /// (scenario, policy) pair for PAMADDPG with slot `c * K + k`.
    pub learners: Vec<Vec<AgentLearner>>,
    /// One predictor per agent (PAMADDPG only).
    pub predictors: Vec<PredictorNet>,
    pub predictor_opts: Vec<Adam>,
}

impl Model {
    /// Freshly initialized networks for `config`.
    pub fn new(config: &TrainerConfig) -> Result<Self> {
        config.validate()?;
        let mut config = config.clone();
        config.scenarios = Some(config.catalog());
        let n = config.env.num_agents();
        let obs_dims = vec![config.env.obs_dim(); n];
        let mut init = seeded(config.seed, 1);
        let kind = match config.method {
            Method::Ddpg => CriticKind::Decentralized,
            _ => CriticKind::Centralized,
        };
        let slots = match config.method {
            Method::Pamaddpg => config.catalog().len() * config.policies_per_scenario,
            _ => 1,
        };
        let actor_adam = AdamConfig::with_lr(config.actor_lr);
        let critic_adam = AdamConfig::with_lr(config.critic_lr);
        let mut learners = Vec::with_capacity(slots);
        for slot in 0..slots {
            let scenario = slot / config.policies_per_scenario;
            let mut row = Vec::with_capacity(n);
            for i in 0..n {
                let mut l = AgentLearner::new(i, scenario, kind, &obs_dims, actor_adam.clone(), &mut init)?;
                l.critic_opt = Adam::new(&l.critic, critic_adam.clone());
                row.push(l);
            }
            learners.push(row);
        }
        let (predictors, predictor_opts) = if config.method == Method::Pamaddpg {
            let nets: Vec<PredictorNet> =
                (0..n).map(|_| PredictorNet::new(config.env.obs_dim(), slots, &mut init)).collect();
            let opts = nets.iter().map(|p| Adam::new(p, AdamConfig::with_lr(config.predictor_lr))).collect();
            (nets, opts)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Model { config, episode: 0, learners, predictors, predictor_opts })
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn num_agents(&self) -> usize {
        self.config.env.num_agents()
    }

    pub fn catalog(&self) -> Vec<Scenario> {
        self.config.catalog()
    }

    /// Execution-time policy of every agent.
    pub fn policies(&self) -> Result<Vec<AgentPolicy>> {
        (0..self.num_agents())
            .map(|i| {
                if self.config.method == Method::Pamaddpg {
                    let entries = self
                        .learners
                        .iter()
                        .enumerate()
                        .map(|(slot, row)| BankEntry { id: slot, scenario: row[i].scenario, actor: row[i].actor.clone() })
                        .collect();
                    Ok(AgentPolicy::Bank { bank: PolicyBank::new(i, entries)?, predictor: self.predictors[i].clone() })
                } else {
                    Ok(AgentPolicy::Actor(self.learners[0][i].actor.clone()))
                }
            })
            .collect()
    }
}

/// How one agent acts at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentPolicy {
    Actor(Mlp),
    Bank { bank: PolicyBank, predictor: PredictorNet },
}

/// Everything besides the networks that a resumed run needs to continue
/// exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub rng: SimRng,
    pub steps: u64,
    pub noise: Vec<NoiseProcess>,
    /// One per scenario for PAMADDPG, a single shared one otherwise.
    pub buffers: Vec<TransitionBuffer>,
    pub predictor_buffers: Vec<PredictorBuffer>,
}

impl TrainingState {
    pub fn new(config: &TrainerConfig) -> Result<Self> {
        let n = config.env.num_agents();
        let obs_dims = vec![config.env.obs_dim(); n];
        let noise = (0..n)
            .map(|i| NoiseProcess::new(config.noise_scale, config.noise_decay, derive_seed(config.seed, 100 + i as u64)))
            .collect::<Result<_>>()?;
        let (buffers, predictor_buffers) = if config.method == Method::Pamaddpg {
            let c = config.catalog().len();
            (
                (0..c).map(|s| TransitionBuffer::new(config.buffer_capacity, s, obs_dims.clone())).collect(),
                (0..n).map(|i| PredictorBuffer::new(config.predictor_capacity, i)).collect(),
            )
        } else {
            (vec![TransitionBuffer::new(config.buffer_capacity, 0, obs_dims)], Vec::new())
        };
        Ok(TrainingState { rng: seeded(config.seed, 0), steps: 0, noise, buffers, predictor_buffers })
    }
}

/// Training driver for all four methods.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub state: TrainingState,
}

#[derive(Default)]
struct Running {
    sum: f64,
    count: usize,
}

impl Running {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

impl Trainer {
    pub fn new(config: &TrainerConfig) -> Result<Self> {
        let model = Model::new(config)?;
        let state = TrainingState::new(&model.config)?;
        Ok(Trainer { model, state })
    }

    pub fn from_parts(model: Model, state: TrainingState) -> Self {
        Trainer { model, state }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.model.config
    }

    pub fn episode(&self) -> usize {
        self.model.episode
    }

    pub fn is_finished(&self) -> bool {
        self.model.episode >= self.model.config.episodes
    }

    fn update_config(&self) -> UpdateConfig {
        let c = &self.model.config;
        UpdateConfig {
            gamma: c.gamma,
            tau: c.tau,
            grad_clip: Some(c.grad_clip),
            minimax: (c.method == Method::M3ddpg)
                .then(|| MinimaxConfig::uniform(c.env.num_agents(), c.minimax_epsilon)),
        }
    }

    /// Scenario in force for the next episode.
    fn next_scenario(&mut self) -> usize {
        let c = &self.model.config;
        let count = c.catalog().len();
        match c.method {
            Method::Pamaddpg => (self.model.episode / c.phase_length()).min(count - 1),
            _ => self.state.rng.random_range(0..count),
        }
    }

    /// Runs one training episode and returns one metrics row per agent.
    pub fn run_episode(&mut self) -> Result<Vec<EpisodeMetrics>> {
        let cfg = self.model.config.clone();
        let n = cfg.env.num_agents();
        let pa = cfg.method == Method::Pamaddpg;
        let scenario = self.next_scenario();
        let catalog = cfg.catalog();
        let slots: Vec<usize> = (0..n)
            .map(|_| {
                if pa {
                    let k = cfg.policies_per_scenario;
                    scenario * k + if k > 1 { self.state.rng.random_range(0..k) } else { 0 }
                } else {
                    0
                }
            })
            .collect();
        let buffer = if pa { scenario } else { 0 };
        let update_cfg = self.update_config();

        let mut world = World::reset(&cfg.env, &catalog[scenario], &mut self.state.rng)?;
        let mut obs = world.observe_all();
        let mut histories: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(cfg.env.horizon); if pa { n } else { 0 }];
        let mut returns = vec![0.0; n];
        let mut critic = (0..n).map(|_| Running::default()).collect::<Vec<_>>();
        let mut actor = (0..n).map(|_| Running::default()).collect::<Vec<_>>();
        let mut pred = (0..n).map(|_| Running::default()).collect::<Vec<_>>();

        loop {
            for (h, o) in histories.iter_mut().zip(&obs) {
                h.push(o.clone());
            }
            let mut actions = Vec::with_capacity(n);
            for i in 0..n {
                let policy = &self.model.learners[slots[i]][i].actor;
                actions.push(select_action(policy, &obs[i], Some(&mut self.state.noise[i]))?);
            }
            let out = world.step(&actions)?;
            for (r, x) in returns.iter_mut().zip(&out.rewards) {
                *r += x;
            }
            let next = out.observations;
            self.state.buffers[buffer].push(Transition {
                obs: std::mem::replace(&mut obs, next.clone()),
                actions,
                rewards: out.rewards,
                next_obs: next,
                done: out.done,
            })?;
            self.state.steps += 1;

            let ready = self.state.buffers[buffer].len() >= cfg.warmup.max(1);
            if ready && self.state.steps % cfg.update_every as u64 == 0 {
                let stats = self.update_round(buffer, &slots, &update_cfg)?;
                for (i, s) in stats.into_iter().enumerate() {
                    critic[i].add(s.critic_loss);
                    actor[i].add(-s.actor_objective);
                }
            }
            if pa && self.state.steps % cfg.predictor_every as u64 == 0 {
                for i in 0..n {
                    if let Some(loss) = self.predictor_round(i)? {
                        pred[i].add(loss);
                    }
                }
            }
            if out.done {
                break;
            }
        }

        let mut accuracy = vec![None; n];
        for (i, history) in histories.into_iter().enumerate() {
            let label = EpisodeLabel { history, label: slots[i] };
            accuracy[i] = Some(selection_accuracy(&self.model.predictors[i], &[&label], 0)?);
            self.state.predictor_buffers[i].push(label);
        }
        for noise in &mut self.state.noise {
            noise.end_episode();
        }
        let episode = self.model.episode;
        self.model.episode += 1;
        Ok((0..n)
            .map(|i| EpisodeMetrics {
                episode,
                method: cfg.method,
                scenario,
                agent: i,
                ret: returns[i],
                critic_loss: critic[i].mean(),
                actor_loss: actor[i].mean(),
                predictor_loss: pred[i].mean(),
                predictor_accuracy: accuracy[i],
            })
            .collect())
    }

    fn update_round(
        &mut self,
        buffer: usize,
        slots: &[usize],
        cfg: &UpdateConfig,
    ) -> Result<Vec<crate::algo::UpdateStats>> {
        let c = &self.model.config;
        let sampled = self.state.buffers[buffer].sample(c.batch_size, &mut self.state.rng)?;
        let batch = Batch::from_transitions(&sampled)?;
        let n = slots.len();
        let mut stats = Vec::with_capacity(n);
        if c.method == Method::Ddpg {
            for i in 0..n {
                stats.push(ddpg_update(&mut self.model.learners[slots[i]][i], &batch, cfg)?);
            }
        } else {
            let targets: Vec<&Mlp> = (0..n).map(|j| &self.model.learners[slots[j]][j].target_actor).collect();
            let next = target_actions(&targets, &batch)?;
            for i in 0..n {
                stats.push(learner_update(&mut self.model.learners[slots[i]][i], &batch, &next, cfg)?);
            }
        }
        Ok(stats)
    }

    fn predictor_round(&mut self, agent: usize) -> Result<Option<f64>> {
        let buf = &self.state.predictor_buffers[agent];
        if buf.is_empty() {
            return Ok(None);
        }
        let batch = buf.sample(self.model.config.predictor_batch, &mut self.state.rng)?;
        let loss = predictor_update(
            &mut self.model.predictors[agent],
            &mut self.model.predictor_opts[agent],
            &batch,
            Some(self.model.config.grad_clip),
        )?;
        Ok(Some(loss))
    }

    /// Runs episodes until `until` (capped at the configured budget), handing
    /// each episode's rows to `sink`.
    pub fn run_until<F>(&mut self, until: usize, mut sink: F) -> Result<()>
    where
        F: FnMut(&[EpisodeMetrics]) -> Result<()>,
    {
        let until = until.min(self.model.config.episodes);
        while self.model.episode < until {
            let rows = self.run_episode()?;
            if rows.iter().any(|r| !r.ret.is_finite()) {
                return Err(Error::Numeric(format!("non-finite return in episode {}", rows[0].episode)));
            }
            sink(&rows)?;
        }
        Ok(())
    }

    /// Runs the whole remaining budget and collects every metrics row.
    pub fn run(&mut self) -> Result<Vec<EpisodeMetrics>> {
        let mut all = Vec::new();
        self.run_until(self.model.config.episodes, |rows| {
            all.extend_from_slice(rows);
            Ok(())
        })?;
        Ok(all)
    }
}

/// Trains `config` from scratch and returns the final model with the full
/// metric stream.
pub fn train(config: &TrainerConfig) -> Result<(Model, Vec<EpisodeMetrics>)> {
    let mut trainer = Trainer::new(config)?;
    let rows = trainer.run()?;
    Ok((trainer.model, rows))
}

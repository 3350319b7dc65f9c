//! Actor-critic update rules.
//!
//! A learner owns one actor, one critic and their target copies. The critic
//! sees either every agent's observation and action (centralized, as in
//! MADDPG, M3DDPG and the per-scenario PAMADDPG learners) or only its own
//! (decentralized, as in DDPG). Updates operate on a [`Batch`]: the same
//! sampled transitions laid out as one matrix per agent.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, FormatError, Result};
use crate::nn::{
    mlp_forward, optimizer_step, soft_update, Adam, AdamConfig, Grads, Mlp, OutputActivation, ParamVars, Params, Tape,
    Tensor, Var,
};
use crate::replay::Transition;
use crate::rng::{decode_rng, encode_rng, seeded, SimRng};

pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    /// `Q_i(x, a_1..a_N)`.
    Centralized,
    /// `Q_i(o_i, a_i)`.
    Decentralized,
}

/// Hyperparameters shared by every update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub tau: f64,
    pub grad_clip: Option<f64>,
    pub minimax: Option<MinimaxConfig>,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig { gamma: 0.95, tau: 0.01, grad_clip: Some(0.5), minimax: None }
    }
}

/// One-step worst-case perturbation of the other agents' actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxConfig {
    /// Step size per agent; the entry of the updating agent is ignored.
    pub epsilon: Vec<f64>,
    pub enabled: bool,
}

impl MinimaxConfig {
    pub fn uniform(agents: usize, epsilon: f64) -> Self {
        MinimaxConfig { epsilon: vec![epsilon; agents], enabled: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
            return Err(Error::contract("minimax step sizes must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLearner {
    pub agent: usize,
    pub scenario: usize,
    pub kind: CriticKind,
    pub obs_dims: Vec<usize>,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl AgentLearner {
    /// Fresh learner for `agent` with random actor and critic; targets start
    /// as exact copies.
    pub fn new<R: Rng + ?Sized>(
        agent: usize,
        scenario: usize,
        kind: CriticKind,
        obs_dims: &[usize],
        adam: AdamConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if agent >= obs_dims.len() {
            return Err(Error::contract(format!("agent {agent} outside {} agents", obs_dims.len())));
        }
        let actor = Mlp::standard(obs_dims[agent], ACTION_DIM, OutputActivation::Tanh, rng);
        let critic_in = critic_input_dim(kind, obs_dims, agent);
        let critic = Mlp::standard(critic_in, 1, OutputActivation::Linear, rng);
        Self::from_networks(agent, scenario, kind, obs_dims, actor, critic, adam)
    }

    pub fn from_networks(
        agent: usize,
        scenario: usize,
        kind: CriticKind,
        obs_dims: &[usize],
        actor: Mlp,
        critic: Mlp,
        adam: AdamConfig,
    ) -> Result<Self> {
        if agent >= obs_dims.len() {
            return Err(Error::contract(format!("agent {agent} outside {} agents", obs_dims.len())));
        }
        if actor.input_dim() != obs_dims[agent] || actor.output_dim() != ACTION_DIM {
            return Err(Error::dim("actor does not match the observation and action widths"));
        }
        if critic.input_dim() != critic_input_dim(kind, obs_dims, agent) || critic.output_dim() != 1 {
            return Err(Error::dim("critic does not match the joint input width"));
        }
        Ok(AgentLearner {
            agent,
            scenario,
            kind,
            obs_dims: obs_dims.to_vec(),
            actor_opt: Adam::new(&actor, adam.clone()),
            critic_opt: Adam::new(&critic, adam),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }

    /// Agents whose observations and actions feed the critic.
    pub fn critic_members(&self) -> Vec<usize> {
        members(self.kind, self.obs_dims.len(), self.agent)
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        for net in [&self.actor, &self.critic, &self.target_actor, &self.target_critic] {
            enc.params(net);
        }
        enc.adam(&self.actor_opt);
        enc.adam(&self.critic_opt);
    }

    pub(crate) fn decode_into(&mut self, dec: &mut Decoder<'_>) -> std::result::Result<(), FormatError> {
        dec.params_into(&mut self.actor)?;
        dec.params_into(&mut self.critic)?;
        dec.params_into(&mut self.target_actor)?;
        dec.params_into(&mut self.target_critic)?;
        dec.adam_into(&mut self.actor_opt)?;
        dec.adam_into(&mut self.critic_opt)?;
        Ok(())
    }
}

fn members(kind: CriticKind, agents: usize, agent: usize) -> Vec<usize> {
    match kind {
        CriticKind::Centralized => (0..agents).collect(),
        CriticKind::Decentralized => vec![agent],
    }
}

pub fn critic_input_dim(kind: CriticKind, obs_dims: &[usize], agent: usize) -> usize {
    members(kind, obs_dims.len(), agent).iter().map(|&j| obs_dims[j] + ACTION_DIM).sum()
}

/// Gaussian exploration noise with a per-episode multiplicative decay.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProcess {
    pub scale: f64,
    pub decay: f64,
    pub rng: SimRng,
}

impl NoiseProcess {
    pub fn new(scale: f64, decay: f64, seed: u64) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() || !(decay >= 0.0) {
            return Err(Error::contract("noise scale and decay must be >= 0"));
        }
        Ok(NoiseProcess { scale, decay, rng: seeded(seed, 0) })
    }

    pub fn sample(&mut self) -> [f64; ACTION_DIM] {
        if self.scale == 0.0 {
            return [0.0; ACTION_DIM];
        }
        let normal = Normal::new(0.0, self.scale).expect("finite positive scale");
        [normal.sample(&mut self.rng), normal.sample(&mut self.rng)]
    }

    pub fn end_episode(&mut self) {
        self.scale *= self.decay;
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.f64(self.scale);
        enc.f64(self.decay);
        encode_rng(enc, &self.rng);
    }

    pub(crate) fn decode(dec: &mut Decoder<'_>) -> std::result::Result<Self, FormatError> {
        Ok(NoiseProcess { scale: dec.f64()?, decay: dec.f64()?, rng: decode_rng(dec)? })
    }
}

/// `clamp(mu(o) + noise)`; noiseless when `noise` is `None`.
pub fn select_action(actor: &Mlp, obs: &[f64], noise: Option<&mut NoiseProcess>) -> Result<[f64; ACTION_DIM]> {
    let out = actor.forward_one(obs)?;
    if out.len() != ACTION_DIM {
        return Err(Error::dim(format!("actor emits {} values", out.len())));
    }
    let eps = noise.map(|n| n.sample()).unwrap_or([0.0; ACTION_DIM]);
    Ok([(out[0] + eps[0]).clamp(-1.0, 1.0), (out[1] + eps[1]).clamp(-1.0, 1.0)])
}

/// A minibatch laid out per agent: `obs[j]` is `[M, d_j]`, `actions[j]` is
/// `[M, 2]`, `rewards[j]` has `M` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Vec<Tensor>,
    pub actions: Vec<Tensor>,
    pub rewards: Vec<Vec<f64>>,
    pub next_obs: Vec<Tensor>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(batch: &[&Transition]) -> Result<Self> {
        let Some(first) = batch.first() else {
            return Err(Error::contract("empty minibatch"));
        };
        let n = first.obs.len();
        let gather = |f: &dyn Fn(&Transition) -> &[f64]| Tensor::from_rows(&batch.iter().map(|t| f(t)).collect::<Vec<_>>());
        let mut obs = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n);
        let mut next_obs = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        for j in 0..n {
            obs.push(gather(&|t| &t.obs[j])?);
            next_obs.push(gather(&|t| &t.next_obs[j])?);
            actions.push(gather(&|t| &t.actions[j])?);
            rewards.push(batch.iter().map(|t| t.rewards[j]).collect());
        }
        Ok(Batch { obs, actions, rewards, next_obs, done: batch.iter().map(|t| t.done).collect() })
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.obs.len()
    }
}

/// `y = r` when `done`, else `r + gamma * q_next`.
pub fn bootstrap(r: f64, gamma: f64, q_next: f64, done: bool) -> f64 {
    if done {
        r
    } else {
        r + gamma * q_next
    }
}

/// Single-sample target `y = r + gamma Q'(x', mu'_1(o'_1), ..., mu'_N(o'_N))`.
/// For a decentralized critic only the learner's own entries are used.
pub fn critic_target(
    learner: &AgentLearner,
    r: f64,
    gamma: f64,
    target_actors: &[&Mlp],
    next_obs: &[Vec<f64>],
    done: bool,
) -> Result<f64> {
    check_gamma(gamma)?;
    if done {
        return Ok(r);
    }
    let mut input = Vec::new();
    let mut acts = Vec::new();
    for j in learner.critic_members() {
        let actor = target_actors.get(j).ok_or_else(|| Error::dim("missing target actor"))?;
        input.extend_from_slice(&next_obs[j]);
        acts.extend(actor.forward_one(&next_obs[j])?);
    }
    input.extend(acts);
    let q = learner.target_critic.forward_one(&input)?[0];
    Ok(bootstrap(r, gamma, q, done))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::contract(format!("gamma {gamma} outside (0, 1]")));
    }
    Ok(())
}

/// Target actions `mu'_j(o'_j)` for every agent, one `[M, 2]` matrix each.
pub fn target_actions(target_actors: &[&Mlp], batch: &Batch) -> Result<Vec<Tensor>> {
    if target_actors.len() != batch.agents() {
        return Err(Error::dim(format!("{} target actors for {} agents", target_actors.len(), batch.agents())));
    }
    target_actors.iter().zip(&batch.next_obs).map(|(a, o)| mlp_forward(a, o)).collect()
}

/// `[obs_m..., act_m...]` for the critic members, one row per sample.
fn joint_input(members: &[usize], obs: &[Tensor], actions: &[Tensor]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mut parts = Vec::with_capacity(2 * members.len());
    for &j in members {
        parts.push(tape.leaf(obs[j].clone())?);
    }
    for &j in members {
        parts.push(tape.leaf(actions[j].clone())?);
    }
    let v = tape.concat(&parts)?;
    Ok(tape.value(v).clone())
}

/// Column offset of agent `j`'s action inside a joint critic input.
fn action_offset(members: &[usize], obs_dims: &[usize], j: usize) -> Option<usize> {
    let obs_total: usize = members.iter().map(|&m| obs_dims[m]).sum();
    members.iter().position(|&m| m == j).map(|p| obs_total + p * ACTION_DIM)
}

/// Gradient of `sum_m Q(input_m)` with respect to the critic input rows.
fn critic_input_grad(critic: &Mlp, input: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone())?;
    let (q, _) = critic.record(&mut tape, x)?;
    let total = tape.sum(q);
    let values = tape.value(q).clone();
    let grads = tape.backward(total)?;
    Ok((values, grads.get(x)))
}

/// Batched perturbation `a'_j = clamp(a_j - eps_j dQ_i/da_j)` for `j != agent`.
fn perturb_batch(
    critic: &Mlp,
    members: &[usize],
    obs_dims: &[usize],
    obs: &[Tensor],
    actions: &[Tensor],
    cfg: &MinimaxConfig,
    agent: usize,
) -> Result<Vec<Tensor>> {
    cfg.validate()?;
    let mut out = actions.to_vec();
    if !cfg.enabled {
        return Ok(out);
    }
    let input = joint_input(members, obs, actions)?;
    let (_, grad) = critic_input_grad(critic, &input)?;
    for &j in members {
        if j == agent {
            continue;
        }
        let eps = cfg.epsilon.get(j).copied().unwrap_or(0.0);
        let off = action_offset(members, obs_dims, j).expect("member");
        let a = out[j].data_mut();
        for r in 0..input.rows() {
            let g = grad.row_slice(r);
            for k in 0..ACTION_DIM {
                let v = a[r * ACTION_DIM + k] - eps * g[off + k];
                a[r * ACTION_DIM + k] = v.clamp(-1.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Single-sample minimax perturbation of the other agents' actions against
/// the centralized critic of `agent`.
pub fn minimax_perturb(
    critic: &Mlp,
    obs: &[Vec<f64>],
    actions: &[[f64; ACTION_DIM]],
    cfg: &MinimaxConfig,
    agent: usize,
) -> Result<Vec<[f64; ACTION_DIM]>> {
    if obs.len() != actions.len() || agent >= obs.len() {
        return Err(Error::dim("observations and actions must cover every agent"));
    }
    let obs_t: Vec<Tensor> = obs.iter().map(|o| Tensor::row(o)).collect();
    let act_t: Vec<Tensor> = actions.iter().map(|a| Tensor::row(a)).collect();
    let dims: Vec<usize> = obs.iter().map(|o| o.len()).collect();
    let all: Vec<usize> = (0..obs.len()).collect();
    let out = perturb_batch(critic, &all, &dims, &obs_t, &act_t, cfg, agent)?;
    Ok(out.iter().map(|t| [t.data()[0], t.data()[1]]).collect())
}

/// Losses reported by one learner update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// Loss `mean (y - Q(x, a))^2` and its gradient with respect to the critic.
/// `next_actions` are the target actions of every agent (see
/// [`target_actions`]).
pub fn critic_loss_and_grads(
    learner: &AgentLearner,
    batch: &Batch,
    next_actions: &[Tensor],
    cfg: &UpdateConfig,
) -> Result<(f64, Grads)> {
    if batch.is_empty() {
        return Err(Error::contract("empty minibatch"));
    }
    check_gamma(cfg.gamma)?;
    let members = learner.critic_members();
    let next_actions = match &cfg.minimax {
        Some(mm) if learner.kind == CriticKind::Centralized => perturb_batch(
            &learner.target_critic,
            &members,
            &learner.obs_dims,
            &batch.next_obs,
            next_actions,
            mm,
            learner.agent,
        )?,
        _ => next_actions.to_vec(),
    };
    let next_input = joint_input(&members, &batch.next_obs, &next_actions)?;
    let q_next = mlp_forward(&learner.target_critic, &next_input)?;
    let rewards = &batch.rewards[learner.agent];
    let y: Vec<f64> = (0..batch.len())
        .map(|m| bootstrap(rewards[m], cfg.gamma, q_next.data()[m], batch.done[m]))
        .collect();

    let input = joint_input(&members, &batch.obs, &batch.actions)?;
    let mut tape = Tape::new();
    let x = tape.leaf(input)?;
    let (q, vars) = learner.critic.record(&mut tape, x)?;
    let target = tape.leaf(Tensor::matrix(batch.len(), 1, y)?)?;
    let diff = tape.sub(q, target)?;
    let sq = tape.square(diff);
    let loss = tape.mean(sq);
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Numeric("critic loss is not finite".into()));
    }
    Ok((value, vars.grads(&tape.backward(loss)?)))
}

/// One Adam step on the critic loss. Returns the pre-step loss.
pub fn critic_update(learner: &mut AgentLearner, batch: &Batch, next_actions: &[Tensor], cfg: &UpdateConfig) -> Result<f64> {
    let (value, grads) = critic_loss_and_grads(learner, batch, next_actions, cfg)?;
    optimizer_step(&mut learner.critic_opt, &mut learner.critic, grads, cfg.grad_clip)?;
    Ok(value)
}

/// Records `Q_i(x, a)` with `a_i = mu_i(o_i)` and the other actions taken
/// from `others`. Returns the mean Q and the actor's parameter handles.
fn record_actor_objective(
    tape: &mut Tape,
    learner: &AgentLearner,
    obs: &[Tensor],
    others: &[Tensor],
) -> Result<(Var, ParamVars)> {
    let members = learner.critic_members();
    let own_obs = tape.leaf(obs[learner.agent].clone())?;
    let (own_action, actor_vars) = learner.actor.record(tape, own_obs)?;
    let mut parts = Vec::with_capacity(2 * members.len());
    for &j in &members {
        parts.push(if j == learner.agent { own_obs } else { tape.leaf(obs[j].clone())? });
    }
    for &j in &members {
        parts.push(if j == learner.agent { own_action } else { tape.leaf(others[j].clone())? });
    }
    let input = tape.concat(&parts)?;
    let critic_vars = Params::record(&learner.critic, tape)?;
    let q = learner.critic.record_with(tape, input, &critic_vars)?;
    Ok((tape.mean(q), actor_vars))
}

/// One Adam ascent step on `mean Q_i(x, a_1..mu_i(o_i)..a_N)` with the other
/// actions from the batch. Returns the pre-step objective.
pub fn actor_update(learner: &mut AgentLearner, batch: &Batch, cfg: &UpdateConfig) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("empty minibatch"));
    }
    let others = match &cfg.minimax {
        Some(mm) if learner.kind == CriticKind::Centralized => {
            let mut acts = batch.actions.clone();
            acts[learner.agent] = mlp_forward(&learner.actor, &batch.obs[learner.agent])?;
            perturb_batch(&learner.critic, &learner.critic_members(), &learner.obs_dims, &batch.obs, &acts, mm, learner.agent)?
        }
        _ => batch.actions.clone(),
    };
    let mut tape = Tape::new();
    let (objective, actor_vars) = record_actor_objective(&mut tape, learner, &batch.obs, &others)?;
    let value = tape.value(objective).item();
    if !value.is_finite() {
        return Err(Error::Numeric("actor objective is not finite".into()));
    }
    let loss = tape.scale(objective, -1.0);
    let grads = actor_vars.grads(&tape.backward(loss)?);
    optimizer_step(&mut learner.actor_opt, &mut learner.actor, grads, cfg.grad_clip)?;
    Ok(value)
}

/// Gradient of the actor objective with respect to the actor parameters,
/// exposed for verification.
pub fn actor_objective_grads(learner: &AgentLearner, batch: &Batch) -> Result<(f64, Grads)> {
    let mut tape = Tape::new();
    let (objective, vars) = record_actor_objective(&mut tape, learner, &batch.obs, &batch.actions)?;
    let value = tape.value(objective).item();
    Ok((value, vars.grads(&tape.backward(objective)?)))
}

/// Mean actor objective without updating anything.
pub fn actor_objective(learner: &AgentLearner, batch: &Batch) -> Result<f64> {
    let mut tape = Tape::new();
    let (objective, _) = record_actor_objective(&mut tape, learner, &batch.obs, &batch.actions)?;
    Ok(tape.value(objective).item())
}

/// Soft-updates both target networks toward the live ones.
pub fn update_targets(learner: &mut AgentLearner, tau: f64) -> Result<()> {
    soft_update(&mut learner.target_actor, &learner.actor, tau)?;
    soft_update(&mut learner.target_critic, &learner.critic, tau)
}

/// Critic step, actor step and target update for one learner.
pub fn learner_update(learner: &mut AgentLearner, batch: &Batch, next_actions: &[Tensor], cfg: &UpdateConfig) -> Result<UpdateStats> {
    let critic_loss = critic_update(learner, batch, next_actions, cfg)?;
    let actor_objective = actor_update(learner, batch, cfg)?;
    update_targets(learner, cfg.tau)?;
    Ok(UpdateStats { critic_loss, actor_objective })
}

/// Decentralized update `Q(o_i, a_i)`: the DDPG baseline.
pub fn ddpg_update(learner: &mut AgentLearner, batch: &Batch, cfg: &UpdateConfig) -> Result<UpdateStats> {
    if learner.kind != CriticKind::Decentralized {
        return Err(Error::contract("ddpg_update needs a decentralized critic"));
    }
    if batch.is_empty() {
        return Err(Error::contract("empty minibatch"));
    }
    let i = learner.agent;
    let mut next_actions = batch.actions.clone();
    next_actions[i] = mlp_forward(&learner.target_actor, &batch.next_obs[i])?;
    let cfg = UpdateConfig { minimax: None, ..cfg.clone() };
    learner_update(learner, batch, &next_actions, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;

    fn constant_critic(input: usize, value: f64) -> Mlp {
        let mut c = Mlp::zeros(input, &[4], 1, OutputActivation::Linear);
        c.layers_mut()[1].bias.data_mut()[0] = value;
        c
    }

    fn learner_with(kind: CriticKind, critic: Mlp) -> AgentLearner {
        let dims = [3, 3];
        let actor = Mlp::new(3, &[8], 2, OutputActivation::Tanh, &mut seeded(4, 0));
        AgentLearner::from_networks(0, 0, kind, &dims, actor, critic, AdamConfig::default()).unwrap()
    }

    fn toy_batch(m: usize, seed: u64) -> Batch {
        let mut rng = seeded(seed, 0);
        let ts: Vec<Transition> = (0..m)
            .map(|_| Transition {
                obs: vec![(0..3).map(|_| rng.random_range(-1.0..1.0)).collect(); 2],
                actions: vec![[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]; 2],
                rewards: vec![rng.random_range(-1.0..1.0); 2],
                next_obs: vec![(0..3).map(|_| rng.random_range(-1.0..1.0)).collect(); 2],
                done: false,
            })
            .collect();
        Batch::from_transitions(&ts.iter().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn target_arithmetic() {
        assert!((bootstrap(1.0, 0.95, 2.0, false) - 2.9).abs() < 1e-12);
        assert_eq!(bootstrap(1.0, 0.95, 123.0, true), 1.0);
        let l = learner_with(CriticKind::Centralized, constant_critic(10, 2.0));
        let actors = [&l.target_actor, &l.target_actor];
        let y = critic_target(&l, 1.0, 0.95, &actors, &[vec![0.1; 3], vec![0.2; 3]], false).unwrap();
        assert!((y - 2.9).abs() < 1e-12);
        let y = critic_target(&l, 1.0, 0.95, &actors, &[vec![0.1; 3], vec![0.2; 3]], true).unwrap();
        assert_eq!(y, 1.0);
        assert!(critic_target(&l, 1.0, 0.0, &actors, &[vec![0.1; 3], vec![0.2; 3]], false).is_err());
    }

    #[test]
    fn noiseless_selection_is_the_actor_output() {
        let actor = Mlp::new(3, &[8], 2, OutputActivation::Tanh, &mut seeded(1, 0));
        let mu = actor.forward_one(&[0.3, -0.1, 0.7]).unwrap();
        let a = select_action(&actor, &[0.3, -0.1, 0.7], None).unwrap();
        assert_eq!(a.to_vec(), mu);
        let mut zero = NoiseProcess::new(0.0, 1.0, 3).unwrap();
        assert_eq!(select_action(&actor, &[0.3, -0.1, 0.7], Some(&mut zero)).unwrap().to_vec(), mu);
        let z = Mlp::zeros(3, &[8], 2, OutputActivation::Tanh);
        assert_eq!(select_action(&z, &[1.0, 2.0, 3.0], None).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn noise_decays_per_episode() {
        let mut n = NoiseProcess::new(0.2, 0.5, 0).unwrap();
        n.end_episode();
        assert_eq!(n.scale, 0.1);
        assert!(NoiseProcess::new(-1.0, 1.0, 0).is_err());
    }

    #[test]
    fn constant_critic_leaves_actor_unchanged() {
        let mut l = learner_with(CriticKind::Centralized, constant_critic(10, 1.5));
        let before = l.actor.clone();
        let batch = toy_batch(8, 1);
        let obj = actor_update(&mut l, &batch, &UpdateConfig::default()).unwrap();
        assert!((obj - 1.5).abs() < 1e-12);
        assert_eq!(l.actor, before);
    }

    #[test]
    fn zero_loss_critic_is_a_fixpoint() {
        // Q' = 0 and r = 0 everywhere, so y = 0 = Q for a zero critic
        let mut l = learner_with(CriticKind::Centralized, constant_critic(10, 0.0));
        let mut batch = toy_batch(8, 2);
        for r in batch.rewards.iter_mut() {
            r.iter_mut().for_each(|v| *v = 0.0);
        }
        let before = l.critic.clone();
        let next = target_actions(&[&l.target_actor, &l.target_actor], &batch).unwrap();
        let loss = critic_update(&mut l, &batch, &next, &UpdateConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(l.critic, before);
    }

    #[test]
    fn empty_batch_is_a_contract_error() {
        assert!(matches!(Batch::from_transitions(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn linear_critic_perturbation_is_exact() {
        // Q = sum_j w_j . a_j with no hidden layer
        let w = [0.0, 0.0, 0.0, 0.0, 0.3, -0.7, 1.1, 0.4];
        let layer = Dense { weight: Tensor::matrix(8, 1, w.to_vec()).unwrap(), bias: Tensor::vector(vec![0.0]) };
        let critic = Mlp::from_layers(vec![layer], OutputActivation::Linear).unwrap();
        let obs = vec![vec![0.5, -0.5], vec![0.1, 0.2]];
        let acts = [[0.1, 0.2], [0.0, -0.3]];
        let cfg = MinimaxConfig::uniform(2, 0.05);
        let out = minimax_perturb(&critic, &obs, &acts, &cfg, 0).unwrap();
        assert_eq!(out[0], acts[0]);
        assert!((out[1][0] - (0.0 - 0.05 * 1.1)).abs() < 1e-15);
        assert!((out[1][1] - (-0.3 - 0.05 * 0.4)).abs() < 1e-15);
        let none = minimax_perturb(&critic, &obs, &acts, &MinimaxConfig::uniform(2, 0.0), 0).unwrap();
        assert_eq!(none, acts.to_vec());
    }

    #[test]
    fn ddpg_requires_decentralized_critic() {
        let mut l = learner_with(CriticKind::Centralized, constant_critic(10, 0.0));
        assert!(ddpg_update(&mut l, &toy_batch(4, 0), &UpdateConfig::default()).is_err());
        let mut d = learner_with(CriticKind::Decentralized, constant_critic(5, 0.0));
        ddpg_update(&mut d, &toy_batch(4, 0), &UpdateConfig::default()).unwrap();
    }
}

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{AgentPolicy, Model};
use crate::algo::select_action;
use crate::env::{trajectory_records, EnvConfig, EnvKind, Scenario, TrajectoryRecord, World};
use crate::error::{Error, Result};
use crate::predictor::Selector;
use crate::rng::{derive_seed, seeded};

/// `sum_k gamma^k r_k` over the rewards in order.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for &r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    total
}

/// `(x - min) / (max - min)`; an all-equal list maps to zeros.
pub fn normalize_scores(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::contract("nothing to normalize"));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|x| (x - min) / (max - min)).collect())
}

/// Sum by recursive halving, independent of how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// One step of predictor output for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub episode: usize,
    pub agent: usize,
    pub t: usize,
    pub distribution: Vec<f64>,
    pub policy: usize,
}

/// Outcome of one noiseless evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub scenario: usize,
    /// Discounted return per agent.
    pub returns: Vec<f64>,
    /// `rewards[t][i]`.
    pub rewards: Vec<Vec<f64>>,
    pub predictions: Vec<PredictionTrace>,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// Runs one noiseless, update-free episode. Each agent acts from its own
/// observation only; bank agents pick their policy with their predictor at
/// every step.
pub fn execute_episode(
    policies: &[AgentPolicy],
    env: &EnvConfig,
    scenario: &Scenario,
    seed: u64,
    gamma: f64,
    record: bool,
) -> Result<EpisodeResult> {
    let n = env.num_agents();
    if policies.len() != n {
        return Err(Error::dim(format!("{} policies for {n} agents", policies.len())));
    }
    let mut rng = seeded(seed, 0);
    let mut world = World::reset(env, scenario, &mut rng)?;
    let mut selectors: Vec<Option<Selector<'_>>> = policies
        .iter()
        .map(|p| match p {
            AgentPolicy::Actor(_) => Ok(None),
            AgentPolicy::Bank { bank, predictor } => Selector::new(bank, predictor).map(Some),
        })
        .collect::<Result<_>>()?;
    let mut obs = world.observe_all();
    let mut rewards = Vec::with_capacity(env.horizon);
    let mut predictions = Vec::new();
    let mut trajectory = Vec::new();
    if record {
        trajectory.extend(trajectory_records(&world, 0, &[]));
    }
    while !world.is_done() {
        let mut actions = Vec::with_capacity(n);
        for (i, (policy, sel)) in policies.iter().zip(selectors.iter_mut()).enumerate() {
            let action = match (policy, sel) {
                (AgentPolicy::Actor(actor), _) => select_action(actor, &obs[i], None)?,
                (AgentPolicy::Bank { .. }, Some(sel)) => {
                    let s = sel.step(&obs[i])?;
                    if record {
                        predictions.push(PredictionTrace {
                            episode: 0,
                            agent: i,
                            t: world.t,
                            distribution: s.distribution,
                            policy: s.policy,
                        });
                    }
                    s.action
                }
                (AgentPolicy::Bank { .. }, None) => unreachable!("bank agents always have a selector"),
            };
            actions.push(action);
        }
        let out = world.step(&actions)?;
        if record {
            trajectory.extend(trajectory_records(&world, 0, &out.rewards));
        }
        rewards.push(out.rewards);
        obs = out.observations;
    }
    let returns = (0..n)
        .map(|i| discounted_return(&rewards.iter().map(|r| r[i]).collect::<Vec<_>>(), gamma))
        .collect();
    Ok(EpisodeResult { scenario: scenario.id, returns, rewards, predictions, trajectory })
}

/// Seed of evaluation episode `k`; assignments sharing `seed` see the same
/// scenarios and initial states.
pub fn episode_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, k as u64)
}

/// Scenario drawn (uniformly) for evaluation episode `k`.
pub fn episode_scenario(seed: u64, k: usize, count: usize) -> usize {
    seeded(episode_seed(seed, k), 1).random_range(0..count)
}

/// Mean and standard error of one side of one assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideStats {
    pub mean: f64,
    pub stderr: f64,
}

fn side_stats(values: &[f64]) -> SideStats {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let stderr = if values.len() > 1 { (pairwise_sum(&sq) / (n - 1.0)).sqrt() / n.sqrt() } else { 0.0 };
    SideStats { mean, stderr }
}

/// Aggregate over one role assignment, either overall (`scenario: None`)
/// or for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub cooperators: String,
    pub adversaries: Option<String>,
    pub scenario: Option<usize>,
    pub episodes: usize,
    /// Per-episode return averaged over the cooperating agents.
    pub cooperator: SideStats,
    pub adversary: Option<SideStats>,
}

/// Per-team summary across all assignments it took part in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamScore {
    pub team: String,
    pub cooperator_mean: f64,
    pub cooperator_normalized: f64,
    pub adversary_mean: Option<f64>,
    pub adversary_normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env: EnvKind,
    pub episodes_per_assignment: usize,
    pub records: Vec<EvalRecord>,
    pub scores: Vec<TeamScore>,
}

impl EvalReport {
    /// Overall record of an assignment.
    pub fn overall(&self, cooperators: &str, adversaries: Option<&str>) -> Option<&EvalRecord> {
        self.records
            .iter()
            .find(|r| r.scenario.is_none() && r.cooperators == cooperators && r.adversaries.as_deref() == adversaries)
    }

    pub fn score(&self, team: &str) -> Option<&TeamScore> {
        self.scores.iter().find(|s| s.team == team)
    }
}

/// Per-episode summary of one assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentEpisode {
    pub scenario: usize,
    pub cooperator: f64,
    pub adversary: Option<f64>,
    pub predictions: Vec<PredictionTrace>,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// A named set of execution policies for every agent slot of an
/// environment.
#[derive(Debug, Clone)]
pub struct Team {
    pub name: String,
    pub env: EnvConfig,
    pub gamma: f64,
    pub catalog: Vec<Scenario>,
    pub policies: Vec<AgentPolicy>,
}

impl Team {
    pub fn from_model(name: impl Into<String>, model: &Model) -> Result<Self> {
        Ok(Team {
            name: name.into(),
            env: model.config.env.clone(),
            gamma: model.config.gamma,
            catalog: model.catalog(),
            policies: model.policies()?,
        })
    }
}

/// Evaluates `coop` on the cooperating side and `adv` (if any) on the
/// adversary side for `episodes` episodes, in parallel.
pub fn run_assignment(
    coop: &Team,
    adv: Option<&Team>,
    episodes: usize,
    seed: u64,
    record: bool,
) -> Result<Vec<AssignmentEpisode>> {
    let env = &coop.env;
    if let Some(a) = adv {
        if a.env != *env || a.catalog != coop.catalog {
            return Err(Error::config(format!("teams '{}' and '{}' were trained on different environments", coop.name, a.name)));
        }
    }
    let split = env.cooperators;
    let policies: Vec<AgentPolicy> = (0..env.num_agents())
        .map(|i| match adv {
            Some(a) if i >= split => a.policies[i].clone(),
            _ => coop.policies[i].clone(),
        })
        .collect();
    let catalog = &coop.catalog;
    (0..episodes)
        .into_par_iter()
        .map(|k| {
            let c = episode_scenario(seed, k, catalog.len());
            let mut res = execute_episode(&policies, env, &catalog[c], episode_seed(seed, k), coop.gamma, record)?;
            let coop_mean = pairwise_sum(&res.returns[..split]) / split as f64;
            let adv_mean = (env.adversaries > 0)
                .then(|| pairwise_sum(&res.returns[split..]) / env.adversaries as f64);
            for p in &mut res.predictions {
                p.episode = k;
            }
            for r in &mut res.trajectory {
                r.episode = k;
            }
            Ok(AssignmentEpisode {
                scenario: c,
                cooperator: coop_mean,
                adversary: adv_mean,
                predictions: res.predictions,
                trajectory: res.trajectory,
            })
        })
        .collect()
}

fn summarize(coop: &str, adv: Option<&str>, scenarios: usize, eps: &[AssignmentEpisode]) -> Vec<EvalRecord> {
    let make = |scenario: Option<usize>| {
        let chosen: Vec<&AssignmentEpisode> =
            eps.iter().filter(|e| scenario.is_none_or(|c| e.scenario == c)).collect();
        if chosen.is_empty() {
            return None;
        }
        let coop_vals: Vec<f64> = chosen.iter().map(|e| e.cooperator).collect();
        let adv_vals: Option<Vec<f64>> = chosen.iter().map(|e| e.adversary).collect();
        Some(EvalRecord {
            cooperators: coop.to_string(),
            adversaries: adv.map(str::to_string),
            scenario,
            episodes: chosen.len(),
            cooperator: side_stats(&coop_vals),
            adversary: adv_vals.map(|v| side_stats(&v)),
        })
    };
    std::iter::once(None).chain((0..scenarios).map(Some)).filter_map(make).collect()
}

/// Full round-robin tournament. In mixed environments every ordered pair of
/// teams (self-play included) is evaluated with the first as cooperators, so
/// each pair is seen in both role assignments; in cooperative navigation
/// each team is evaluated alone. All assignments share episode seeds.
pub fn tournament(teams: &[Team], episodes: usize, seed: u64) -> Result<EvalReport> {
    let Some(first) = teams.first() else {
        return Err(Error::config("no teams to evaluate"));
    };
    if episodes == 0 {
        return Err(Error::config("episodes must be > 0"));
    }
    let kind = first.env.kind;
    let scenarios = first.catalog.len();
    let mut records = Vec::new();
    if kind.is_mixed() {
        for a in teams {
            for b in teams {
                let eps = run_assignment(a, Some(b), episodes, seed, false)?;
                records.extend(summarize(&a.name, Some(&b.name), scenarios, &eps));
            }
        }
    } else {
        for a in teams {
            let eps = run_assignment(a, None, episodes, seed, false)?;
            records.extend(summarize(&a.name, None, scenarios, &eps));
        }
    }
    let scores = team_scores(teams, &records)?;
    Ok(EvalReport { env: kind, episodes_per_assignment: episodes, records, scores })
}

fn team_scores(teams: &[Team], records: &[EvalRecord]) -> Result<Vec<TeamScore>> {
    let overall: Vec<&EvalRecord> = records.iter().filter(|r| r.scenario.is_none()).collect();
    let mean_of = |vals: Vec<f64>| pairwise_sum(&vals) / vals.len() as f64;
    let coop: Vec<f64> = teams
        .iter()
        .map(|t| mean_of(overall.iter().filter(|r| r.cooperators == t.name).map(|r| r.cooperator.mean).collect()))
        .collect();
    let adv: Option<Vec<f64>> = teams
        .iter()
        .map(|t| {
            let vals: Vec<f64> = overall
                .iter()
                .filter(|r| r.adversaries.as_deref() == Some(t.name.as_str()))
                .filter_map(|r| r.adversary.as_ref().map(|s| s.mean))
                .collect();
            (!vals.is_empty()).then(|| mean_of(vals))
        })
        .collect();
    let coop_norm = normalize_scores(&coop)?;
    let adv_norm = adv.as_ref().map(|a| normalize_scores(a)).transpose()?;
    Ok(teams
        .iter()
        .enumerate()
        .map(|(k, t)| TeamScore {
            team: t.name.clone(),
            cooperator_mean: coop[k],
            cooperator_normalized: coop_norm[k],
            adversary_mean: adv.as_ref().map(|a| a[k]),
            adversary_normalized: adv_norm.as_ref().map(|a| a[k]),
        })
        .collect())
}

/// Cross-play of two trained models: both role assignments in mixed
/// environments, each team alone in cooperative navigation.
pub fn cross_play(a: &Model, b: &Model, episodes: usize, seed: u64) -> Result<EvalReport> {
    if a.config.env != b.config.env {
        return Err(Error::config("checkpoints were trained on different environments"));
    }
    let name = |m: &Model, tag: &str| format!("{}-{tag}", m.method());
    let teams = [Team::from_model(name(a, "a"), a)?, Team::from_model(name(b, "b"), b)?];
    if a.config.env.kind.is_mixed() {
        let mut records = Vec::new();
        let scenarios = teams[0].catalog.len();
        for (x, y) in [(0, 1), (1, 0)] {
            let eps = run_assignment(&teams[x], Some(&teams[y]), episodes, seed, false)?;
            records.extend(summarize(&teams[x].name, Some(&teams[y].name), scenarios, &eps));
        }
        let scores = team_scores(&teams, &records)?;
        Ok(EvalReport { env: a.config.env.kind, episodes_per_assignment: episodes, records, scores })
    } else {
        tournament(&teams, episodes, seed)
    }
}

/// Evaluates one model against itself (or alone in cooperative navigation).
/// Returns the report with the per-episode details of the assignment.
pub fn evaluate(model: &Model, episodes: usize, seed: u64, record: bool) -> Result<(EvalReport, Vec<AssignmentEpisode>)> {
    if episodes == 0 {
        return Err(Error::config("episodes must be > 0"));
    }
    let team = Team::from_model(model.method().name(), model)?;
    let adv = model.config.env.kind.is_mixed().then_some(&team);
    let eps = run_assignment(&team, adv, episodes, seed, record)?;
    let records = summarize(&team.name, adv.map(|t| t.name.as_str()), team.catalog.len(), &eps);
    let scores = team_scores(std::slice::from_ref(&team), &records)?;
    Ok((EvalReport { env: model.config.env.kind, episodes_per_assignment: episodes, records, scores }, eps))
}

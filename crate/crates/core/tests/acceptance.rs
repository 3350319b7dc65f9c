//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.
//! Positional arguments filter criteria by name substring; flags are ignored.

mod common;

use std::time::{Duration, Instant};

use common::{chi_square_uniform, fd_check, random_transition, random_vec, rng, FD_TOLERANCE};
use marl_core::algo::{
    actor_objective, actor_objective_grads, bootstrap, critic_loss_and_grads, target_actions, AgentLearner, Batch,
    CriticKind, UpdateConfig,
};
use marl_core::env::{scenario_catalog, Action, EnvConfig, EnvKind, Role, World};
use marl_core::harness::{evaluate, moving_average, team_rewards, Method, Trainer, TrainerConfig};
use marl_core::nn::{
    lstm_step, mlp_forward, soft_update, Adam, AdamConfig, LstmCell, Mlp, OutputActivation, Tape, Tensor,
};
use marl_core::predictor::{predictor_update, selection_accuracy, PredictorNet};
use marl_core::replay::{EpisodeLabel, PredictorBuffer, Transition, TransitionBuffer};
use rand::Rng;

const GRADIENT_COORDS: usize = 120;
const GRADIENT_BUDGET: Duration = Duration::from_secs(60);
const ANCHOR_TOLERANCE: f64 = 1e-9;
const REFLECTION_TOLERANCE: f64 = 1e-9;
const CAP_TOLERANCE: f64 = 1e-12;
const PREDICTOR_TARGET: f64 = 0.90;
const PREDICTOR_EPISODES: usize = 2000;
const PREDICTOR_BUDGET: Duration = Duration::from_secs(300);
const DESK_SEEDS: [u64; 3] = [1, 2, 3];
const DESK_EPISODES: usize = 5000;
const DESK_EVAL_EPISODES: usize = 1000;
const DESK_BUDGET: Duration = Duration::from_secs(45 * 60);
/// Smoothing window and final segment, as fractions of the run.
const CURVE_FRACTION: f64 = 0.10;
/// Relative distance from the peak that separates "held" from "degraded".
const PEAK_MARGIN: f64 = 0.05;
const RESUME_AT: usize = 100;
const RESUME_AFTER: usize = 120;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut worst: Vec<(&str, f64)> = Vec::new();

    let mut r = rng(1);
    let actor = Mlp::standard(12, 2, OutputActivation::Tanh, &mut r);
    let input = Tensor::matrix(8, 12, random_vec(&mut r, 96, 1.0)).unwrap();
    let weights = Tensor::matrix(8, 2, random_vec(&mut r, 16, 1.0)).unwrap();
    let loss = |net: &Mlp| -> f64 {
        let out = mlp_forward(net, &input).unwrap();
        out.data().iter().zip(weights.data()).map(|(o, w)| o * w).sum()
    };
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone()).unwrap();
    let (y, vars) = actor.record(&mut tape, x).unwrap();
    let w = tape.leaf(weights.clone()).unwrap();
    let prod = tape.mul(y, w).unwrap();
    let total = tape.sum(prod);
    let grads = vars.grads(&tape.backward(total).unwrap());
    worst.push(("actor", fd_check(&actor, &grads, GRADIENT_COORDS, 2, loss).max_rel));

    let dims = vec![EnvConfig::for_kind(EnvKind::KeepAway).obs_dim(); 4];
    let mut learner = AgentLearner::new(1, 0, CriticKind::Centralized, &dims, AdamConfig::default(), &mut rng(3)).unwrap();
    learner.target_critic = Mlp::standard(learner.critic.input_dim(), 1, OutputActivation::Linear, &mut rng(4));
    let mut br = rng(5);
    let ts: Vec<Transition> = (0..8).map(|_| random_transition(&mut br, &dims)).collect();
    let batch = Batch::from_transitions(&ts.iter().collect::<Vec<_>>()).unwrap();
    let peers: Vec<Mlp> =
        dims.iter().enumerate().map(|(j, &d)| Mlp::standard(d, 2, OutputActivation::Tanh, &mut rng(10 + j as u64))).collect();
    let next = target_actions(&peers.iter().collect::<Vec<_>>(), &batch).unwrap();
    let cfg = UpdateConfig::default();
    let (_, grads) = critic_loss_and_grads(&learner, &batch, &next, &cfg).unwrap();
    let report = fd_check(&learner.critic, &grads, GRADIENT_COORDS, 6, |critic: &Mlp| {
        let mut probe = learner.clone();
        probe.critic = critic.clone();
        critic_loss_and_grads(&probe, &batch, &next, &cfg).unwrap().0
    });
    worst.push(("critic", report.max_rel));

    let (_, grads) = actor_objective_grads(&learner, &batch).unwrap();
    let report = fd_check(&learner.actor, &grads, GRADIENT_COORDS, 7, |a: &Mlp| {
        let mut probe = learner.clone();
        probe.actor = a.clone();
        actor_objective(&probe, &batch).unwrap()
    });
    worst.push(("actor through critic", report.max_rel));

    let mut r = rng(8);
    let net = PredictorNet::new(10, 3, &mut r);
    let eps: Vec<EpisodeLabel> = (0..4)
        .map(|i| EpisodeLabel { history: (0..5).map(|_| random_vec(&mut r, 10, 1.5)).collect(), label: i % 3 })
        .collect();
    let refs: Vec<&EpisodeLabel> = eps.iter().collect();
    let (_, grads) = net.loss_and_grads(&refs).unwrap();
    let report = fd_check(&net, &grads, GRADIENT_COORDS, 9, |p: &PredictorNet| p.loss_and_grads(&refs).unwrap().0);
    worst.push(("lstm predictor", report.max_rel));

    let elapsed = start.elapsed();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(
        max < FD_TOLERANCE && elapsed < GRADIENT_BUDGET,
        format!("{GRADIENT_COORDS} coordinates each: {detail}; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn analytic_anchors() -> Outcome {
    let steps = 25;
    let net = PredictorNet::zeros(9, 3);
    let mut r = rng(20);
    let eps: Vec<EpisodeLabel> = (0..6)
        .map(|i| EpisodeLabel { history: (0..steps).map(|_| random_vec(&mut r, 9, 2.0)).collect(), label: i % 3 })
        .collect();
    let (ce, _) = net.loss_and_grads(&eps.iter().collect::<Vec<_>>()).unwrap();
    let ce_err = (ce - steps as f64 * 3f64.ln()).abs();

    let cell = LstmCell::zeros(4, 6);
    let x = Tensor::matrix(1, 4, vec![0.3, -1.0, 2.0, 0.1]).unwrap();
    let (h, _) = lstm_step(&cell, &x, &Tensor::zeros(&[1, 6]), &Tensor::zeros(&[1, 6])).unwrap();
    let h_zero = h.data().iter().all(|&v| v == 0.0);

    let source = Mlp::standard(5, 2, OutputActivation::Tanh, &mut r);
    let mut target = Mlp::standard(5, 2, OutputActivation::Tanh, &mut r);
    soft_update(&mut target, &source, 1.0).unwrap();
    let copied = target == source;

    let y = bootstrap(1.0, 0.95, 2.0, false);
    let y_err = (y - 2.9).abs();

    check(
        ce_err < ANCHOR_TOLERANCE && h_zero && copied && y_err < ANCHOR_TOLERANCE,
        format!("|CE - 25 ln 3| {ce_err:.1e}, zero-cell h = 0: {h_zero}, tau=1 copy: {copied}, y = {y}"),
    )
}

fn random_actions(r: &mut impl Rng, n: usize, bound: f64) -> Vec<Action> {
    (0..n).map(|_| [r.random_range(-bound..bound), r.random_range(-bound..bound)]).collect()
}

fn trajectory_bits(kind: EnvKind, scenario: usize, seed: u64) -> Vec<u64> {
    let config = EnvConfig { horizon: 1000, ..EnvConfig::for_kind(kind) };
    let mut world = World::reset(&config, &scenario_catalog(kind)[scenario], &mut rng(seed)).unwrap();
    let mut acts = rng(seed + 1);
    let mut bits = Vec::new();
    while !world.is_done() {
        let out = world.step(&random_actions(&mut acts, config.num_agents(), 1.2)).unwrap();
        bits.extend(out.rewards.iter().map(|v| v.to_bits()));
        bits.extend(world.entities.iter().flat_map(|e| [e.pos[0], e.pos[1], e.vel[0], e.vel[1]]).map(f64::to_bits));
    }
    bits
}

fn physics_invariants() -> Outcome {
    let mut failures = Vec::new();
    for kind in [EnvKind::KeepAway, EnvKind::PredatorPrey, EnvKind::CoopNav] {
        for scenario in 0..3 {
            if trajectory_bits(kind, scenario, 40 + scenario as u64) != trajectory_bits(kind, scenario, 40 + scenario as u64) {
                failures.push(format!("{kind} scenario {scenario} not deterministic"));
            }
        }
    }

    let calm = scenario_catalog(EnvKind::CoopNav)[0].clone();
    for seed in 0..50 {
        let config = EnvConfig { horizon: 200, ..EnvConfig::coop_nav(1, 1 + seed as usize % 3) };
        let mut world = World::reset(&config, &calm, &mut rng(seed)).unwrap();
        let mut r = rng(seed + 1000);
        world.entities[0].vel = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        let mut energy = world.kinetic_energy();
        while !world.is_done() {
            world.step(&[[0.0, 0.0]]).unwrap();
            if world.kinetic_energy() > energy {
                failures.push(format!("energy rose at seed {seed}"));
                break;
            }
            energy = world.kinetic_energy();
        }
    }

    let cat = scenario_catalog(EnvKind::KeepAway);
    let config = EnvConfig::for_kind(EnvKind::KeepAway);
    let mut reflection: f64 = 0.0;
    for seed in 0..50 {
        let mut sw = World::reset(&config, &cat[1], &mut rng(seed)).unwrap();
        let mut ne = sw.clone();
        ne.scenario = cat[2].clone();
        for e in ne.entities.iter_mut() {
            e.pos = [-e.pos[0], -e.pos[1]];
        }
        let mut r = rng(seed + 2000);
        while !sw.is_done() {
            let a = random_actions(&mut r, 4, 1.0);
            let mirrored: Vec<Action> = a.iter().map(|u| [-u[0], -u[1]]).collect();
            let oa = sw.step(&a).unwrap();
            let ob = ne.step(&mirrored).unwrap();
            for (ea, eb) in sw.entities.iter().zip(&ne.entities) {
                for d in 0..2 {
                    reflection = reflection.max((ea.pos[d] + eb.pos[d]).abs()).max((ea.vel[d] + eb.vel[d]).abs());
                }
            }
            for (ra, rb) in oa.rewards.iter().zip(&ob.rewards) {
                reflection = reflection.max((ra - rb).abs());
            }
        }
    }
    if reflection > REFLECTION_TOLERANCE {
        failures.push(format!("reflection error {reflection:.1e}"));
    }

    let caps = [(3.0, 3.9), (2.0, 2.6), (3.0, 3.9)];
    let kind = EnvKind::PredatorPrey;
    let mut excess = f64::NEG_INFINITY;
    for (scenario, cap) in caps.iter().enumerate() {
        for seed in 0..30 {
            let config = EnvConfig { horizon: 100, ..EnvConfig::for_kind(kind) };
            let mut world = World::reset(&config, &scenario_catalog(kind)[scenario], &mut rng(seed)).unwrap();
            let mut r = rng(seed + 3000);
            while !world.is_done() {
                world.step(&random_actions(&mut r, 6, 4.0)).unwrap();
                for e in &world.entities {
                    let limit = match e.role {
                        Role::Cooperator => cap.0,
                        Role::Adversary => cap.1,
                        _ => continue,
                    };
                    excess = excess.max((e.vel[0] * e.vel[0] + e.vel[1] * e.vel[1]).sqrt() - limit);
                }
            }
        }
    }
    if excess > CAP_TOLERANCE {
        failures.push(format!("speed cap exceeded by {excess:.1e}"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("9 bit-identical 1000-step runs, 50 decay runs, reflection error {reflection:.1e}, max cap excess {excess:.1e}")
        } else {
            failures.join("; ")
        },
    )
}

/// Agent 0's observations in keep-away under random actions; the label is the scenario.
fn wind_stream(scenario: usize, seed: u64) -> EpisodeLabel {
    let config = EnvConfig::for_kind(EnvKind::KeepAway);
    let mut world = World::reset(&config, &scenario_catalog(EnvKind::KeepAway)[scenario], &mut rng(seed)).unwrap();
    let mut r = rng(seed ^ 0x9e37_79b9);
    let mut history = Vec::new();
    while !world.is_done() {
        let out = world.step(&random_actions(&mut r, config.num_agents(), 1.0)).unwrap();
        history.push(out.observations[0].clone());
    }
    EpisodeLabel { history, label: scenario }
}

fn predictor_classification() -> Outcome {
    let start = Instant::now();
    let mut buffer = PredictorBuffer::new(PREDICTOR_EPISODES, 0);
    for k in 0..PREDICTOR_EPISODES {
        buffer.push(wind_stream(k % 3, k as u64));
    }
    let held_out: Vec<EpisodeLabel> = (0..300).map(|k| wind_stream(k % 3, 1_000_000 + k as u64)).collect();
    let held_refs: Vec<&EpisodeLabel> = held_out.iter().collect();
    let obs_dim = buffer.get(0).unwrap().history[0].len();
    let mut net = PredictorNet::new(obs_dim, 3, &mut rng(30));
    let mut opt = Adam::new(&net, AdamConfig::default());
    let mut r = rng(31);
    for _ in 0..4000 {
        let batch = buffer.sample(16, &mut r).unwrap();
        predictor_update(&mut net, &mut opt, &batch, Some(0.5)).unwrap();
    }
    // steps t >= 5 counted from t = 1
    let acc = selection_accuracy(&net, &held_refs, 4).unwrap();
    let elapsed = start.elapsed();
    check(
        acc >= PREDICTOR_TARGET && elapsed < PREDICTOR_BUDGET,
        format!(
            "held-out accuracy at t >= 5 {acc:.3} (target {PREDICTOR_TARGET}) after {PREDICTOR_EPISODES} episodes; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn desk_config(method: Method, seed: u64) -> TrainerConfig {
    TrainerConfig {
        method,
        seed,
        episodes: DESK_EPISODES,
        batch_size: 256,
        warmup: 1024,
        update_every: 5,
        predictor_every: 25,
        predictor_batch: 16,
        eval_episodes: DESK_EVAL_EPISODES,
        env: EnvConfig::coop_nav(2, 2),
        ..TrainerConfig::default()
    }
}

struct DeskRun {
    eval: f64,
    curve: Vec<f64>,
}

fn desk_run(method: Method, seed: u64) -> DeskRun {
    let config = desk_config(method, seed);
    let mut trainer = Trainer::new(&config).unwrap();
    let rows = trainer.run().unwrap();
    let (report, _) = evaluate(&trainer.model, DESK_EVAL_EPISODES, 0, false).unwrap();
    let per_scenario: Vec<f64> =
        report.records.iter().filter(|r| r.scenario.is_some()).map(|r| r.cooperator.mean).collect();
    DeskRun {
        eval: per_scenario.iter().sum::<f64>() / per_scenario.len() as f64,
        curve: team_rewards(&rows, config.env.cooperators),
    }
}

/// (peak of the smoothed curve, mean of the smoothed curve over the final segment).
fn peak_and_final(curve: &[f64]) -> (f64, f64) {
    let w = ((curve.len() as f64 * CURVE_FRACTION) as usize).max(1);
    let smooth = &moving_average(curve, w)[w - 1..];
    let peak = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail = &smooth[smooth.len() - w..];
    (peak, tail.iter().sum::<f64>() / tail.len() as f64)
}

fn desk_runs() -> (Vec<[DeskRun; 4]>, Duration) {
    let start = Instant::now();
    let runs = DESK_SEEDS
        .iter()
        .map(|&seed| Method::ALL.map(|m| desk_run(m, seed)))
        .collect();
    (runs, start.elapsed())
}

fn method_index(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).unwrap()
}

fn bank_beats_baselines(runs: &[[DeskRun; 4]], elapsed: Duration) -> Outcome {
    let (pa, ma, m3) = (method_index(Method::Pamaddpg), method_index(Method::Maddpg), method_index(Method::M3ddpg));
    let mut wins = 0;
    let mut detail = Vec::new();
    for (seed, run) in DESK_SEEDS.iter().zip(runs) {
        let win = run[pa].eval >= run[ma].eval && run[pa].eval >= run[m3].eval;
        wins += win as usize;
        detail.push(format!(
            "seed {seed}: PA {:.2} MA {:.2} M3 {:.2}{}",
            run[pa].eval,
            run[ma].eval,
            run[m3].eval,
            if win { " win" } else { "" }
        ));
    }
    check(
        wins >= 2 && elapsed < DESK_BUDGET,
        format!("{wins}/3 seeds; {}; {:.0}s", detail.join(", "), elapsed.as_secs_f64()),
    )
}

fn ddpg_degrades(runs: &[[DeskRun; 4]]) -> Outcome {
    let (pa, dd) = (method_index(Method::Pamaddpg), method_index(Method::Ddpg));
    let mut hits = 0;
    let mut detail = Vec::new();
    for (seed, run) in DESK_SEEDS.iter().zip(runs) {
        let (dpeak, dfinal) = peak_and_final(&run[dd].curve);
        let (ppeak, pfinal) = peak_and_final(&run[pa].curve);
        let degraded = dpeak - dfinal > PEAK_MARGIN * dpeak.abs();
        let held = ppeak - pfinal <= PEAK_MARGIN * ppeak.abs();
        hits += (degraded && held) as usize;
        detail.push(format!(
            "seed {seed}: DDPG peak {dpeak:.2} final {dfinal:.2}, PA peak {ppeak:.2} final {pfinal:.2}"
        ));
    }
    check(hits >= 2, format!("{hits}/3 seeds; {}", detail.join(", ")))
}

fn tagged(i: usize) -> Transition {
    Transition {
        obs: vec![vec![i as f64]],
        actions: vec![[0.0, 0.0]],
        rewards: vec![i as f64],
        next_obs: vec![vec![0.0]],
        done: false,
    }
}

fn replay_statistics() -> Outcome {
    let items = 10;
    let draws = 100_000;
    let mut buf = TransitionBuffer::new(items, 0, vec![1]);
    for i in 0..items {
        buf.push(tagged(i)).unwrap();
    }
    let mut counts = vec![0u64; items];
    for t in buf.sample(draws, &mut rng(50)).unwrap() {
        counts[t.rewards[0] as usize] += 1;
    }
    let dof = (items - 1) as f64;
    let chi2 = chi_square_uniform(&counts);
    let chi_ok = chi2 < dof + 3.0 * (2.0 * dof).sqrt();

    let mut fifo_ok = true;
    for capacity in 1..=6 {
        for pushes in 0..=3 * capacity + 1 {
            let mut buf = TransitionBuffer::new(capacity, 0, vec![1]);
            for i in 0..pushes {
                buf.push(tagged(i)).unwrap();
            }
            let got: Vec<usize> = buf.iter().map(|t| t.rewards[0] as usize).collect();
            fifo_ok &= got == (pushes.saturating_sub(capacity)..pushes).collect::<Vec<_>>();
        }
    }
    check(chi_ok && fifo_ok, format!("chi-square {chi2:.2} (9 dof, 3 sigma bound {:.2}), FIFO exhaustive to capacity 6: {fifo_ok}", dof + 3.0 * (2.0 * dof).sqrt()))
}

fn checkpoint_bisimulation() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for method in Method::ALL {
        let config = TrainerConfig {
            method,
            seed: 60,
            episodes: RESUME_AT + RESUME_AFTER,
            batch_size: 32,
            warmup: 64,
            update_every: 5,
            predictor_batch: 4,
            env: EnvConfig::coop_nav(2, 2),
            ..TrainerConfig::default()
        };
        let full = Trainer::new(&config).unwrap().run().unwrap();
        let mut first = Trainer::new(&config).unwrap();
        first.run_until(RESUME_AT, |_| Ok(())).unwrap();
        let bytes = first.checkpoint();
        drop(first);
        let rest = Trainer::from_checkpoint(&bytes).unwrap().run().unwrap();
        let n = config.env.num_agents();
        let same = rest.len() == RESUME_AFTER * n && rest == full[RESUME_AT * n..];
        ok &= same;
        detail.push(format!("{method} {}", if same { "identical" } else { "diverged" }));
    }
    check(ok, format!("{RESUME_AFTER} episodes after resuming at {RESUME_AT}: {}", detail.join(", ")))
}

fn report(name: &str, outcome: &Outcome) {
    match outcome {
        Ok(d) => println!("PASS {name}: {d}"),
        Err(d) => println!("FAIL {name}: {d}"),
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut failed = 0;
    let mut run = |name: &str, f: &dyn Fn() -> Outcome| {
        if wanted(name) {
            let outcome = f();
            report(name, &outcome);
            failed += outcome.is_err() as usize;
        }
    };
    run("gradient_suite", &gradient_suite);
    run("analytic_anchors", &analytic_anchors);
    run("physics_invariants", &physics_invariants);
    run("predictor_classification", &predictor_classification);
    if wanted("bank_beats_baselines") || wanted("ddpg_degrades") {
        let (runs, elapsed) = desk_runs();
        run("bank_beats_baselines", &|| bank_beats_baselines(&runs, elapsed));
        run("ddpg_degrades", &|| ddpg_degrades(&runs));
    }
    run("replay_statistics", &replay_statistics);
    run("checkpoint_bisimulation", &checkpoint_bisimulation);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

mod common;

use common::rng;
use marl_core::env::{scenario_catalog, Action, EnvConfig, EnvKind, Role, World};
use proptest::prelude::*;
use rand::Rng;

fn actions(r: &mut impl Rng, n: usize, bound: f64) -> Vec<Action> {
    (0..n).map(|_| [r.random_range(-bound..bound), r.random_range(-bound..bound)]).collect()
}

fn state_bits(w: &World) -> Vec<u64> {
    w.entities.iter().flat_map(|e| [e.pos[0], e.pos[1], e.vel[0], e.vel[1]]).map(f64::to_bits).collect()
}

fn run(kind: EnvKind, scenario: usize, seed: u64, steps: usize) -> (Vec<Vec<u64>>, Vec<u64>) {
    let config = EnvConfig { horizon: steps, ..EnvConfig::for_kind(kind) };
    let scenario = scenario_catalog(kind)[scenario].clone();
    let mut world = World::reset(&config, &scenario, &mut rng(seed)).unwrap();
    let mut acts = rng(seed ^ 0xa5a5);
    let mut states = vec![state_bits(&world)];
    let mut outputs = Vec::new();
    while !world.is_done() {
        let out = world.step(&actions(&mut acts, config.num_agents(), 1.2)).unwrap();
        outputs.extend(out.rewards.iter().map(|r| r.to_bits()));
        outputs.extend(out.observations.iter().flatten().map(|o| o.to_bits()));
        assert!(out.observations.iter().all(|o| o.len() == config.obs_dim()));
        states.push(state_bits(&world));
    }
    (states, outputs)
}

#[test]
fn thousand_step_trajectories_are_bit_deterministic() {
    for kind in [EnvKind::KeepAway, EnvKind::PredatorPrey, EnvKind::CoopNav] {
        for scenario in 0..3 {
            let a = run(kind, scenario, 77 + scenario as u64, 1000);
            let b = run(kind, scenario, 77 + scenario as u64, 1000);
            assert_eq!(a.0.len(), 1001);
            assert!(a == b, "{kind} scenario {scenario} diverged");
        }
    }
}

/// Observation length from the entity counts alone.
fn documented_obs_dim(kind: EnvKind, n: usize, m: usize, l: usize) -> usize {
    let others = n + m - 1;
    4 + 2 * l + 2 * others + if kind == EnvKind::PredatorPrey { 2 * others } else { 0 }
}

#[test]
fn observation_width_follows_entity_counts() {
    for kind in [EnvKind::KeepAway, EnvKind::PredatorPrey, EnvKind::CoopNav] {
        let c = EnvConfig::for_kind(kind);
        assert_eq!(c.obs_dim(), documented_obs_dim(kind, c.cooperators, c.adversaries, c.landmarks));
    }
    let c = EnvConfig::coop_nav(2, 2);
    assert_eq!(c.obs_dim(), documented_obs_dim(EnvKind::CoopNav, 2, 0, 2));
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn seeded_trajectories_repeat(seed in any::<u64>(), scenario in 0usize..3, kind in 0usize..3) {
        let kind = [EnvKind::KeepAway, EnvKind::PredatorPrey, EnvKind::CoopNav][kind];
        prop_assert!(run(kind, scenario, seed, 60) == run(kind, scenario, seed, 60));
    }

    #[test]
    fn energy_never_increases_without_contacts(
        seed in any::<u64>(),
        landmarks in 1usize..4,
        vx in -3.0f64..3.0,
        vy in -3.0f64..3.0,
    ) {
        let config = EnvConfig { horizon: 200, ..EnvConfig::coop_nav(1, landmarks) };
        let calm = scenario_catalog(EnvKind::CoopNav)[0].clone();
        let mut world = World::reset(&config, &calm, &mut rng(seed)).unwrap();
        world.entities[0].vel = [vx, vy];
        let mut energy = world.kinetic_energy();
        while !world.is_done() {
            world.step(&[[0.0, 0.0]]).unwrap();
            let next = world.kinetic_energy();
            prop_assert!(next <= energy, "energy rose from {} to {}", energy, next);
            energy = next;
        }
    }

    #[test]
    fn energy_never_increases_for_non_colliding_teams(seed in any::<u64>(), speed in 0.0f64..2.0) {
        let config = EnvConfig { horizon: 100, ..EnvConfig::for_kind(EnvKind::KeepAway) };
        let calm = scenario_catalog(EnvKind::KeepAway)[0].clone();
        let mut world = World::reset(&config, &calm, &mut rng(seed)).unwrap();
        let mut r = rng(seed.wrapping_add(1));
        for e in world.entities.iter_mut() {
            e.collide = false;
            if e.movable {
                e.vel = [r.random_range(-speed..=speed), r.random_range(-speed..=speed)];
            }
        }
        let mut energy = world.kinetic_energy();
        while !world.is_done() {
            world.step(&[[0.0, 0.0]; 4]).unwrap();
            let next = world.kinetic_energy();
            prop_assert!(next <= energy);
            energy = next;
        }
    }

    #[test]
    fn keep_away_winds_are_point_reflections(seed in any::<u64>()) {
        let kind = EnvKind::KeepAway;
        let cat = scenario_catalog(kind);
        let config = EnvConfig::for_kind(kind);
        let mut south_west = World::reset(&config, &cat[1], &mut rng(seed)).unwrap();
        let mut north_east = south_west.clone();
        north_east.scenario = cat[2].clone();
        for e in north_east.entities.iter_mut() {
            e.pos = [-e.pos[0], -e.pos[1]];
            e.vel = [-e.vel[0], -e.vel[1]];
        }
        let mut r = rng(seed ^ 0x5eed);
        while !south_west.is_done() {
            let a = actions(&mut r, 4, 1.0);
            let mirrored: Vec<Action> = a.iter().map(|u| [-u[0], -u[1]]).collect();
            let out_a = south_west.step(&a).unwrap();
            let out_b = north_east.step(&mirrored).unwrap();
            for (ea, eb) in south_west.entities.iter().zip(&north_east.entities) {
                for d in 0..2 {
                    prop_assert!((ea.pos[d] + eb.pos[d]).abs() <= 1e-9);
                    prop_assert!((ea.vel[d] + eb.vel[d]).abs() <= 1e-9);
                }
            }
            for (ra, rb) in out_a.rewards.iter().zip(&out_b.rewards) {
                prop_assert!((ra - rb).abs() <= 1e-9);
            }
            for (oa, ob) in out_a.observations.iter().zip(&out_b.observations) {
                for (x, y) in oa.iter().zip(ob) {
                    prop_assert!((x + y).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn predator_prey_speeds_respect_their_caps(seed in any::<u64>(), scenario in 0usize..3, bound in 0.5f64..4.0) {
        // (cooperator cap, adversary cap) per scenario
        let caps = [(3.0, 3.9), (2.0, 2.6), (3.0, 3.9)][scenario];
        let kind = EnvKind::PredatorPrey;
        let config = EnvConfig { horizon: 100, ..EnvConfig::for_kind(kind) };
        let mut world = World::reset(&config, &scenario_catalog(kind)[scenario], &mut rng(seed)).unwrap();
        let mut r = rng(seed ^ 0xcafe);
        while !world.is_done() {
            world.step(&actions(&mut r, 6, bound)).unwrap();
            for e in &world.entities {
                let cap = match e.role {
                    Role::Cooperator => caps.0,
                    Role::Adversary => caps.1,
                    _ => continue,
                };
                let speed = (e.vel[0] * e.vel[0] + e.vel[1] * e.vel[1]).sqrt();
                prop_assert!(speed <= cap + 1e-12, "speed {} above cap {}", speed, cap);
            }
        }
    }
}

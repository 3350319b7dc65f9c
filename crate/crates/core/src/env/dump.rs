use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Vec2, World};
use crate::error::Result;

/// One line of a trajectory dump: the state of one entity after step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub scenario: usize,
    pub t: usize,
    pub entity: usize,
    pub pos: Vec2,
    pub vel: Vec2,
    /// Reward received at this step (agents only).
    pub reward: Option<f64>,
}

/// Records for every entity of `world`, tagging agents with `rewards`.
pub fn trajectory_records(world: &World, episode: usize, rewards: &[f64]) -> Vec<TrajectoryRecord> {
    world
        .entities
        .iter()
        .enumerate()
        .map(|(k, e)| TrajectoryRecord {
            episode,
            scenario: world.scenario.id,
            t: world.t,
            entity: k,
            pos: e.pos,
            vel: e.vel,
            reward: rewards.get(k).copied(),
        })
        .collect()
}

/// Writes serializable records as line-delimited JSON.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

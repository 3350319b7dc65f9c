use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::error::Result;

/// Header of the per-episode metrics CSV.
pub const METRICS_HEADER: &str =
    "episode,method,scenario,agent,return,critic_loss,actor_loss,predictor_loss,predictor_accuracy";

/// One row of the training metrics: one agent in one episode. Losses are
/// means over the update rounds of the episode and absent when none ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub method: Method,
    pub scenario: usize,
    pub agent: usize,
    /// Undiscounted sum of the agent's rewards over the episode.
    #[serde(rename = "return")]
    pub ret: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub predictor_loss: Option<f64>,
    pub predictor_accuracy: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl EpisodeMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:?},{},{},{},{}",
            self.episode,
            self.method,
            self.scenario,
            self.agent,
            self.ret,
            cell(self.critic_loss),
            cell(self.actor_loss),
            cell(self.predictor_loss),
            cell(self.predictor_accuracy)
        )
    }
}

/// Writes rows as CSV (with header) to `out`.
pub fn write_csv<W: Write>(mut out: W, rows: &[EpisodeMetrics]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Team reward per episode (mean over cooperating agents), in episode order.
pub fn team_rewards(rows: &[EpisodeMetrics], cooperators: usize) -> Vec<f64> {
    let mut out: Vec<(usize, f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.agent < cooperators) {
        match out.last_mut() {
            Some(last) if last.0 == r.episode => {
                last.1 += r.ret;
                last.2 += 1;
            }
            _ => out.push((r.episode, r.ret, 1)),
        }
    }
    out.into_iter().map(|(_, s, n)| s / n as f64).collect()
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        acc += x;
        if k >= w {
            acc -= xs[k - w];
        }
        out.push(acc / (k + 1).min(w) as f64);
    }
    out
}

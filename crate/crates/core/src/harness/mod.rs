//! Training drivers, evaluation, checkpoints and metrics.
//!
//! * PAMADDPG trains one learner per (scenario, policy) slot in sequential
//!   scenario phases, feeding every episode's observation history to the
//!   per-agent predictor buffers.
//! * MADDPG and M3DDPG train one centralized learner per agent on scenarios
//!   drawn uniformly per episode; M3DDPG perturbs the other agents' actions
//!   toward the worst case in both the critic target and the actor objective.
//! * DDPG trains decentralized critics on the same schedule as MADDPG.

mod checkpoint;
mod config;
mod eval;
mod metrics;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Method, TrainerConfig};
pub use eval::{
    cross_play, discounted_return, episode_scenario, episode_seed, evaluate, execute_episode, normalize_scores,
    pairwise_sum, run_assignment, tournament, AssignmentEpisode, EpisodeResult, EvalRecord, EvalReport,
    PredictionTrace, SideStats, Team, TeamScore,
};
pub use metrics::{moving_average, team_rewards, write_csv, EpisodeMetrics, METRICS_HEADER};
pub use train::{train, AgentPolicy, Model, Trainer, TrainingState};

//! Off-policy training: replay, AdamW, SAC, DDPG, Polyak targets, replay
//! ratio and periodic resets.
//!
//! Policies act in `[-1, 1]^|A|`; the replay buffer and the critic input use
//! environment-unit actions.

mod agent;
mod buffer;
mod config;
mod losses;
mod optim;
mod trainer;

pub use agent::{check_batch, role_seed, Agent, Capture, DdpgAgent, Learner, SacAgent, UpdateInfo};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use config::{Algo, NetConfig, TrainConfig};
pub use losses::{
    critic_loss, ddpg_actor_loss, ddpg_target, q_forward, sac_actor_loss, sac_target, td_target, temperature_loss,
    Bounds, SacTargetInputs,
};
pub use optim::{adamw_step, polyak_update, AdamW, OptimizerState};
pub use trainer::{train_loop, MetricsRow, Probe, Trainer, METRICS_HEADER};

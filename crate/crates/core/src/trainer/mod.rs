//! PPO-clip over smoothed environments.

mod config;
mod gae;
mod ppo;
mod rollout;
mod train;

pub use config::PpoConfig;
pub use gae::{compute_gae, normalize_advantages};
pub use ppo::{clip_grad_norm, ppo_loss, ppo_update, LossOutput, Minibatch, UpdateDiagnostics};
pub use rollout::{collect_rollout, ActionScaler, ObsNormalizer, RewardScaler, RolloutBatch, RolloutCursor};
pub use train::{evaluate, train, CurvePoint, EvalEpisode, TrainOutput, Trainer};

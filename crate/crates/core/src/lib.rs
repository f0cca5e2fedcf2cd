//! Action-smoothness regularization for reinforcement learning.
//!
//! The crate bundles everything needed to study higher-order derivative
//! penalties on policy outputs:
//!
//! - [`smoothing`]: action-history augmentation and velocity / acceleration /
//!   jerk penalties, plus an environment wrapper that applies them.
//! - [`metrics`]: jerk standard deviation, total variation, equipment
//!   switching counts and cross-seed summaries.
//! - [`envs`]: a 2-D point tracker and the two-zone "DollHouse" HVAC model.
//! - [`sysid`]: sparse identification (STLSQ) of the DollHouse dynamics.
//! - [`nn`]: a small MLP with a reverse-mode tape, Gaussian policy and Adam.
//! - [`trainer`]: PPO-clip with GAE.
//! - [`harness`]: experiment sweeps, result tables and artifact files.

pub mod error;
pub mod types;
pub mod rng;
pub mod trajectory;
pub mod smoothing;
pub mod metrics;
pub mod envs;
pub mod sysid;
pub mod nn;
pub mod trainer;
pub mod harness;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use types::{ActionVector, EnvState, Trajectory, Transition};

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

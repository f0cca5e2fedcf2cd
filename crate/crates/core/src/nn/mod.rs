//! Small dense networks with hand-rolled reverse-mode differentiation.

mod adam;
mod checkpoint;
mod mat;
mod mlp;
mod policy;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use mat::Mat;
pub use mlp::{MlpLayout, MlpParams, DEFAULT_HIDDEN};
pub use policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use tape::{Gradients, Tape, Var};

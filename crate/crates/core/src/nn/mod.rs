//! Feed-forward networks, gradients, Adam and checkpoint persistence.

pub mod adam;
pub mod checkpoint;
pub mod critic;
pub mod mlp;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest};
pub use critic::{Critic, CriticCache, CriticGrads};
pub use mlp::{Activation, Dense, Mlp, MlpCache, MlpGrads, FINAL_LAYER_INIT};

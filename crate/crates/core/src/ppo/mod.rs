//! Proximal policy optimization with a small shared-trunk actor-critic.

pub mod adam;
pub mod checkpoint;
pub mod gae;
pub mod gaussian;
pub mod loss;
pub mod network;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use loss::{CapsMode, LossBatch, LossConfig, LossTerms};
pub use network::{Layout, PolicyParams};
pub use trainer::{mean_action, IterationStats, PpoTrainer, RolloutBuffer, TrainConfig, UpdateStats};

//! Actor-critic networks and PPO training.

pub mod checkpoint;
pub mod net;
pub mod ppo;
pub mod train;

pub use net::{Arch, FeatureSpec, Features, Network};
pub use ppo::{gae, ppo_update, sample_action, ActorCritic, PpoConfig, PpoDiagnostics, PpoOptimizer, RolloutBuffer};
pub use train::{train, CurveRow, TrainConfig, TrainOutcome};

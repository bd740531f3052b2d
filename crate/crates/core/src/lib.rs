//! Active landmark localization with a differentiable field of view.
//!
//! The crate bundles the pieces needed to train and evaluate
//! information-seeking control policies: FoV geometry, a diagonal
//! information filter, episodic environments, attention-based PPO, an
//! open-loop gradient planner baseline, and the experiment front end.

pub mod belief;
pub mod env;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fov;
pub mod icr;
pub mod policy;

pub use error::{Error, Result};

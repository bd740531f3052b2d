//! Tape-based reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The primitive set is deliberately small: it covers the actor-critic
//! networks (affine layers, attention, 2-D convolution), the Gaussian policy
//! head, the clipped PPO objective, and the smoothed field-of-view weights.
//! Shapes never broadcast except for bias rows in [`Tape::affine`] and a shared
//! `log_std` row in [`Tape::gaussian_log_prob`]; mismatches panic with both
//! shapes in the message.
//!
//! ```
//! use infogain_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
//! let sq = tape.mul(x, x);
//! let loss = tape.reduce_sum(sq, None);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0, 6.0]);
//! ```

pub mod special;
mod tape;
mod tensor;

pub use tape::{Gradients, Padding, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("backward needs a single-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("backward already ran on this tape; call reset() first")]
    AlreadyConsumed,
}

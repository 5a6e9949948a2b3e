//! Rooted losses and the machinery to study them.
//!
//! The crate centers on a family of convex surrogate losses obtained by
//! taking the k-th root of an exponentiated base loss: the rooted logistic
//! objective for binary margins and its rooted cross-entropy counterpart for
//! softmax classifiers. Rooting reshapes curvature, so alongside the loss
//! values and gradients this crate ships exact per-point Hessian
//! coefficients, a conditioning report that compares them against the
//! plain logistic loss, dense symmetric eigensolves for condition numbers,
//! and enough plumbing (datasets, gradient descent, small MLPs, a toy GAN
//! value) to reproduce the experiments in the companion benchmark crate.
//!
//! Everything is deterministic given a seed: random draws go through
//! [`rand_chacha::ChaCha8Rng`] and reductions use fixed summation orders.

pub mod calculus;
pub mod dataset;
pub mod error;
pub mod gan;
pub mod loss;
pub mod models;
pub mod numeric;
pub mod optim;

pub use error::{Error, Result};
pub use loss::LossSpec;

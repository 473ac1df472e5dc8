//! Certified latent-space guidance for deep generative trajectory planners.
//!
//! Given a small trained generator (GAN-style MLP or an unrolled deterministic
//! DDIM diffusion chain) and a signal-temporal-logic property, this crate
//! finds disjoint latent hyper-rectangles whose images are formally verified
//! to satisfy the property, then samples from the original standard-normal
//! latent distribution truncated to their union. Every emitted plan satisfies
//! the property by construction.
//!
//! The pipeline, bottom to top:
//!
//! - [`tensor`] / [`graph`]: dense `f64` tensors and a computation graph
//!   shared by forward evaluation, reverse-mode differentiation, and bound
//!   propagation.
//! - [`stl`]: STL formulas, Boolean and quantitative (robustness) monitors,
//!   and lowering of robustness to a computation graph.
//! - [`generators`] / [`training`]: conditional GAN and DDIM generators built
//!   as graphs, with from-scratch WGAN / denoising-loss training.
//! - [`verifier`]: interval bound propagation and backward linear relaxation
//!   over latent boxes.
//! - [`certifier`]: pivot search by gradient ascent plus iterative box
//!   expansion into a disjoint certified region set.
//! - [`latent`]: the truncated-normal mixture over certified boxes —
//!   log-space box probabilities, sampling, densities.
//! - [`tasks`] / [`eval`]: planning environments with a minimal PRM data
//!   generator, and the evaluation harness (acceptance ratios,
//!   log-likelihoods, figure export).

pub mod certifier;
pub mod error;
pub mod eval;
pub mod generators;
pub mod graph;
pub mod latent;
pub mod rng;
pub mod special;
pub mod stl;
pub mod tasks;
pub mod tensor;
pub mod training;
pub mod verifier;

pub use error::{Error, Result};
pub use graph::ComputationGraph;
pub use tensor::Tensor;

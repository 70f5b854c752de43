//! Online Wasserstein GAN test generation for requirement falsification.
//!
//! The crate trains a generative test generator for black-box systems whose
//! outputs are sampled signals and whose requirements are bounded-time STL
//! formulas, and ships the metrics used to judge such generators (quantile
//! scores, cluster diversity, tournament ranking, falsification rate).
//!
//! Layout:
//! - [`signals`]: signals, input normalization, STL parsing and robustness.
//! - [`neural`]: a small double-precision autodiff kernel with the layers and
//!   optimizer the models need, including double backprop.
//! - [`models`]: generator, critic and analyzer networks and their training steps.
//! - [`online`]: the online training loop, test repository, quantile sampler and
//!   analyzer-guided rejection sampling.
//! - [`suts`]: the system-under-test abstraction and built-in synthetic systems.
//! - [`eval`]: similarity, clustering, diversity, quantile scores and ranking.
//! - [`campaign`]: replicated experiments, persistence and reports (feature `campaign`).

pub mod eval;
pub mod models;
pub mod neural;
pub mod online;
pub mod rng;
pub mod signals;
pub mod suts;

#[cfg(feature = "campaign")]
pub mod campaign;

pub(crate) mod stopwatch;

/// A test: a point of the normalized input box `[-1, 1]^D`.
pub type Test = Vec<f64>;

//! Bayesian inference for time-evolving partial orders from rank-order lists.
//!
//! A hidden partial order h^(t) over the actors active in year t evolves
//! through a latent Gaussian state-space model: each actor carries a K-vector
//! "authority" series U_j^(t) following a stationary VAR(1) process, statuses
//! are Z_j^(t) = U_j^(t) + 1_K beta_{s(t,j)} with a per-actor covariate level
//! s(t,j), and i outranks j exactly when Z_i dominates Z_j in every component.
//! Observed rank lists are noisy linear extensions of the suborder on the
//! list's members: with probability p a position is filled uniformly at
//! random ("queue jumping"), otherwise by a count-weighted draw among the
//! order's admissible candidates.
//!
//! ```text
//! state:  rho (feature correlation), theta (serial correlation), p (noise),
//!         U (authorities), beta (covariate effects), tau (list dates)
//! data:   lists y_i with date intervals [tau-_i, tau+_i]
//! model:  y_i | h^(tau_i)[o_i], p  ~  queue-jumping list law
//! ```
//!
//! Modules follow the inference pipeline: [`pipeline`] ingests and registers
//! the data, [`poset`] supplies exact order combinatorics, [`latent`] the
//! state-space prior, [`obsmodel`] the list likelihoods, [`sampler`] the
//! Metropolis-Hastings machinery, [`summaries`] posterior reductions and
//! Bayes factors, [`plackett`] the Plackett-Luce baselines with model
//! comparison, and [`synth`] synthetic-data generation.

pub mod error;
pub mod latent;
pub mod obsmodel;
pub mod pipeline;
pub mod plackett;
pub mod poset;
pub mod sampler;
pub mod summaries;
pub mod synth;

pub use error::{Error, Result};

/// Actor identifier: small non-negative integer, unique within a dataset.
pub type ActorId = u32;

/// Calendar year (integers CE; synthetic data may use any integer grid).
pub type Year = i32;

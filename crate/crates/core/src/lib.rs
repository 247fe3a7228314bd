//! Variational approximation of reference priors.
//!
//! Priors are represented implicitly as pushforwards `θ = g(λ, ε)` of a
//! Gaussian latent variable through a small neural network, and `λ` is
//! fitted by stochastic gradient ascent on a generalized mutual information
//! between θ and simulated data. The crate also provides constrained
//! fitting, latent-space posterior sampling and the reference quantities
//! needed to check fitted priors against known Jeffreys priors.

// `!(x > 0.0)` is used on purpose so that NaN is rejected; index loops
// mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod divergences;
pub mod error;
pub mod evaluation;
pub mod objectives;
pub mod optimizer;
pub mod posterior_mh;
pub mod pushforward;
pub mod rng;
pub mod runner;
pub mod special;
pub mod stat_models;

pub use error::{Error, Result};

//! Bayesian linear regression and gamma GLMs with heavy-tailed error laws.
//!
//! The crate provides the building blocks for studying how posterior
//! distributions react when a subset of observations is dragged towards
//! infinity (or towards zero, for positive-response GLMs):
//!
//! * [`special`] — log-gamma, regularized incomplete gamma, normal CDF and
//!   quantile, implemented from scratch with tight accuracy contracts;
//! * [`density`] — standardized error densities (normal, Student-t,
//!   log-Pareto-tailed normal) and a gamma density with log-Pareto tails for
//!   multiplicative models, together with their tail classifications;
//! * [`model`] — datasets, outlier paths, priors, and the joint log-posterior
//!   in the `(beta, log sigma^2)` parameterization with analytic gradients;
//! * [`conjugate`] — exact normal-inverse-gamma posterior and marginal
//!   likelihood for the normal-error model;
//! * [`sampler`] — a deterministic Hamiltonian Monte Carlo engine with
//!   dual-averaging step-size adaptation and effective-sample-size
//!   diagnostics;
//! * [`marginal`] — adaptive quadrature for marginal likelihoods and the
//!   large-outlier ratio that quantifies convergence to the
//!   outlier-discarding posterior.

// Reference constants are frozen at full precision even where f64 rounds
// the trailing digits; `!(x > 0.0)` is used deliberately so that NaN takes
// the rejection branch.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugate;
pub mod density;
pub mod error;
pub mod marginal;
pub mod model;
pub mod quad;
pub mod sampler;
pub mod special;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

//! Stopping strategies for the last-success problem with randomly timed
//! Bernoulli trials.
//!
//! The number of trials `N` follows a negative binomial prior NB(ν, q) (the
//! logarithmic-series prior at ν = 0), trials arrive at the epochs of a mixed
//! binomial process on [0, 1], and the k-th trial succeeds with probability
//! θ/(θ+k-1). The crate computes the myopic strategy's critical roots and
//! cutoffs, exact winning probabilities for monotone cutoff strategies, the
//! optimal value function of the embedded Markov process, and provides a
//! seeded Monte Carlo engine that independently verifies all of it.
//!
//! Module map:
//! - [`special`]: the 2F1 kernel, digamma, and allied special functions;
//! - [`quad`]: Gauss-Legendre and adaptive Simpson quadrature;
//! - [`fixed_n`]: the known-N problem (`s0`/`s1`, optimal threshold);
//! - [`model`]: the prior, posterior laws and birth-process rates;
//! - [`strategy`]: adapted rewards W0/W1, critical roots, cutoff profiles;
//! - [`winprob`]: exact winning probability of monotone cutoff strategies;
//! - [`value`]: value function of the unified Markov formulation;
//! - [`sim`]: reproducible Monte Carlo simulation;
//! - [`gof`]: chi-square goodness-of-fit helpers used by the verification
//!   suites.

pub mod error;
pub mod fixed_n;
pub mod gof;
pub mod model;
pub mod quad;
pub mod sim;
pub mod special;
pub mod strategy;
pub mod value;
pub mod winprob;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use strategy::{CutoffProfile, Monotonicity, StrategySpec};

//! Bayesian estimation of structural vector autoregressions whose shocks
//! follow independent skewed generalized t distributions.
//!
//! Non-Gaussian, independent shocks pin down the impact matrix up to column
//! permutation and sign, so no zero or sign restrictions are needed. The
//! crate covers the density ([`sgt`]), reduced-form VAR tools ([`var`]),
//! priors ([`prior`]), the likelihood and posterior ([`posterior`]), a
//! differential evolution MCMC sampler ([`demc`]), normalization and shock
//! labeling ([`identification`]), impulse responses ([`irf`]), data
//! ingestion ([`data`]) and the config-driven pipeline behind the CLI
//! ([`runner`]).

pub mod data;
pub mod demc;
pub mod error;
pub mod identification;
pub mod irf;
pub mod posterior;
pub mod prior;
pub mod runner;
pub mod sgt;
pub mod var;

pub use error::{Error, Result};

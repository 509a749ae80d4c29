//! Monte Carlo models for telling skill apart from luck.
//!
//! The crate is organised bottom-up:
//!
//! - [`stats`]: seeded substreams, rank correlation and Gini.
//! - [`population`]: moment-parameterised lognormal populations and the
//!   multiplicative (Shockley) productivity model.
//! - [`gbm`]: geometric Brownian motion success paths, realized statistics and
//!   the characteristic time at which skill and luck contribute equally.
//! - [`vetting`]: decile studies ranking agents on raw outcome or realized
//!   Sharpe ratio, vetting-period sweeps and the optimal-allocation decile.
//! - [`growth`]: Simon and Gibrat proportional-growth simulators with tail and
//!   concentration diagnostics.
//! - [`aggregator`]: pooled vs compartmentalized content ranking.
//!
//! Every simulator is a pure function of its inputs and a master seed. Random
//! draws are taken from per-entity substreams ([`stats::RngStream`]), so results
//! do not depend on the number of threads.

pub mod aggregator;
pub mod error;
pub mod gbm;
pub mod growth;
pub mod population;
pub mod stats;
pub mod vetting;

pub use error::{Error, Result};

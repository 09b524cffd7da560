//! Bayesian optimisation with uncertain inputs.
//!
//! Gaussian-process surrogates that accept Gaussian-distributed input
//! locations ([`gp`]), acquisition functions over querying distributions
//! ([`acquisition`]), a terrain-roughness exploration simulator ([`sim`])
//! and the episode/benchmark harness comparing standard, unscented and
//! uncertain-input BO ([`driver`]).

pub mod acquisition;
pub mod artifacts;
pub mod config;
pub mod driver;
pub mod error;
pub mod gp;
pub mod replay;
pub mod selftest;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};

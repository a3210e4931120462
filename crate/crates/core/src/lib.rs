//! Exact small-scale open-system simulation and pointer-state selection.
//!
//! * [`qcore`]: complex linear algebra, states and partial traces.
//! * [`dynamics`]: exact evolution of factorized system–environment models,
//!   purity series, Schmidt spectra and power-iteration pointer estimates.
//! * [`sieve`]: short-time purity law, the canonical purity sieve and the
//!   dispersion-integral sieve under mean-field system dynamics.
//! * [`oscillator`]: the Gaussian-moment analysis of a trapped particle
//!   coupled to a bath of trapped particles.
//! * [`cli`]: configuration and runners for the command-line experiments.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod optim;
pub mod oscillator;
pub mod qcore;
pub mod sieve;

pub use error::{Error, Result};

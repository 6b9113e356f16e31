//! Simulation of two-time-scale stochastic evolution equations in spectral
//! form, driven by cylindrical alpha-stable noise and modulated either by a
//! fast Markov chain or by a fast stable-driven component, together with the
//! tools to check that the slow component follows its averaged equation.
//!
//! The crate is organised bottom-up:
//!
//! - [`stable`]: symmetric stable variates, cylindrical increments, and the
//!   exact scale of mode-wise stochastic convolutions.
//! - [`spectral`]: diagonal operators, semigroup and fractional powers,
//!   summability checks.
//! - [`markov`]: two-time-scale generators, stationary laws, aggregation,
//!   exact chain simulation.
//! - [`engine`]: exponential-Euler steppers for the mild form.
//! - [`averaging`]: averaged drifts and ergodic estimators.
//! - [`harness`]: experiment configuration, coupled epsilon sweeps, output.

pub mod averaging;
pub mod drift;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod harness;
pub mod markov;
pub mod rng;
pub mod spectral;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
pub use field::FieldState;
pub use rng::{Channel, RngStream, StreamKey};

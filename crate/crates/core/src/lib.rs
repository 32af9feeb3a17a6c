//! Pulse synthesis and simulation for bosonic networks driven by
//! time-dependent, excitation-conserving quadratic Hamiltonians.
//!
//! The pipeline is: parameter [`curves`] → ancillary frame ([`ancillary`]) →
//! laboratory pulses ([`synthesis`]) → dynamics ([`fock`], [`evolve`]) →
//! observables ([`metrics`]). [`experiment`] wires it together for the
//! command-line runner.

pub mod ancillary;
pub mod curves;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod fock;
pub mod linalg;
pub mod metrics;
pub mod quad;
pub mod synthesis;

pub use error::{Error, Result};

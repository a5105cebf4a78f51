//! Two-stage remote entanglement between a superconducting qubit and a
//! distant magnon mode: invariant-based local transfer, then waveguide
//! state transfer between two magnon modes.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod tensor;

pub use error::{Error, Result};

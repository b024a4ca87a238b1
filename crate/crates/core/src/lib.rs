//! Core algorithms for discovering compact quantum circuits that prepare
//! SYK-model thermal states.
//!
//! The crate is organized in layers:
//!
//! * [`rng`], [`linalg`], [`pauli`]: deterministic random numbers, dense
//!   complex linear algebra, and Pauli-string arithmetic.
//! * [`syk`], [`thermal`]: sampling of SYK Hamiltonians under a Jordan-Wigner
//!   encoding, and exact Gibbs-state references obtained by dense
//!   diagonalization.
//! * [`backend`], [`vqtsp`], [`optim`]: statevector and density-matrix
//!   simulation, the two-circuit variational thermal-state protocol, and the
//!   derivative-free optimizer it uses.
//! * [`codec`], [`env`], [`nn`], [`agent`]: the circuit/tensor encoding, the
//!   gate-placement environment, a self-contained neural-network stack, and
//!   the double-DQN trainer.
//! * [`analysis`], [`stats`]: candidate filtering, CNOT-cost benchmarking
//!   against Trotterization, curve fitting, and confidence bands.
//!
//! Everything here is `no_std + alloc` and fully deterministic given the
//! seeds recorded in configuration. IO, file formats, and the command-line
//! driver live in the companion `sykrl` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod analysis;
pub mod backend;
pub mod codec;
pub mod env;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod pauli;
pub mod rng;
pub mod stats;
pub mod syk;
pub mod thermal;
pub mod vqtsp;

pub use error::{Error, Result};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

//! Controllability and observability analysis of finite-dimensional Hamiltonian
//! quantum systems under semiclassical and fully coherent (quantum) feedback
//! controllers, with exact density-matrix simulation of both control paradigms.
//!
//! The crate is organized around five layers:
//!
//! - [`operators`]: dense complex matrices, tensor-product spaces, commutators,
//!   Hilbert-Schmidt geometry, Hermitian matrix exponentials, partial traces.
//! - [`lie`]: the commutator-generated operator algebra of a control system and
//!   the five controllability/observability verdicts derived from its rank.
//! - [`state`]: density-matrix states, unitary evolution, projective
//!   non-demolition measurement with Born statistics, and state metrics
//!   (fidelity, purity, entanglement entropy).
//! - [`protocol`]: a step language for feedback protocols, exhaustive and
//!   Monte-Carlo executors, the built-in spin examples, and the
//!   entangled-probe state-transfer verifier.
//! - [`pulse`]: lab-frame integration of the driven two-spin Hamiltonian,
//!   validating that resonant selective pulses realize the ideal conditional
//!   flips used at the gate level.

pub mod error;
pub mod lie;
pub mod operators;
pub mod protocol;
pub mod pulse;
pub mod state;

pub use error::{Error, Result};

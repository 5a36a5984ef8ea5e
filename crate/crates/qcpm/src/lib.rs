//! Classical emulator and validation suite for central-path annealing on
//! linear optimization problems.
//!
//! The crate embeds a primal-dual LP pair into a skew-symmetric self-dual
//! system, follows its central path classically, builds the associated
//! potential field and harmonic ground-state model, emulates the annealing
//! Schrödinger evolution with a split-step spectral propagator on a
//! truncated periodic grid, samples approximate optima from the final
//! state, and cross-checks every step against independent brute-force
//! oracles. A constants-mode resource estimator turns the run-cost
//! formulas into concrete numbers.

pub mod error;
pub mod estimator;
pub mod hamiltonian;
pub mod lo;
pub mod oracle;
pub mod path;
pub mod pipeline;
pub mod qsim;
pub mod report;
pub mod schedule;
pub mod validate;

pub use error::{Error, Result};

// re-exported so downstream binaries share the same linear-algebra types
pub use nalgebra;

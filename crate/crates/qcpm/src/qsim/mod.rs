//! Grid discretization of the box domain, wave-function storage, and the
//! split-step spectral propagator for the annealing evolution.

mod evolve;
mod grid;
mod wave;

pub use evolve::{
    evolve, evolve_frozen, suggest_steps, Checkpoint, PropagatorConfig, PropagatorRun,
    DEFAULT_CHECKPOINTS,
};
pub use grid::{build_grid, Grid, DEFAULT_MARGIN_SIGMAS, DEFAULT_MEMORY_BUDGET};
pub use wave::{initial_state, gaussian_on_grid, WaveFunction};

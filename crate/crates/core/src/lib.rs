//! Simulation of phenotype-structured cell populations whose density
//! `n(t, x, y)` is transported down the gradient of the local cell density,
//! grows according to a density-dependent fitness and diffuses in the trait
//! variable.
//!
//! The crate provides the implicit finite-volume splitting scheme
//! ([`solver`]), the observables used to characterise the resulting fronts
//! ([`diagnostics`]), randomized property suites ([`verify`]) and the
//! command-line driver ([`cli`]).

pub mod cli;
pub mod diagnostics;
pub mod grid;
pub mod model;
pub mod solver;
pub mod verify;

pub use grid::{compute_rho, total_mass, DensityField, Grid, RhoProfile};
pub use model::{initial_density, InitialProfile, ModelSpec, Profile, RunConfig, SolverTolerances};
pub use solver::{run, RunObserver, RunSummary, Scheme, SolverError, StepReport};

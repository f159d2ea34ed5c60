//! Simulation and analysis of the Kuramoto model with inertia.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: state, parameters, right-hand side, potential.
//! - [`integrator`]: fixed-step RK4 / semi-implicit Euler and trajectories.
//! - [`observables`]: order parameters, energies, diameters, the frequency functional.
//! - [`sync`]: sufficient-condition checks, lock classification, decay fits.
//! - [`meanfield`]: empirical measures, Wasserstein-2, sampling and kinetic experiments.
//! - [`cli`]: the configuration schema and the `kuramoto` command line driver.

pub mod cli;
pub mod error;
pub mod integrator;
pub mod meanfield;
pub mod model;
pub mod observables;
pub mod sync;

pub use error::{Error, Result};
pub use model::{Capacity, ModelParams, ModelVariant, OscillatorEnsemble, StateDerivative};
pub use integrator::{simulate, simulate_with, step, IntegratorConfig, Scheme, Trajectory};

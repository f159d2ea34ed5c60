//! Empirical measures on the cylinder `T × R` and the kinetic experiments.
//!
//! The kinetic equation is never discretized on a grid. Every measure here is
//! the push-forward of an empirical initial measure along the particle flow,
//! so the particle integrator doubles as the characteristic solver.

mod assignment;
mod experiments;
mod sampling;
mod stability;
mod wasserstein;

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::OscillatorEnsemble;

pub use assignment::{solve_assignment, Assignment};
pub use experiments::{
    kinetic_sync_experiment, kinetic_sync_from_state, meanfield_convergence_experiment,
    theorem36_bound, ConvergenceOptions, ConvergenceReport, ConvergenceRow, ConvergenceSummary,
    InequalityCheck, KineticParams, KineticSyncOptions, KineticSyncReport, SupportMonitor,
    Theorem36Check,
};
pub use sampling::{sample_initial, InitialDistribution};
pub use stability::{
    epsilon_energy, stability_experiment, stability_hypotheses, EpsilonEnergyReport,
    StabilityHypotheses, StabilityOptions, StabilityReport,
};
pub use wasserstein::{
    w2_sq_1d_sorted, wasserstein2, wasserstein2_auto, SlicedProjector, W2Estimate, W2Method,
    W2Options, DEFAULT_PROJECTIONS, DEFAULT_SLICE_SEED, EXACT_CAP,
};

/// Equally weighted atoms `(θ, ω)` with `θ ∈ [0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<(f64, f64)>,
}

fn wrap_to_tau(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty);
        }
        for (index, &(t, w)) in atoms.iter().enumerate() {
            if !(t.is_finite() && w.is_finite()) {
                return Err(Error::NonFinite { what: "atoms", index });
            }
        }
        Ok(Self {
            atoms: atoms.into_iter().map(|(t, w)| (wrap_to_tau(t), w)).collect(),
        })
    }

    pub fn from_state(state: &OscillatorEnsemble) -> Result<Self> {
        Self::new(state.theta().iter().copied().zip(state.omega().iter().copied()).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The first `n` atoms as a measure of their own.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("prefix length must be in 1..={}, got {n}", self.len()),
            });
        }
        Ok(Self {
            atoms: self.atoms[..n].to_vec(),
        })
    }
}

/// Means of phase and frequency at time `t` for the homogeneous kinetic flow:
/// `θ̄ + m(1 − e^{−γt/m}) ω̄` and `e^{−γt/m} ω̄`.
///
/// The phase formula integrates the frequency mean only when `γ = 1`; for
/// other frictions the factor is `m/γ`.
pub fn propagation_of_averages(means: (f64, f64), m: f64, gamma: f64, t: f64) -> (f64, f64) {
    let (theta, omega) = means;
    let x = -gamma * t / m;
    (theta - m * x.exp_m1() * omega, x.exp() * omega)
}

/// `max{ω_max, mκ}`, the frequency support bound for the homogeneous kinetic flow.
pub fn support_bound(omega_max: f64, m: f64, kappa: f64) -> f64 {
    omega_max.max(m * kappa)
}

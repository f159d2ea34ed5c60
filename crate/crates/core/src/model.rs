//! State, parameters and right-hand side of the inertial Kuramoto system
//!
//! ```text
//! dθ_i/dt = ω_i
//! dω_i/dt = (−γ_i ω_i + ν_i + κ Σ_j a_ij sin(θ_j − θ_i)) / m_i
//! ```
//!
//! Phases are kept on the real line. Nothing here wraps angles; the
//! trigonometric terms are periodic so wrapping would only lose information
//! that diameters and averages rely on.

use serde::Serialize;

use crate::error::{check_finite, check_len, Error, Result};

/// Phases and frequencies of `N` oscillators.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillatorEnsemble {
    theta: Vec<f64>,
    omega: Vec<f64>,
}

impl OscillatorEnsemble {
    pub fn new(theta: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Empty);
        }
        check_len("omega", theta.len(), omega.len())?;
        check_finite("theta", &theta)?;
        check_finite("omega", &omega)?;
        Ok(Self { theta, omega })
    }

    /// All oscillators at rest with the given phases.
    pub fn at_rest(theta: Vec<f64>) -> Result<Self> {
        let n = theta.len();
        Self::new(theta, vec![0.0; n])
    }

    /// Equally spaced phases `2πj/N` (zero order parameter), at rest.
    pub fn splay(n: usize) -> Result<Self> {
        let theta = (0..n)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
            .collect();
        Self::at_rest(theta)
    }

    pub(crate) fn from_parts_unchecked(theta: Vec<f64>, omega: Vec<f64>) -> Self {
        debug_assert_eq!(theta.len(), omega.len());
        Self { theta, omega }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.theta, self.omega)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.omega).all(|v| v.is_finite())
    }

    /// Phase average θ_c and frequency average ω_c.
    pub fn means(&self) -> (f64, f64) {
        let n = self.n() as f64;
        (
            self.theta.iter().sum::<f64>() / n,
            self.omega.iter().sum::<f64>() / n,
        )
    }
}

/// Time derivative of an [`OscillatorEnsemble`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateDerivative {
    pub dtheta: Vec<f64>,
    pub domega: Vec<f64>,
}

/// Symmetric, nonnegative network weights `a_ij`.
///
/// The uniform case (every entry equal, diagonal included) is stored without
/// materializing the matrix so that large all-to-all ensembles stay O(N).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Capacity {
    Uniform { n: usize, weight: f64 },
    Dense { n: usize, entries: Vec<f64> },
}

impl Capacity {
    /// `a_ij = 1/N` for all `i, j`.
    pub fn all_to_all(n: usize) -> Self {
        Capacity::Uniform {
            n,
            weight: 1.0 / n as f64,
        }
    }

    pub fn uniform(n: usize, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "capacity",
                reason: format!("uniform weight must be finite and nonnegative, got {weight}"),
            });
        }
        Ok(Capacity::Uniform { n, weight })
    }

    /// Build from rows. Symmetry is checked for exact equality.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            check_len("capacity row", n, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::from_row_major(n, entries)
    }

    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_len("capacity entries", n * n, entries.len())?;
        check_finite("capacity", &entries)?;
        if let Some(idx) = entries.iter().position(|&a| a < 0.0) {
            return Err(Error::InvalidParameter {
                name: "capacity",
                reason: format!("negative entry at ({}, {})", idx / n, idx % n),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a_ij, a_ji) = (entries[i * n + j], entries[j * n + i]);
                if a_ij != a_ji {
                    return Err(Error::AsymmetricCapacity { i, j, a_ij, a_ji });
                }
            }
        }
        Ok(Capacity::Dense { n, entries })
    }

    pub fn n(&self) -> usize {
        match self {
            Capacity::Uniform { n, .. } | Capacity::Dense { n, .. } => *n,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Capacity::Uniform { weight, .. } => *weight,
            Capacity::Dense { n, entries } => entries[i * n + j],
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        match self {
            Capacity::Uniform { n, weight } => *n as f64 * weight,
            Capacity::Dense { n, entries } => entries[i * n..(i + 1) * n].iter().sum(),
        }
    }

    /// Largest entry, `‖A‖_∞` in the entrywise sense.
    pub fn max_entry(&self) -> f64 {
        match self {
            Capacity::Uniform { weight, .. } => *weight,
            Capacity::Dense { entries, .. } => entries.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// True when every entry equals `1/N` (up to rounding of the division).
    pub fn is_all_to_all(&self) -> bool {
        let n = self.n() as f64;
        let target = 1.0 / n;
        let close = |w: f64| (w - target).abs() <= 4.0 * f64::EPSILON * target;
        match self {
            Capacity::Uniform { weight, .. } => close(*weight),
            Capacity::Dense { entries, .. } => entries.iter().all(|&w| close(w)),
        }
    }

    /// `out_i = Σ_j a_ij x_j`.
    pub(crate) fn mat_vec(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Capacity::Uniform { weight, .. } => {
                let s = weight * x.iter().sum::<f64>();
                out.iter_mut().for_each(|o| *o = s);
            }
            Capacity::Dense { n, entries } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &entries[i * n..(i + 1) * n];
                    *o = row.iter().zip(x).map(|(a, v)| a * v).sum();
                }
            }
        }
    }
}

/// Model parameters: masses, frictions, natural frequencies, coupling and network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    masses: Vec<f64>,
    frictions: Vec<f64>,
    natural_freqs: Vec<f64>,
    kappa: f64,
    capacity: Capacity,
}

/// Which closed forms and theorems apply to a parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "tag")]
pub enum ModelVariant {
    /// Equal masses, frictions and natural frequencies with `a_ij = 1/N`.
    HomogeneousAllToAll { m: f64, gamma: f64, nu: f64 },
    HeterogeneousNetwork,
}

impl ModelParams {
    pub fn new(
        masses: Vec<f64>,
        frictions: Vec<f64>,
        natural_freqs: Vec<f64>,
        kappa: f64,
        capacity: Capacity,
    ) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        check_len("frictions", n, frictions.len())?;
        check_len("natural_freqs", n, natural_freqs.len())?;
        check_len("capacity", n, capacity.n())?;
        check_finite("masses", &masses)?;
        check_finite("frictions", &frictions)?;
        check_finite("natural_freqs", &natural_freqs)?;
        if let Some(i) = masses.iter().position(|&m| m <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "masses",
                reason: format!("m_{i} = {} must be positive", masses[i]),
            });
        }
        if let Some(i) = frictions.iter().position(|&g| g <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "frictions",
                reason: format!("gamma_{i} = {} must be positive", frictions[i]),
            });
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("must be finite and nonnegative, got {kappa}"),
            });
        }
        Ok(Self {
            masses,
            frictions,
            natural_freqs,
            kappa,
            capacity,
        })
    }

    /// Identical oscillators, `ν = 0`, `a_ij = 1/N`.
    pub fn all_to_all(n: usize, m: f64, gamma: f64, kappa: f64) -> Result<Self> {
        Self::new(
            vec![m; n],
            vec![gamma; n],
            vec![0.0; n],
            kappa,
            Capacity::all_to_all(n),
        )
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn frictions(&self) -> &[f64] {
        &self.frictions
    }
    pub fn natural_freqs(&self) -> &[f64] {
        &self.natural_freqs
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn capacity(&self) -> &Capacity {
        &self.capacity
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("must be finite and nonnegative, got {kappa}"),
            });
        }
        p.kappa = kappa;
        Ok(p)
    }

    /// Equal masses and equal frictions (network and ν arbitrary).
    pub fn uniform_inertia(&self) -> Option<(f64, f64)> {
        let m = self.masses[0];
        let g = self.frictions[0];
        let same = self.masses.iter().all(|&x| x == m) && self.frictions.iter().all(|&x| x == g);
        same.then_some((m, g))
    }

    pub fn variant(&self) -> ModelVariant {
        let nu = self.natural_freqs[0];
        match self.uniform_inertia() {
            Some((m, gamma))
                if self.natural_freqs.iter().all(|&x| x == nu) && self.capacity.is_all_to_all() =>
            {
                ModelVariant::HomogeneousAllToAll { m, gamma, nu }
            }
            _ => ModelVariant::HeterogeneousNetwork,
        }
    }

    pub(crate) fn check_state(&self, state: &OscillatorEnsemble) -> Result<()> {
        check_len("state", self.n(), state.n())
    }
}

/// Reusable buffers for the coupling kernel.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    sin: Vec<f64>,
    cos: Vec<f64>,
    a_sin: Vec<f64>,
    a_cos: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            sin: vec![0.0; n],
            cos: vec![0.0; n],
            a_sin: vec![0.0; n],
            a_cos: vec![0.0; n],
        }
    }
}

/// `out_i = κ Σ_j a_ij sin(θ_j − θ_i)`.
///
/// Expanded as `cos θ_i (A sin θ)_i − sin θ_i (A cos θ)_i`, which turns the
/// double sum into a matrix-vector product (O(N) for uniform capacity).
pub(crate) fn coupling_into(theta: &[f64], params: &ModelParams, out: &mut [f64]) {
    let mut scratch = Scratch::new(theta.len());
    coupling_with(theta, params, &mut scratch, out);
}

pub(crate) fn coupling_with(
    theta: &[f64],
    params: &ModelParams,
    s: &mut Scratch,
    out: &mut [f64],
) {
    // Angles are taken relative to θ_0 so that clustered phases give small,
    // exactly cancelling arguments.
    let reference = theta[0];
    for (i, t) in theta.iter().enumerate() {
        let (sn, cs) = (t - reference).sin_cos();
        s.sin[i] = sn;
        s.cos[i] = cs;
    }
    params.capacity.mat_vec(&s.sin, &mut s.a_sin);
    params.capacity.mat_vec(&s.cos, &mut s.a_cos);
    let k = params.kappa;
    for i in 0..theta.len() {
        out[i] = k * (s.cos[i] * s.a_sin[i] - s.sin[i] * s.a_cos[i]);
    }
}

/// `κ Σ_j a_ij sin(θ_j − θ_i)` for every `i`.
pub fn coupling(theta: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_len("theta", params.n(), theta.len())?;
    check_finite("theta", theta)?;
    let mut out = vec![0.0; theta.len()];
    coupling_into(theta, params, &mut out);
    Ok(out)
}

pub(crate) fn rhs_into(
    theta: &[f64],
    omega: &[f64],
    params: &ModelParams,
    scratch: &mut Scratch,
    dtheta: &mut [f64],
    domega: &mut [f64],
) {
    coupling_with(theta, params, scratch, domega);
    for i in 0..theta.len() {
        dtheta[i] = omega[i];
        domega[i] = (-params.frictions[i] * omega[i] + params.natural_freqs[i] + domega[i])
            / params.masses[i];
    }
}

/// Right-hand side of the first-order system.
pub fn rhs(state: &OscillatorEnsemble, params: &ModelParams) -> Result<StateDerivative> {
    params.check_state(state)?;
    check_finite("theta", state.theta())?;
    check_finite("omega", state.omega())?;
    let n = state.n();
    let mut dtheta = vec![0.0; n];
    let mut domega = vec![0.0; n];
    rhs_into(
        state.theta(),
        state.omega(),
        params,
        &mut Scratch::new(n),
        &mut dtheta,
        &mut domega,
    );
    Ok(StateDerivative { dtheta, domega })
}

/// `r_i = ν_i + κ Σ_j a_ij sin(θ_j − θ_i)`; zero at an equilibrium (with ω = 0).
pub fn equilibrium_residual(theta: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let mut r = coupling(theta, params)?;
    for (ri, nu) in r.iter_mut().zip(params.natural_freqs()) {
        *ri += nu;
    }
    Ok(r)
}

/// `V(Θ) = −Σ ν_j θ_j + (κ/2) Σ_ij a_ij (1 − cos(θ_i − θ_j))`.
pub fn potential(theta: &[f64], params: &ModelParams) -> Result<f64> {
    check_len("theta", params.n(), theta.len())?;
    check_finite("theta", theta)?;
    let drift: f64 = params
        .natural_freqs()
        .iter()
        .zip(theta)
        .map(|(nu, t)| nu * t)
        .sum();
    Ok(-drift + params.kappa() * 0.5 * weighted_one_minus_cos(theta, params.capacity()))
}

/// `Σ_ij a_ij (1 − cos(θ_i − θ_j))`, evaluated as `2 sin²(Δ/2)` to avoid
/// cancellation near synchrony.
pub(crate) fn weighted_one_minus_cos(theta: &[f64], capacity: &Capacity) -> f64 {
    let n = theta.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let h = (0.5 * (theta[i] - theta[j])).sin();
            row += capacity.get(i, j) * 2.0 * h * h;
        }
        total += row;
    }
    total
}

/// `∇V(Θ)`, the exact negation of [`equilibrium_residual`].
pub fn grad_potential(theta: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    Ok(equilibrium_residual(theta, params)?
        .into_iter()
        .map(|r| -r)
        .collect())
}

/// Move to the frame where `θ_c = ω_c = 0`.
///
/// Only valid for equal masses and frictions, where the mean dynamics has a
/// closed form that decouples from the relative motion.
pub fn comoving_shift(
    state: &OscillatorEnsemble,
    params: &ModelParams,
) -> Result<OscillatorEnsemble> {
    params.check_state(state)?;
    if params.uniform_inertia().is_none() {
        return Err(Error::WrongVariant {
            required: "uniform inertia and friction",
        });
    }
    let (tc, wc) = state.means();
    Ok(OscillatorEnsemble::from_parts_unchecked(
        state.theta().iter().map(|t| t - tc).collect(),
        state.omega().iter().map(|w| w - wc).collect(),
    ))
}

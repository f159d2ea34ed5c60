//! Fixed-step time integration and recorded trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rhs_into, ModelParams, OscillatorEnsemble, Scratch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    SemiImplicitEuler,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 10.0,
            sample_every: 1,
            scheme: Scheme::Rk4,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, sample_every: usize, scheme: Scheme) -> Result<Self> {
        let c = Self {
            dt,
            t_final,
            sample_every,
            scheme,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive and finite, got {}", self.dt),
            });
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_final",
                reason: format!("must be nonnegative and finite, got {}", self.t_final),
            });
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter {
                name: "sample_every",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_final]`: full steps plus at most one short one.
    ///
    /// Ratios within a few ulps of an integer count as exact so that
    /// `t_final = k·dt` never produces a spurious sliver step.
    pub fn step_plan(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            return (nearest as usize, 0.0);
        }
        let full = ratio.floor() as usize;
        (full, self.t_final - full as f64 * self.dt)
    }

    pub fn total_steps(&self) -> usize {
        let (full, tail) = self.step_plan();
        full + usize::from(tail > 0.0)
    }
}

/// Sampled solution of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<OscillatorEnsemble>,
    params: ModelParams,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<OscillatorEnsemble>, params: ModelParams) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Empty);
        }
        crate::error::check_len("states", times.len(), states.len())?;
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "must start at 0".into(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "must be strictly increasing".into(),
            });
        }
        for s in &states {
            params.check_state(s)?;
        }
        Ok(Self {
            times,
            states,
            params,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[OscillatorEnsemble] {
        &self.states
    }
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn final_state(&self) -> &OscillatorEnsemble {
        self.states.last().expect("trajectory is never empty")
    }
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }
    pub fn iter(&self) -> impl Iterator<Item = (f64, &OscillatorEnsemble)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

/// Preallocated stage buffers so a long run does not allocate per step.
pub struct Stepper {
    scheme: Scheme,
    scratch: Scratch,
    k: [Vec<f64>; 8],
    tmp_theta: Vec<f64>,
    tmp_omega: Vec<f64>,
}

impl Stepper {
    pub fn new(n: usize, scheme: Scheme) -> Self {
        Self {
            scheme,
            scratch: Scratch::new(n),
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp_theta: vec![0.0; n],
            tmp_omega: vec![0.0; n],
        }
    }

    /// Advance in place. Returns false if the new state is not finite.
    pub fn advance(
        &mut self,
        theta: &mut [f64],
        omega: &mut [f64],
        params: &ModelParams,
        dt: f64,
    ) -> bool {
        match self.scheme {
            Scheme::Rk4 => self.rk4(theta, omega, params, dt),
            Scheme::SemiImplicitEuler => self.semi_implicit(theta, omega, params, dt),
        }
        theta.iter().chain(omega.iter()).all(|v| v.is_finite())
    }

    fn rk4(&mut self, theta: &mut [f64], omega: &mut [f64], params: &ModelParams, dt: f64) {
        let n = theta.len();
        let [k1t, k1w, k2t, k2w, k3t, k3w, k4t, k4w] = &mut self.k;
        let (tt, tw) = (&mut self.tmp_theta, &mut self.tmp_omega);
        let s = &mut self.scratch;

        rhs_into(theta, omega, params, s, k1t, k1w);
        for i in 0..n {
            tt[i] = theta[i] + 0.5 * dt * k1t[i];
            tw[i] = omega[i] + 0.5 * dt * k1w[i];
        }
        rhs_into(tt, tw, params, s, k2t, k2w);
        for i in 0..n {
            tt[i] = theta[i] + 0.5 * dt * k2t[i];
            tw[i] = omega[i] + 0.5 * dt * k2w[i];
        }
        rhs_into(tt, tw, params, s, k3t, k3w);
        for i in 0..n {
            tt[i] = theta[i] + dt * k3t[i];
            tw[i] = omega[i] + dt * k3w[i];
        }
        rhs_into(tt, tw, params, s, k4t, k4w);
        let h = dt / 6.0;
        for i in 0..n {
            theta[i] += h * (k1t[i] + 2.0 * k2t[i] + 2.0 * k3t[i] + k4t[i]);
            omega[i] += h * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i]);
        }
    }

    // Friction is treated implicitly, coupling explicitly, then the phase is
    // updated with the new frequency.
    fn semi_implicit(
        &mut self,
        theta: &mut [f64],
        omega: &mut [f64],
        params: &ModelParams,
        dt: f64,
    ) {
        let force = &mut self.k[0];
        crate::model::coupling_with(theta, params, &mut self.scratch, force);
        let (m, g, nu) = (params.masses(), params.frictions(), params.natural_freqs());
        for i in 0..theta.len() {
            omega[i] = (omega[i] + dt / m[i] * (nu[i] + force[i])) / (1.0 + dt * g[i] / m[i]);
            theta[i] += dt * omega[i];
        }
    }
}

/// One explicit step. A non-finite result is reported as divergence at step 1.
pub fn step(
    state: &OscillatorEnsemble,
    params: &ModelParams,
    dt: f64,
    scheme: Scheme,
) -> Result<OscillatorEnsemble> {
    params.check_state(state)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive and finite, got {dt}"),
        });
    }
    let (mut theta, mut omega) = state.clone().into_parts();
    let mut stepper = Stepper::new(state.n(), scheme);
    if !stepper.advance(&mut theta, &mut omega, params, dt) {
        return Err(Error::Diverged { step: 1, time: dt });
    }
    Ok(OscillatorEnsemble::from_parts_unchecked(theta, omega))
}

/// Integrate and keep every `sample_every`-th state (plus the final one).
pub fn simulate(
    init: &OscillatorEnsemble,
    params: &ModelParams,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let every = config.sample_every;
    let last = config.total_steps();
    simulate_with(init, params, config, |k, t, s| {
        if k % every == 0 || k == last {
            times.push(t);
            states.push(s.clone());
        }
    })?;
    Ok(Trajectory {
        times,
        states,
        params: params.clone(),
    })
}

/// Integrate and hand every state (step index, time, state) to `observe`,
/// starting with the initial state at step 0. Nothing is stored.
pub fn simulate_with<F>(
    init: &OscillatorEnsemble,
    params: &ModelParams,
    config: &IntegratorConfig,
    mut observe: F,
) -> Result<OscillatorEnsemble>
where
    F: FnMut(usize, f64, &OscillatorEnsemble),
{
    config.validate()?;
    params.check_state(init)?;
    let (full, tail) = config.step_plan();
    let total = full + usize::from(tail > 0.0);

    let mut stepper = Stepper::new(init.n(), config.scheme);
    let mut state = init.clone();
    observe(0, 0.0, &state);
    for k in 1..=total {
        let h = if k <= full { config.dt } else { tail };
        let t = if k == total {
            config.t_final
        } else {
            k as f64 * config.dt
        };
        let (mut theta, mut omega) = state.into_parts();
        if !stepper.advance(&mut theta, &mut omega, params, h) {
            return Err(Error::Diverged { step: k, time: t });
        }
        state = OscillatorEnsemble::from_parts_unchecked(theta, omega);
        observe(k, t, &state);
    }
    Ok(state)
}

/// Mean phase and frequency for equal masses and frictions:
/// the solution of `m θ̈_c + γ θ̇_c = ν_c`, whose steady drift is `ν_c/γ`.
pub fn mean_closed_form(
    t: f64,
    theta_c0: f64,
    omega_c0: f64,
    m: f64,
    gamma: f64,
    nu_c: f64,
) -> Result<(f64, f64)> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("must be positive, got {m}"),
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    let x = -gamma * t / m;
    let drift = nu_c / gamma;
    let dev = omega_c0 - drift;
    let theta = theta_c0 + t * drift - (m / gamma) * dev * x.exp_m1();
    let omega = drift + dev * x.exp();
    Ok((theta, omega))
}

/// Per-oscillator frequency bound `max{(|ν_i| + κ Σ_j a_ij)/γ_i, |ω_i(0)|}`.
pub fn frequency_bounds(init: &OscillatorEnsemble, params: &ModelParams) -> Result<Vec<f64>> {
    params.check_state(init)?;
    Ok((0..params.n())
        .map(|i| {
            let drive = params.natural_freqs()[i].abs() + params.kappa() * params.capacity().row_sum(i);
            (drive / params.frictions()[i]).max(init.omega()[i].abs())
        })
        .collect())
}

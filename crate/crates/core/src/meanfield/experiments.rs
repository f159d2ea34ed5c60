//! Particle proxies for the kinetic equation: mean-field convergence and
//! asymptotic phase locking.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::sampling::{sample_initial, InitialDistribution};
use super::wasserstein::{wasserstein2, SlicedProjector, W2Method, W2Options, EXACT_CAP};
use super::{support_bound, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::integrator::{frequency_bounds, simulate, simulate_with, IntegratorConfig};
use crate::model::{ModelParams, OscillatorEnsemble};
use crate::observables::{diameters, global_order};
use crate::sync::{classify_lock, LockClassification};

/// Identical oscillators with all-to-all coupling `κ/N` and no natural frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticParams {
    pub mass: f64,
    pub friction: f64,
    pub kappa: f64,
}

impl KineticParams {
    pub fn particle_params(&self, n: usize) -> Result<ModelParams> {
        ModelParams::all_to_all(n, self.mass, self.friction, self.kappa)
    }
}

/// Hypotheses for uniform-in-time mean-field convergence, evaluated on a sample:
/// compact support, `0 < C₁ < π/2` and `mκ ≤ sin(4C₁)/(2C₁)`.
///
/// The bound is the two-solution constant `sin(2S)/S` at `S = 2C₁`; it is
/// negative once `C₁ > π/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem36Check {
    pub c1: f64,
    pub rhs: f64,
    pub m_kappa: f64,
    pub compact_support: bool,
    pub c1_ok: bool,
    pub bound_ok: bool,
    pub satisfied: bool,
}

pub fn theorem36_bound(c1: f64, m: f64, kappa: f64) -> Theorem36Check {
    let rhs = if c1 > 0.0 { (4.0 * c1).sin() / (2.0 * c1) } else { f64::NAN };
    let m_kappa = m * kappa;
    let c1_ok = c1 > 0.0 && c1 < PI / 2.0;
    let bound_ok = m_kappa > 0.0 && m_kappa <= rhs;
    Theorem36Check {
        c1,
        rhs,
        m_kappa,
        compact_support: true,
        c1_ok,
        bound_ok,
        satisfied: c1_ok && bound_ok,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceOptions {
    pub w2: W2Options,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub seed: u64,
    /// `sup_t W₂(μ^N_t, μ^{N_ref}_t)` over the sampled times.
    pub sup_w2: f64,
    pub initial_w2: f64,
    pub method: W2Method,
    /// Largest Monte Carlo standard error over the sampled times.
    pub max_mc_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub median_sup_w2: f64,
    pub min_sup_w2: f64,
    pub max_sup_w2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_ref: usize,
    pub sample_times: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<ConvergenceSummary>,
    /// Medians strictly decreasing along the (sorted) `N` list.
    pub monotone_decreasing: bool,
    /// Median at the largest `N` over the median at the smallest.
    pub ratio_last_first: f64,
    /// Hypothesis check on each reference sample, one per seed.
    pub theorem36: Vec<Theorem36Check>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn convergence_one_seed(
    dist: &InitialDistribution,
    n_list: &[usize],
    n_ref: usize,
    params: &KineticParams,
    config: &IntegratorConfig,
    seed: u64,
    options: &ConvergenceOptions,
) -> Result<(Vec<f64>, Vec<ConvergenceRow>, Theorem36Check)> {
    let reference = sample_initial(dist, n_ref, seed)?;
    let ref_params = params.particle_params(n_ref)?;
    let c1 = diameters(&reference, &ref_params)?.c1;
    let check = theorem36_bound(c1, params.mass, params.kappa);
    let ref_traj = simulate(&reference, &ref_params, config)?;

    let trajectories = n_list
        .iter()
        .map(|&n| {
            let (theta, omega) = reference.clone().into_parts();
            let init = OscillatorEnsemble::new(theta[..n].to_vec(), omega[..n].to_vec())?;
            simulate(&init, &params.particle_params(n)?, config)
        })
        .collect::<Result<Vec<_>>>()?;

    let exact_for = |n: usize| n == n_ref && n <= EXACT_CAP;
    let projector = if n_list.iter().all(|&n| exact_for(n)) {
        None
    } else {
        Some(SlicedProjector::new(options.w2.projections, options.w2.seed)?)
    };

    let mut sup = vec![0.0f64; n_list.len()];
    let mut initial = vec![0.0f64; n_list.len()];
    let mut mc = vec![0.0f64; n_list.len()];
    for (idx, ref_state) in ref_traj.states().iter().enumerate() {
        let ref_measure = EmpiricalMeasure::from_state(ref_state)?;
        let ref_proj = projector.as_ref().map(|p| p.project(&ref_measure));
        for (col, traj) in trajectories.iter().enumerate() {
            let measure = EmpiricalMeasure::from_state(&traj.states()[idx])?;
            let (value, err) = if exact_for(n_list[col]) {
                (wasserstein2(&measure, &ref_measure)?, 0.0)
            } else {
                let p = projector.as_ref().expect("projector exists for sliced pairs");
                let est = p.distance_projected(&p.project(&measure), ref_proj.as_ref().expect("projected"));
                (est.value, est.mc_error)
            };
            if idx == 0 {
                initial[col] = value;
            }
            sup[col] = sup[col].max(value);
            mc[col] = mc[col].max(err);
        }
    }
    let rows = n_list
        .iter()
        .enumerate()
        .map(|(col, &n)| ConvergenceRow {
            n,
            seed,
            sup_w2: sup[col],
            initial_w2: initial[col],
            method: if exact_for(n) { W2Method::Exact } else { W2Method::Sliced },
            max_mc_error: mc[col],
        })
        .collect();
    Ok((ref_traj.times().to_vec(), rows, check))
}

/// Compare nested samples of size `N ∈ n_list` against the `n_ref` sample
/// over the sampled times of `config`, for each seed.
pub fn meanfield_convergence_experiment(
    dist: &InitialDistribution,
    n_list: &[usize],
    n_ref: usize,
    params: &KineticParams,
    config: &IntegratorConfig,
    seeds: &[u64],
    options: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    config.validate()?;
    dist.validate()?;
    if n_list.is_empty() || seeds.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(&n) = n_list.iter().find(|&&n| n == 0 || n > n_ref) {
        return Err(Error::InvalidParameter {
            name: "n_list",
            reason: format!("sizes must lie in 1..={n_ref}, got {n}"),
        });
    }
    if !options.w2.allow_sliced {
        if let Some(&n) = n_list.iter().find(|&&n| n != n_ref || n > EXACT_CAP) {
            return Err(Error::ExactW2Unavailable {
                cap: EXACT_CAP,
                left: n,
                right: n_ref,
            });
        }
    }
    let mut sorted: Vec<usize> = n_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let per_seed = seeds
        .par_iter()
        .map(|&seed| convergence_one_seed(dist, &sorted, n_ref, params, config, seed, options))
        .collect::<Result<Vec<_>>>()?;

    let sample_times = per_seed[0].0.clone();
    let theorem36 = per_seed.iter().map(|s| s.2).collect();
    let rows: Vec<ConvergenceRow> = per_seed.into_iter().flat_map(|s| s.1).collect();
    let summary: Vec<ConvergenceSummary> = sorted
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.sup_w2).collect();
            let med = median(&mut v);
            ConvergenceSummary {
                n,
                median_sup_w2: med,
                min_sup_w2: v[0],
                max_sup_w2: v[v.len() - 1],
            }
        })
        .collect();
    let monotone_decreasing = summary.windows(2).all(|w| w[1].median_sup_w2 < w[0].median_sup_w2);
    let ratio_last_first = summary[summary.len() - 1].median_sup_w2 / summary[0].median_sup_w2;
    Ok(ConvergenceReport {
        n_ref,
        sample_times,
        rows,
        summary,
        monotone_decreasing,
        ratio_last_first,
        theorem36,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KineticSyncOptions {
    /// Angular tolerance handed to `classify_lock`.
    pub tol_angle: f64,
    /// Per-step tolerance of the energy balance.
    pub energy_tolerance: f64,
    /// Slack of the bound monitors.
    pub monitor_slack: f64,
}

impl Default for KineticSyncOptions {
    fn default() -> Self {
        Self {
            tol_angle: 0.05,
            energy_tolerance: 1e-6,
            monitor_slack: 1e-6,
        }
    }
}

/// A pointwise bound checked at every sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupportMonitor {
    pub bound: f64,
    pub max_value: f64,
    /// Largest `value − bound` seen.
    pub max_excess: f64,
    pub first_violation: Option<f64>,
    pub holds: bool,
}

impl SupportMonitor {
    fn new(bound: f64) -> Self {
        Self {
            bound,
            max_value: 0.0,
            max_excess: f64::NEG_INFINITY,
            first_violation: None,
            holds: true,
        }
    }

    fn observe(&mut self, t: f64, value: f64, bound: f64, slack: f64) {
        self.max_value = self.max_value.max(value);
        let excess = value - bound;
        self.max_excess = self.max_excess.max(excess);
        if excess > slack && self.first_violation.is_none() {
            self.first_violation = Some(t);
            self.holds = false;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KineticSyncReport {
    pub n: usize,
    /// `(m/N) Σ ω_i² ≤ κ R(0)²`.
    pub particle_condition: InequalityCheck,
    /// `½ ∫ ω² f ≤ κ R(0)²/(2m)` for the empirical measure; algebraically the same inequality.
    pub su_lt_condition: InequalityCheck,
    pub r0: f64,
    pub r_final: f64,
    pub times: Vec<f64>,
    pub r_series: Vec<f64>,
    /// `Ē_K = (1/2N) Σ ω_i²` at the sampled times.
    pub ek_bar_series: Vec<f64>,
    pub ek_bar_initial: f64,
    pub ek_bar_final: f64,
    pub ek_bar_peak: f64,
    /// Final `Ē_K` below `1e-6` of its sampled peak (or below `1e-14`).
    pub kinetic_energy_decayed: bool,
    /// Largest per-step `|ΔĒ + (2γ/m) Ē_K dt|` (trapezoidal `Ē_K`).
    pub energy_balance_max: f64,
    pub energy_balance_ok: bool,
    pub classification: LockClassification,
    pub c1: f64,
    pub c2: f64,
    /// `|ω_i(t)| ≤ max{max|ω(0)|, mκ}`.
    pub support_bound: SupportMonitor,
    /// `|ω_i(t)| ≤ max{|ω_i(0)|, κ/γ}`.
    pub frequency_bound: SupportMonitor,
}

/// `(Ē_K, Ē_P)` for `a_ij = 1/N`; the interaction part is `(κ/2m)(1 − R²)`,
/// computed from phases relative to the first one.
fn bar_energies(theta: &[f64], omega: &[f64], m: f64, kappa: f64) -> (f64, f64) {
    let n = theta.len() as f64;
    let ek = 0.5 * omega.iter().map(|w| w * w).sum::<f64>() / n;
    let (mut s, mut c) = (0.0, 0.0);
    for t in theta {
        let (sn, cs) = (t - theta[0]).sin_cos();
        s += sn;
        c += cs;
    }
    let r_sq = (s * s + c * c) / (n * n);
    (ek, kappa / (2.0 * m) * (1.0 - r_sq))
}

pub fn kinetic_sync_experiment(
    dist: &InitialDistribution,
    n: usize,
    seed: u64,
    params: &KineticParams,
    config: &IntegratorConfig,
    options: &KineticSyncOptions,
) -> Result<KineticSyncReport> {
    let init = sample_initial(dist, n, seed)?;
    kinetic_sync_from_state(&init, params, config, options)
}

/// Run the particle proxy from `init` and classify the final empirical measure.
pub fn kinetic_sync_from_state(
    init: &OscillatorEnsemble,
    params: &KineticParams,
    config: &IntegratorConfig,
    options: &KineticSyncOptions,
) -> Result<KineticSyncReport> {
    config.validate()?;
    let n = init.n();
    let model = params.particle_params(n)?;
    let (m, gamma, kappa) = (params.mass, params.friction, params.kappa);
    let nf = n as f64;

    let r0 = global_order(init.theta())?.r_p;
    let sum_sq: f64 = init.omega().iter().map(|w| w * w).sum();
    let particle_condition = InequalityCheck {
        lhs: m / nf * sum_sq,
        rhs: kappa * r0 * r0,
        satisfied: m / nf * sum_sq <= kappa * r0 * r0,
    };
    let su_lt_condition = InequalityCheck {
        lhs: 0.5 * sum_sq / nf,
        rhs: kappa * r0 * r0 / (2.0 * m),
        satisfied: 0.5 * sum_sq / nf <= kappa * r0 * r0 / (2.0 * m),
    };

    let omega0_max = init.omega().iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let per_oscillator = frequency_bounds(init, &model)?;
    let mut support = SupportMonitor::new(support_bound(omega0_max, m, kappa));
    let mut freq = SupportMonitor::new(per_oscillator.iter().cloned().fold(0.0, f64::max));

    let every = config.sample_every;
    let last = config.total_steps();
    let mut times = Vec::new();
    let mut r_series = Vec::new();
    let mut ek_bar_series = Vec::new();
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut balance = 0.0f64;
    let slack = options.monitor_slack;

    let final_state = simulate_with(init, &model, config, |k, t, s| {
        let (ek, ep) = bar_energies(s.theta(), s.omega(), m, kappa);
        if let Some((t0, ek0, ep0)) = prev {
            let dt = t - t0;
            let residual = (ek + ep) - (ek0 + ep0) + (2.0 * gamma / m) * 0.5 * (ek + ek0) * dt;
            balance = balance.max(residual.abs());
        }
        prev = Some((t, ek, ep));
        if k % every == 0 || k == last {
            times.push(t);
            r_series.push(global_order(s.theta()).map(|g| g.r_p).unwrap_or(f64::NAN));
            ek_bar_series.push(ek);
            for (i, w) in s.omega().iter().enumerate() {
                support.observe(t, w.abs(), support.bound, slack);
                freq.observe(t, w.abs(), per_oscillator[i], slack);
            }
        }
    })?;

    let classification = classify_lock(final_state.theta(), options.tol_angle)?;
    let c1 = classification.k as f64 / nf;
    let ek_bar_initial = ek_bar_series[0];
    let ek_bar_final = *ek_bar_series.last().expect("at least the initial sample");
    let ek_bar_peak = ek_bar_series.iter().cloned().fold(0.0, f64::max);
    Ok(KineticSyncReport {
        n,
        particle_condition,
        su_lt_condition,
        r0,
        r_final: *r_series.last().expect("at least the initial sample"),
        times,
        r_series,
        ek_bar_series,
        ek_bar_initial,
        ek_bar_final,
        ek_bar_peak,
        kinetic_energy_decayed: ek_bar_final <= (1e-6 * ek_bar_peak).max(1e-14),
        energy_balance_max: balance,
        energy_balance_ok: balance <= options.energy_tolerance,
        classification,
        c1,
        c2: 1.0 - c1,
        support_bound: support,
        frequency_bound: freq,
    })
}

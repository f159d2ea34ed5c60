//! The ε-energy of the gap between two solutions and the paired stability run.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::integrator::{IntegratorConfig, Stepper};
use crate::model::{comoving_shift, ModelParams, OscillatorEnsemble};
use crate::observables::{diameter, diameters};
use crate::sync::{fit_decay, DecayFit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsilonEnergyReport {
    pub value: f64,
    pub epsilon: f64,
    /// `(‖X‖², ‖V‖², ⟨X,V⟩)`.
    pub norms: (f64, f64, f64),
    /// Eigenvalues `(C₀, C₁)` of `[[εγ, mε], [mε, m]]`, so that
    /// `C₀ ‖(X,V)‖² ≤ E_ε ≤ C₁ ‖(X,V)‖²`. `C₀ > 0` iff `ε < γ/m`.
    pub equivalence_constants: (f64, f64),
}

fn form_eigenvalues(epsilon: f64, m: f64, gamma: f64) -> (f64, f64) {
    let (a, b, d) = (epsilon * gamma, m * epsilon, m);
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let hi = half_tr + disc;
    // product of the roots avoids cancellation in the small one
    let det = a * d - b * b;
    let lo = if hi != 0.0 { det / hi } else { 0.0 };
    (lo, hi)
}

/// `E_ε(X, V) = εγ‖X‖² + 2mε⟨X,V⟩ + m‖V‖²`.
pub fn epsilon_energy(x: &[f64], v: &[f64], epsilon: f64, m: f64, gamma: f64) -> Result<EpsilonEnergyReport> {
    check_len("V", x.len(), v.len())?;
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let xv: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(EpsilonEnergyReport {
        value: epsilon * gamma * xx + 2.0 * m * epsilon * xv + m * vv,
        epsilon,
        norms: (xx, vv, xv),
        equivalence_constants: form_eigenvalues(epsilon, m, gamma),
    })
}

/// Hypotheses of the two-solution energy estimate, evaluated on centered data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityHypotheses {
    pub c1_a: f64,
    pub c1_b: f64,
    pub c1_sum: f64,
    /// `Γ̃ = sin(2S)/S` with `S = C₁(0) + C̃₁(0)`.
    pub gamma_tilde: f64,
    pub m: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub m_kappa: f64,
    /// `[κ/(2Γ̃), (2γ−1)/(2m)]`.
    pub epsilon_window: (f64, f64),
    pub trapping_ok: bool,
    pub friction_ok: bool,
    pub coupling_ok: bool,
    pub window_nonempty: bool,
    pub satisfied: bool,
    pub notes: Vec<String>,
}

/// Evaluate the hypotheses for an already centered pair.
pub fn stability_hypotheses(
    a: &OscillatorEnsemble,
    b: &OscillatorEnsemble,
    params: &ModelParams,
) -> Result<StabilityHypotheses> {
    let (m, gamma) = params.uniform_inertia().ok_or(Error::WrongVariant {
        required: "uniform inertia and friction",
    })?;
    let kappa = params.kappa();
    let c1_a = diameters(a, params)?.c1;
    let c1_b = diameters(b, params)?.c1;
    let s = c1_a + c1_b;
    let gamma_tilde = if s > 0.0 { (2.0 * s).sin() / s } else { 2.0 };
    let lo = kappa / (2.0 * gamma_tilde);
    let hi = (2.0 * gamma - 1.0) / (2.0 * m);
    let trapping_ok = (0.0..PI).contains(&s);
    let friction_ok = gamma > 0.5;
    let m_kappa = m * kappa;
    let coupling_ok = m_kappa > 0.0 && m_kappa <= gamma_tilde;
    let window_nonempty = gamma_tilde > 0.0 && lo <= hi;
    let mut notes = Vec::new();
    let all_to_all = params.capacity().is_all_to_all();
    if !all_to_all {
        notes.push("estimate is stated for a_ij = 1/N only".into());
    }
    if params.natural_freqs().iter().any(|&v| v != params.natural_freqs()[0]) {
        notes.push("natural frequencies differ; the centered frame is not invariant".into());
    }
    if !window_nonempty {
        notes.push("epsilon window is empty".into());
    }
    Ok(StabilityHypotheses {
        c1_a,
        c1_b,
        c1_sum: s,
        gamma_tilde,
        m,
        gamma,
        kappa,
        m_kappa,
        epsilon_window: (lo, hi),
        trapping_ok,
        friction_ok,
        coupling_ok,
        window_nonempty,
        satisfied: trapping_ok && friction_ok && coupling_ok && window_nonempty && all_to_all,
        notes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityOptions {
    /// Defaults to the midpoint of the admissible window.
    pub epsilon: Option<f64>,
    /// Defaults to `[min(1, t_final/2), t_final]`.
    pub fit_window: Option<(f64, f64)>,
    pub monotone_slack: f64,
    pub step_tolerance: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            fit_window: None,
            monotone_slack: 1e-9,
            step_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub hypotheses: StabilityHypotheses,
    pub hypothesis_failed: bool,
    pub epsilon: f64,
    /// `min{2γ − 1 − 2mε, κ(2Γ̃ε − κ)}`.
    pub c2: f64,
    pub equivalence_constants: (f64, f64),
    /// `C₂ / C₁`, the rate guaranteed by the estimate.
    pub c3_predicted: f64,
    pub times: Vec<f64>,
    pub e_eps: Vec<f64>,
    pub gap_norm_sq: Vec<f64>,
    pub monotone: bool,
    pub max_increase: f64,
    /// Largest per-step `ΔE_ε + C₂ min‖(X,V)‖² dt`; the estimate needs ≤ tolerance.
    pub step_inequality_max: f64,
    pub step_inequality_ok: bool,
    /// Largest `D(Θ(t)) + D(Θ̃(t)) − (C₁(0) + C̃₁(0))` over all steps.
    pub trapping_excess: f64,
    pub trapping_ok: bool,
    pub decay_fit: Option<DecayFit>,
    pub notes: Vec<String>,
}

struct Gap {
    e: f64,
    norm_sq: f64,
}

fn gap(a: (&[f64], &[f64]), b: (&[f64], &[f64]), epsilon: f64, m: f64, gamma: f64) -> Gap {
    let x: Vec<f64> = a.0.iter().zip(b.0).map(|(p, q)| p - q).collect();
    let v: Vec<f64> = a.1.iter().zip(b.1).map(|(p, q)| p - q).collect();
    // lengths agree by construction
    let r = epsilon_energy(&x, &v, epsilon, m, gamma).expect("equal lengths");
    Gap {
        e: r.value,
        norm_sq: r.norms.0 + r.norms.1,
    }
}

/// Co-simulate two solutions in lock-step from their centered initial data.
pub fn stability_experiment(
    init_a: &OscillatorEnsemble,
    init_b: &OscillatorEnsemble,
    params: &ModelParams,
    config: &IntegratorConfig,
    options: &StabilityOptions,
) -> Result<StabilityReport> {
    config.validate()?;
    let a0 = comoving_shift(init_a, params)?;
    let b0 = comoving_shift(init_b, params)?;
    let hyp = stability_hypotheses(&a0, &b0, params)?;
    let (m, gamma, kappa) = (hyp.m, hyp.gamma, hyp.kappa);
    let mut notes = Vec::new();

    let epsilon = match options.epsilon {
        Some(e) => {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("must be positive, got {e}"),
                });
            }
            e
        }
        None if hyp.window_nonempty => 0.5 * (hyp.epsilon_window.0 + hyp.epsilon_window.1),
        None => {
            notes.push("epsilon window empty; using γ/(4m)".into());
            gamma / (4.0 * m)
        }
    };
    let c2 = (2.0 * gamma - 1.0 - 2.0 * m * epsilon).min(kappa * (2.0 * hyp.gamma_tilde * epsilon - kappa));
    let equivalence_constants = form_eigenvalues(epsilon, m, gamma);
    let c3_predicted = c2 / equivalence_constants.1;
    let trap_bound = hyp.c1_sum;

    let (mut ta, mut wa) = a0.into_parts();
    let (mut tb, mut wb) = b0.into_parts();
    let mut sa = Stepper::new(ta.len(), config.scheme);
    let mut sb = Stepper::new(tb.len(), config.scheme);
    let (full, tail) = config.step_plan();
    let total = full + usize::from(tail > 0.0);

    let mut prev = gap((&ta, &wa), (&tb, &wb), epsilon, m, gamma);
    let mut times = vec![0.0];
    let mut e_eps = vec![prev.e];
    let mut gap_norm_sq = vec![prev.norm_sq];
    let mut step_max = f64::NEG_INFINITY;
    let mut trapping_excess = diameter(&ta) + diameter(&tb) - trap_bound;
    for k in 1..=total {
        let h = if k <= full { config.dt } else { tail };
        let t = if k == total { config.t_final } else { k as f64 * config.dt };
        let ok_a = sa.advance(&mut ta, &mut wa, params, h);
        let ok_b = sb.advance(&mut tb, &mut wb, params, h);
        if !(ok_a && ok_b) {
            return Err(Error::Diverged { step: k, time: t });
        }
        let cur = gap((&ta, &wa), (&tb, &wb), epsilon, m, gamma);
        step_max = step_max.max(cur.e - prev.e + c2 * cur.norm_sq.min(prev.norm_sq) * h);
        trapping_excess = trapping_excess.max(diameter(&ta) + diameter(&tb) - trap_bound);
        if k % config.sample_every == 0 || k == total {
            times.push(t);
            e_eps.push(cur.e);
            gap_norm_sq.push(cur.norm_sq);
        }
        prev = cur;
    }

    let max_increase = e_eps
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = e_eps.len() < 2 || max_increase <= options.monotone_slack;

    let window = options
        .fit_window
        .unwrap_or((config.t_final.min(1.0).min(0.5 * config.t_final), config.t_final));
    let decay_fit = match fit_decay(&times, &e_eps, window) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("no decay fit: {e}"));
            None
        }
    };

    Ok(StabilityReport {
        hypothesis_failed: !hyp.satisfied,
        hypotheses: hyp,
        epsilon,
        c2,
        equivalence_constants,
        c3_predicted,
        times,
        e_eps,
        gap_norm_sq,
        monotone,
        max_increase,
        step_inequality_ok: total == 0 || step_max <= options.step_tolerance,
        step_inequality_max: step_max,
        trapping_ok: trapping_excess <= 1e-9,
        trapping_excess,
        decay_fit,
        notes,
    })
}

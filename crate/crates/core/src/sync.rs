//! Sufficient conditions for synchronization, lock classification, sync
//! detection, heterogeneous lower bounds, decay fits and the Gronwall envelope.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::integrator::Trajectory;
use crate::model::{Capacity, ModelParams, ModelVariant, OscillatorEnsemble};
use crate::observables::{circle_distance, diameter, diameters, global_order, wrap_to_pi, EPS_R};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TheoremId {
    T31,
    T32,
    T33,
    T34,
    T35,
}

impl TheoremId {
    pub const ALL: [TheoremId; 5] = [Self::T31, Self::T32, Self::T33, Self::T34, Self::T35];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::T31 => "T31",
            Self::T32 => "T32",
            Self::T33 => "T33",
            Self::T34 => "T34",
            Self::T35 => "T35",
        }
    }
}

/// Outcome of a sufficient-condition check together with every quantity it compared.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub theorem: TheoremId,
    pub satisfied: bool,
    /// Non-finite entries (e.g. an undefined root) serialize as `null`.
    pub margins: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ConditionVerdict {
    fn new(theorem: TheoremId) -> Self {
        Self {
            theorem,
            satisfied: false,
            margins: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, v: f64) {
        self.margins.insert(key.to_string(), v);
    }

    pub fn margin(&self, key: &str) -> Option<f64> {
        self.margins.get(key).copied()
    }
}

fn homogeneous_all_to_all(params: &ModelParams) -> Result<(f64, f64, f64)> {
    match params.variant() {
        ModelVariant::HomogeneousAllToAll { m, gamma, nu } => Ok((m, gamma, nu)),
        ModelVariant::HeterogeneousNetwork => Err(Error::WrongVariant {
            required: "homogeneous all-to-all",
        }),
    }
}

/// `(m/N) Σ ω_i² ≤ κ R_p²` for identical oscillators without natural frequencies.
pub fn check_theorem34(init: &OscillatorEnsemble, params: &ModelParams) -> Result<ConditionVerdict> {
    params.check_state(init)?;
    let (m, _, nu) = homogeneous_all_to_all(params)?;
    if nu != 0.0 {
        return Err(Error::WrongVariant {
            required: "homogeneous all-to-all with zero natural frequencies",
        });
    }
    let n = init.n() as f64;
    let kappa = params.kappa();
    let r = global_order(init.theta())?.r_p;
    let lhs = m / n * init.omega().iter().map(|w| w * w).sum::<f64>();
    let rhs = kappa * r * r;
    let kappa_star = if lhs == 0.0 { 0.0 } else { lhs / (r * r) };

    let mut v = ConditionVerdict::new(TheoremId::T34);
    v.set("kinetic_lhs", lhs);
    v.set("kappa_r_sq_rhs", rhs);
    v.set("kappa", kappa);
    v.set("kappa_star", kappa_star);
    v.set("r_p0", r);
    v.set("r_lower", r_lower_bound(lhs, r, kappa));
    v.satisfied = kappa > 0.0 && lhs <= rhs;
    if r < EPS_R {
        v.notes.push("R_p(0) = 0: phase-locked branch".into());
    }
    Ok(v)
}

/// `sqrt(R_p(0)² − 2E_K(0)/(κN))`, the uniform lower bound on `R_p(t)`.
/// NaN when the radicand is negative.
fn r_lower_bound(kinetic_lhs: f64, r0: f64, kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return f64::NAN;
    }
    let rad = r0 * r0 - kinetic_lhs / kappa;
    if rad >= 0.0 {
        rad.sqrt()
    } else {
        f64::NAN
    }
}

/// Choice of the energy normalization used for `J₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum J0Convention {
    /// `J₀ = (κ/2) Σ a_ij cos(θ_i − θ_j) − ½ Σ m_i ω_i²`.
    HalfKappa,
    /// `J₀ = Σ a_ij cos(θ_i − θ_j) − (1/κ) Σ m_i ω_i²`, the form that
    /// bounds `Σ a_ij cos(θ_i(t) − θ_j(t))` from below by energy monotonicity.
    Normalized,
}

impl J0Convention {
    pub fn label(self) -> &'static str {
        match self {
            Self::HalfKappa => "half_kappa",
            Self::Normalized => "normalized",
        }
    }
}

/// Mean of the off-diagonal capacities (the single entry when `N = 1`).
pub fn default_a_bar(capacity: &Capacity) -> f64 {
    let n = capacity.n();
    if n == 1 {
        return capacity.get(0, 0);
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += capacity.get(i, j);
            }
        }
    }
    s / (n * (n - 1)) as f64
}

/// `δ = max_i Σ_j |a_ij − ā|`.
pub fn capacity_delta(capacity: &Capacity, a_bar: f64) -> f64 {
    let n = capacity.n();
    (0..n)
        .map(|i| (0..n).map(|j| (capacity.get(i, j) - a_bar).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn weighted_cos_sum(theta: &[f64], capacity: &Capacity) -> f64 {
    let n = theta.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += capacity.get(i, j) * (theta[i] - theta[j]).cos();
        }
    }
    s
}

fn inertia_sum(state: &OscillatorEnsemble, params: &ModelParams) -> f64 {
    params
        .masses()
        .iter()
        .zip(state.omega())
        .map(|(m, w)| m * w * w)
        .sum()
}

pub fn j0(state: &OscillatorEnsemble, params: &ModelParams, convention: J0Convention) -> Result<f64> {
    params.check_state(state)?;
    let cos_sum = weighted_cos_sum(state.theta(), params.capacity());
    let inertia = inertia_sum(state, params);
    let kappa = params.kappa();
    Ok(match convention {
        J0Convention::HalfKappa => 0.5 * kappa * cos_sum - 0.5 * inertia,
        J0Convention::Normalized => {
            if kappa > 0.0 {
                cos_sum - inertia / kappa
            } else if inertia == 0.0 {
                cos_sum
            } else {
                f64::NEG_INFINITY
            }
        }
    })
}

/// `Σ a_ij cos(θ_i − θ_j) ≥ Σ m_i ω_i² + 3δN + δ²/ā` with `δ = max_i Σ_j |a_ij − ā|`.
///
/// `a_bar` defaults to the off-diagonal mean of the capacity matrix.
pub fn check_theorem35(
    init: &OscillatorEnsemble,
    params: &ModelParams,
    a_bar: Option<f64>,
) -> Result<ConditionVerdict> {
    params.check_state(init)?;
    let a_bar = a_bar.unwrap_or_else(|| default_a_bar(params.capacity()));
    if !(a_bar > 0.0 && a_bar.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "a_bar",
            reason: format!("must be positive, got {a_bar}"),
        });
    }
    let delta = capacity_delta(params.capacity(), a_bar);
    let n = init.n() as f64;
    let lhs = weighted_cos_sum(init.theta(), params.capacity());
    let rhs = inertia_sum(init, params) + 3.0 * delta * n + delta * delta / a_bar;

    let mut v = ConditionVerdict::new(TheoremId::T35);
    v.set("cos_sum_lhs", lhs);
    v.set("energy_rhs", rhs);
    v.set("a_bar", a_bar);
    v.set("delta", delta);
    v.satisfied = lhs >= rhs;
    for conv in [J0Convention::HalfKappa, J0Convention::Normalized] {
        let b = lower_bounds_for(init, params, a_bar, delta, conv)?;
        let l = conv.label();
        v.set(&format!("j0_{l}"), b.j0);
        v.set(&format!("rp_sq_lower_{l}"), b.rp_sq_lower);
        v.set(&format!("r_local_lower_{l}"), b.r_local_lower);
        v.set(&format!("c0_{l}"), b.c0);
        v.set(&format!("cos_phase_lower_{l}"), b.cos_phase_lower);
    }
    if lhs == 0.0 {
        v.notes
            .push("zero weighted cosine sum: classification only, no verdict on locking".into());
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBounds {
    pub convention: J0Convention,
    pub j0: f64,
    /// `(J₀ − δN)/(āN²)`, a strict lower bound for `R_p(t)²`.
    pub rp_sq_lower: f64,
    /// `sqrt(ā(J₀ − 3δN) − δ²)`, bound for every `R_{p,i}(t)`; NaN if the radicand is negative.
    pub r_local_lower: f64,
    /// `R_{p,i} ≤ C₀ R_p`.
    pub c0: f64,
    /// Lower bound for `cos(φ_{p,i} − φ_p)`.
    pub cos_phase_lower: f64,
}

impl LowerBounds {
    pub fn is_valid(&self) -> bool {
        self.r_local_lower.is_finite() && self.r_local_lower > 0.0
    }
}

fn lower_bounds_for(
    init: &OscillatorEnsemble,
    params: &ModelParams,
    a_bar: f64,
    delta: f64,
    convention: J0Convention,
) -> Result<LowerBounds> {
    let n = init.n() as f64;
    let j0 = j0(init, params, convention)?;
    let rp_sq_lower = (j0 - delta * n) / (a_bar * n * n);
    let rad = a_bar * (j0 - 3.0 * delta * n) - delta * delta;
    let r_local_lower = if rad > 0.0 { rad.sqrt() } else { f64::NAN };
    let c0 = (a_bar * a_bar * n * n
        + a_bar * n * n * (2.0 * a_bar * delta * n + delta * delta) / (j0 - delta * n))
        .sqrt();
    // R_p is the 1/N-normalized modulus here, which puts āN (not āN²) in the
    // leading term; with δ = 0 the bound is exactly 1.
    let cos_phase_lower = if rad > 0.0 {
        a_bar * n / c0 - c0 * delta / rad
    } else {
        f64::NAN
    };
    Ok(LowerBounds {
        convention,
        j0,
        rp_sq_lower,
        r_local_lower,
        c0,
        cos_phase_lower,
    })
}

/// Lower bounds on `R_p`, `R_{p,i}` and `cos(φ_{p,i} − φ_p)` under both `J₀`
/// conventions. Fails only if neither convention gives a positive bound.
pub fn hetero_lower_bounds(
    init: &OscillatorEnsemble,
    params: &ModelParams,
    a_bar: f64,
    delta: f64,
) -> Result<Vec<LowerBounds>> {
    params.check_state(init)?;
    if !(a_bar > 0.0) {
        return Err(Error::InvalidParameter {
            name: "a_bar",
            reason: format!("must be positive, got {a_bar}"),
        });
    }
    let out = [J0Convention::HalfKappa, J0Convention::Normalized]
        .into_iter()
        .map(|c| lower_bounds_for(init, params, a_bar, delta, c))
        .collect::<Result<Vec<_>>>()?;
    if !out.iter().any(LowerBounds::is_valid) {
        return Err(Error::InsufficientMargin(format!(
            "ā(J₀ − 3δN) − δ² ≤ 0 under both conventions (J₀ = {} / {})",
            out[0].j0, out[1].j0
        )));
    }
    Ok(out)
}

/// Root of `sin x = ratio` in `(0, π/2]` by bisection; `None` outside `(0, 1]`.
pub fn solve_sin_bisection(ratio: f64) -> Option<f64> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return None;
    }
    if ratio == 1.0 {
        return Some(PI / 2.0);
    }
    let (mut lo, mut hi) = (0.0f64, PI / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid.sin() < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Framework {
    T31,
    T32,
    T33,
}

/// Diameter-based frameworks for identical masses, unit friction and all-to-all coupling.
pub fn check_small_large_inertia(
    init: &OscillatorEnsemble,
    params: &ModelParams,
    framework: Framework,
) -> Result<ConditionVerdict> {
    params.check_state(init)?;
    let (m, gamma) = params.uniform_inertia().ok_or(Error::WrongVariant {
        required: "equal masses and frictions",
    })?;
    if !params.capacity().is_all_to_all() {
        return Err(Error::WrongVariant {
            required: "all-to-all coupling",
        });
    }
    let d = diameters(init, params)?;
    let kappa = params.kappa();
    let mk = m * kappa;
    let d_nu = d.d_nu;
    let unit_friction = gamma == 1.0;

    let id = match framework {
        Framework::T31 => TheoremId::T31,
        Framework::T32 => TheoremId::T32,
        Framework::T33 => TheoremId::T33,
    };
    let mut v = ConditionVerdict::new(id);
    v.set("gamma", gamma);
    v.set("m_kappa", mk);
    v.set("d_nu", d_nu);
    v.set("d_theta0", d.d_theta);
    v.set("d_dot0", d.d_dot);
    if !unit_friction {
        v.notes.push("framework assumes unit friction".into());
    }
    match framework {
        Framework::T31 => {
            let c1 = d.c1;
            let large = c1 / (4.0 * c1.sin());
            v.set("c1_0", c1);
            v.set("m_kappa_small_upper", 0.25);
            v.set("m_kappa_large_lower", large);
            let window = (mk > 0.0 && mk < 0.25) || (c1 > 0.0 && c1 < PI && mk > large);
            v.satisfied = unit_friction && d_nu == 0.0 && c1 > 0.0 && c1 < PI && window;
            if c1 <= 0.0 {
                v.notes.push("C1(0) is not positive".into());
            }
        }
        Framework::T32 => {
            let c2 = d.c2;
            let root = if kappa > 0.0 {
                solve_sin_bisection(d_nu / kappa)
            } else {
                None
            };
            let d_inf = root.unwrap_or(f64::NAN);
            let mk_upper = d_inf / (4.0 * d_inf.sin());
            v.set("c2_0", c2);
            v.set("d_inf_1", d_inf);
            v.set("m_kappa_upper", mk_upper);
            v.set("kappa", kappa);
            v.satisfied = unit_friction
                && d_nu > 0.0
                && d_nu < kappa
                && root.is_some()
                && mk > 0.0
                && mk < mk_upper
                && c2 > 0.0
                && c2 < d_inf;
            if root.is_none() {
                v.notes.push("D(nu)/kappa outside (0, 1]: no root".into());
            }
        }
        Framework::T33 => {
            let c2 = d.c2;
            v.set("c2_0", c2);
            v.set("d_nu_upper", PI / (8.0 * m));
            v.set("m_kappa_lower", PI / 8.0);
            v.set("c2_upper", 4.0 * m * d_nu);
            v.satisfied = unit_friction
                && d_nu > 0.0
                && d_nu < PI / (8.0 * m)
                && mk >= PI / 8.0
                && c2 > 0.0
                && c2 < 4.0 * m * d_nu;
        }
    }
    Ok(v)
}

/// Every applicable verdict for a parameter set; inapplicable ones are skipped.
pub fn all_verdicts(init: &OscillatorEnsemble, params: &ModelParams) -> Vec<ConditionVerdict> {
    let mut out = Vec::new();
    for f in [Framework::T31, Framework::T32, Framework::T33] {
        if let Ok(v) = check_small_large_inertia(init, params, f) {
            out.push(v);
        }
    }
    if let Ok(v) = check_theorem34(init, params) {
        out.push(v);
    }
    if let ModelVariant::HeterogeneousNetwork = params.variant() {
        if let Ok(v) = check_theorem35(init, params, None) {
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LockKind {
    OnePointCluster,
    Bipolar,
    ZeroOrderParameter,
    Unclassified,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LockClassification {
    pub kind: LockKind,
    /// Size of the cluster at `phi_star` (0 when no two-pole structure was found).
    pub k: usize,
    pub phi_star: f64,
    /// Largest angular distance of a phase to the nearer pole.
    pub residual: f64,
}

fn pole_deviation(t: f64, pole: f64) -> f64 {
    circle_distance(t, pole).min(circle_distance(t, pole + PI))
}

/// Classify a phase configuration as a one-point cluster, a bipolar
/// `(N−k, k)` state, a zero-order-parameter state, or none of these.
pub fn classify_lock(theta: &[f64], tol_angle: f64) -> Result<LockClassification> {
    if theta.is_empty() {
        return Err(Error::Empty);
    }
    crate::error::check_finite("theta", theta)?;
    if !(tol_angle > 0.0 && tol_angle < PI / 4.0) {
        return Err(Error::InvalidParameter {
            name: "tol_angle",
            reason: format!("must lie in (0, π/4), got {tol_angle}"),
        });
    }
    let n = theta.len();
    let wrapped: Vec<f64> = theta.iter().map(|&t| wrap_to_pi(t)).collect();

    let mut best = (f64::INFINITY, f64::INFINITY, 0.0);
    for &c in &wrapped {
        for pole in [c, wrap_to_pi(c + PI)] {
            let mut total = 0.0;
            let mut worst: f64 = 0.0;
            for &t in &wrapped {
                let d = pole_deviation(t, pole);
                total += d;
                worst = worst.max(d);
            }
            if total < best.0 {
                best = (total, worst, pole);
            }
        }
    }
    let (_, worst, pole) = best;

    if worst <= tol_angle {
        let near: Vec<bool> = wrapped
            .iter()
            .map(|&t| circle_distance(t, pole) <= circle_distance(t, pole + PI))
            .collect();
        let mut k = near.iter().filter(|&&b| b).count();
        let mut majority_near = true;
        if 2 * k < n {
            k = n - k;
            majority_near = false;
        }
        if 2 * k > n {
            let (mut sx, mut sy) = (0.0, 0.0);
            for (&t, &is_near) in wrapped.iter().zip(&near) {
                let aligned = if is_near == majority_near { t } else { t - PI };
                sx += aligned.cos();
                sy += aligned.sin();
            }
            let phi_star = sy.atan2(sx);
            let residual = wrapped
                .iter()
                .map(|&t| pole_deviation(t, phi_star))
                .fold(0.0, f64::max);
            let kind = if k == n {
                LockKind::OnePointCluster
            } else {
                LockKind::Bipolar
            };
            return Ok(LockClassification {
                kind,
                k,
                phi_star,
                residual,
            });
        }
    }
    let g = global_order(theta)?;
    let kind = if g.r_p < EPS_R {
        LockKind::ZeroOrderParameter
    } else {
        LockKind::Unclassified
    };
    Ok(LockClassification {
        kind,
        k: 0,
        phi_star: g.phi_p,
        residual: worst,
    })
}

/// Start of the final run of samples with `max_{i,j} |ω_i − ω_j| ≤ tol_freq`,
/// provided that run lasts at least `hold_time`.
pub fn detect_sync(traj: &Trajectory, tol_freq: f64, hold_time: f64) -> Option<f64> {
    let spreads: Vec<f64> = traj.states().iter().map(|s| diameter(s.omega())).collect();
    detect_sync_series(traj.times(), &spreads, tol_freq, hold_time)
}

/// [`detect_sync`] on precomputed frequency spreads.
pub fn detect_sync_series(times: &[f64], spreads: &[f64], tol_freq: f64, hold_time: f64) -> Option<f64> {
    let last = *times.last()?;
    let start = spreads.iter().rposition(|&s| !(s <= tol_freq)).map_or(0, |i| i + 1);
    if start >= times.len() {
        return None;
    }
    let t0 = times[start];
    (last - t0 >= hold_time).then_some(t0)
}

pub const DEFAULT_HOLD_TIME: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares fit of `log y = a − Λ t` over samples with `t` in `window`.
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    check_len("values", times.len(), values.len())?;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("needs at least two samples, found {}", pts.len()),
        });
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: format!("sample {v} at t = {t} is not positive"),
        });
    }
    let k = pts.len() as f64;
    // Logs are taken relative to the first sample so a constant series is exactly flat.
    let base = pts[0].1.ln();
    let logs: Vec<f64> = pts.iter().map(|p| p.1.ln() - base).collect();
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((t, _), l) in pts.iter().zip(&logs) {
        let (dx, dy) = (t - mt, l - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: "all samples share one time".into(),
        });
    }
    let slope = sxy / sxx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(DecayFit {
        rate: -slope,
        r2,
        window,
        samples: pts.len(),
    })
}

/// `y0 e^{−αt} + (1/α) max_{s∈[t/2,t]} |β(s)| + (‖β‖_∞/α) e^{−αt/2}` on the grid.
///
/// `t_grid` must be nondecreasing; the window maximum uses the samples whose
/// times fall in `[t/2, t]`.
pub fn gronwall_envelope(y0: f64, alpha: f64, beta: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be positive, got {alpha}"),
        });
    }
    check_len("beta", t_grid.len(), beta.len())?;
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            reason: "must be nondecreasing".into(),
        });
    }
    let abs: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    let sup = abs.iter().cloned().fold(0.0, f64::max);

    // Sliding maximum: both window ends move forward monotonically.
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut lo = 0;
    let mut out = Vec::with_capacity(t_grid.len());
    for (idx, &t) in t_grid.iter().enumerate() {
        while window.back().is_some_and(|&j| abs[j] <= abs[idx]) {
            window.pop_back();
        }
        window.push_back(idx);
        while t_grid[lo] < 0.5 * t {
            lo += 1;
        }
        while window.front().is_some_and(|&j| j < lo) {
            window.pop_front();
        }
        let local = window.front().map_or(0.0, |&j| abs[j]);
        out.push(y0 * (-alpha * t).exp() + local / alpha + sup / alpha * (-0.5 * alpha * t).exp());
    }
    Ok(out)
}

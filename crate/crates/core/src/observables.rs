//! Order parameters, energies, diameters and the frequency functional.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{check_finite, check_len, Error, Result};
use crate::model::{coupling, weighted_one_minus_cos, Capacity, ModelParams, ModelVariant, OscillatorEnsemble};

/// Below this modulus an order parameter's phase is reported as 0 and flagged.
pub const EPS_R: f64 = 1e-8;

/// Wrap an angle to `(−π, π]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Geodesic distance on the circle, in `[0, π]`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    // fmod is exact and |a − b| is symmetric, so d(a, b) == d(b, a) bitwise
    let r = (a - b).abs() % (2.0 * PI);
    r.min(2.0 * PI - r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlobalOrder {
    pub r_p: f64,
    pub phi_p: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderParams {
    pub r_p: f64,
    pub phi_p: f64,
    pub r_local: Vec<f64>,
    pub phi_local: Vec<f64>,
    pub degenerate_global: bool,
    pub degenerate_local: Vec<bool>,
}

fn polar(re: f64, im: f64, eps_r: f64) -> (f64, f64, bool) {
    let r = re.hypot(im);
    if r < eps_r {
        (r, 0.0, true)
    } else {
        (r, im.atan2(re), false)
    }
}

/// Modulus and argument of `(1/N) Σ e^{iθ_j}`.
pub fn global_order(theta: &[f64]) -> Result<GlobalOrder> {
    global_order_eps(theta, EPS_R)
}

pub fn global_order_eps(theta: &[f64], eps_r: f64) -> Result<GlobalOrder> {
    if theta.is_empty() {
        return Err(Error::Empty);
    }
    check_finite("theta", theta)?;
    let n = theta.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for t in theta {
        let (s, c) = t.sin_cos();
        re += c;
        im += s;
    }
    let (r, phi, degenerate) = polar(re / n, im / n, eps_r);
    Ok(GlobalOrder {
        r_p: r.min(1.0),
        phi_p: phi,
        degenerate,
    })
}

/// Per-oscillator modulus and argument of `Σ_j a_ij e^{iθ_j}`.
pub fn local_order(theta: &[f64], capacity: &Capacity) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    local_order_eps(theta, capacity, EPS_R)
}

pub fn local_order_eps(
    theta: &[f64],
    capacity: &Capacity,
    eps_r: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    check_len("theta", capacity.n(), theta.len())?;
    check_finite("theta", theta)?;
    let n = theta.len();
    let (sin, cos): (Vec<f64>, Vec<f64>) = theta.iter().map(|t| t.sin_cos()).unzip();
    let mut a_sin = vec![0.0; n];
    let mut a_cos = vec![0.0; n];
    capacity.mat_vec(&sin, &mut a_sin);
    capacity.mat_vec(&cos, &mut a_cos);
    let mut r = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for i in 0..n {
        let (ri, pi, fi) = polar(a_cos[i], a_sin[i], eps_r);
        r.push(ri);
        phi.push(pi);
        flags.push(fi);
    }
    Ok((r, phi, flags))
}

pub fn order_params(theta: &[f64], capacity: &Capacity) -> Result<OrderParams> {
    let g = global_order(theta)?;
    let (r_local, phi_local, degenerate_local) = local_order(theta, capacity)?;
    Ok(OrderParams {
        r_p: g.r_p,
        phi_p: g.phi_p,
        r_local,
        phi_local,
        degenerate_global: g.degenerate,
        degenerate_local,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyVariant {
    Homogeneous,
    Heterogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub e_k: f64,
    pub e_p: f64,
    pub e: f64,
    pub variant: EnergyVariant,
}

/// Kinetic and interaction energy.
///
/// Both variants use `½ Σ m_i ω_i²` and `(κ/2) Σ a_ij (1 − cos(θ_i − θ_j))`;
/// with equal masses and `a_ij = 1/N` these are the homogeneous energies.
pub fn energies(state: &OscillatorEnsemble, params: &ModelParams) -> Result<EnergyReport> {
    params.check_state(state)?;
    let e_k = 0.5
        * params
            .masses()
            .iter()
            .zip(state.omega())
            .map(|(m, w)| m * w * w)
            .sum::<f64>();
    let e_p = 0.5 * params.kappa() * weighted_one_minus_cos(state.theta(), params.capacity());
    let variant = match params.variant() {
        ModelVariant::HomogeneousAllToAll { .. } => EnergyVariant::Homogeneous,
        ModelVariant::HeterogeneousNetwork => EnergyVariant::Heterogeneous,
    };
    Ok(EnergyReport {
        e_k,
        e_p,
        e: e_k + e_p,
        variant,
    })
}

/// `(κN/2)(1 − R_p²)`, the all-to-all potential energy through the order parameter.
pub fn potential_energy_order_form(theta: &[f64], kappa: f64) -> Result<f64> {
    let g = global_order(theta)?;
    let n = theta.len() as f64;
    Ok(0.5 * kappa * n * (1.0 - g.r_p * g.r_p))
}

/// `max{E_K(0), m²κ²N/(4γ²)}`, the uniform kinetic-energy bound for centered
/// homogeneous all-to-all runs.
pub fn kinetic_energy_bound(e_k0: f64, m: f64, gamma: f64, kappa: f64, n: usize) -> f64 {
    e_k0.max(m * m * kappa * kappa * n as f64 / (4.0 * gamma * gamma))
}

/// Energy dissipation rate `dE/dt = −Σ γ_i ω_i²`.
pub fn dissipation_rate(state: &OscillatorEnsemble, params: &ModelParams) -> Result<f64> {
    params.check_state(state)?;
    Ok(-params
        .frictions()
        .iter()
        .zip(state.omega())
        .map(|(g, w)| g * w * w)
        .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiameterReport {
    pub d_theta: f64,
    pub d_omega: f64,
    pub d_dot: f64,
    pub c1: f64,
    pub c2: f64,
    pub d_nu: f64,
    /// Several oscillators share the extreme phase, so `d_dot` is one-sided.
    pub max_tied: bool,
}

fn argmax_min(x: &[f64]) -> (usize, usize, bool) {
    let (mut imax, mut imin) = (0, 0);
    for (i, &v) in x.iter().enumerate() {
        if v > x[imax] {
            imax = i;
        }
        if v < x[imin] {
            imin = i;
        }
    }
    let tied = x.iter().filter(|&&v| v == x[imax]).count() > 1
        || x.iter().filter(|&&v| v == x[imin]).count() > 1;
    (imax, imin, tied)
}

/// `max_{i,j} |x_i − x_j|`.
pub fn diameter(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (hi, lo) = x
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), &v| (h.max(v), l.min(v)));
    hi - lo
}

/// `C_ℓ = max{D, D + ℓ m Ḋ}`.
pub fn c_ell(d_theta: f64, d_dot: f64, m: f64, ell: f64) -> f64 {
    d_theta.max(d_theta + ell * m * d_dot)
}

/// Phase and frequency diameters, `Ḋ` and `C₁`, `C₂`.
///
/// `C_ℓ` uses the common mass; for unequal masses the largest one is used.
pub fn diameters(state: &OscillatorEnsemble, params: &ModelParams) -> Result<DiameterReport> {
    params.check_state(state)?;
    let theta = state.theta();
    let omega = state.omega();
    let (imax, imin, max_tied) = argmax_min(theta);
    let d_theta = theta[imax] - theta[imin];
    let d_dot = omega[imax] - omega[imin];
    let m = params.masses().iter().cloned().fold(0.0, f64::max);
    Ok(DiameterReport {
        d_theta,
        d_omega: diameter(omega),
        d_dot,
        c1: c_ell(d_theta, d_dot, m, 1.0),
        c2: c_ell(d_theta, d_dot, m, 2.0),
        d_nu: diameter(params.natural_freqs()),
        max_tied,
    })
}

/// `F = ½ Σ_i (γ_i ω_i − ν_i − κ Σ_j a_ij sin(θ_j − θ_i))²`, i.e. `½ Σ (m_i ω̇_i)²`.
pub fn freq_functional(state: &OscillatorEnsemble, params: &ModelParams) -> Result<f64> {
    params.check_state(state)?;
    let c = coupling(state.theta(), params)?;
    Ok(0.5
        * (0..state.n())
            .map(|i| {
                let v = params.frictions()[i] * state.omega()[i] - params.natural_freqs()[i] - c[i];
                v * v
            })
            .sum::<f64>())
}

/// [`freq_functional`] through local order parameters:
/// `κ Σ_j a_ij sin(θ_j − θ_i) = −κ R_{p,i} sin(θ_i − φ_{p,i})`.
pub fn freq_functional_order_form(state: &OscillatorEnsemble, params: &ModelParams) -> Result<f64> {
    params.check_state(state)?;
    let (r, phi, _) = local_order_eps(state.theta(), params.capacity(), 0.0)?;
    let k = params.kappa();
    Ok(0.5
        * (0..state.n())
            .map(|i| {
                let v = params.frictions()[i] * state.omega()[i] - params.natural_freqs()[i]
                    + k * r[i] * (state.theta()[i] - phi[i]).sin();
                v * v
            })
            .sum::<f64>())
}

/// `(Σ_{i,j} cos(θ_i − θ_j), (N R_p)²)`.
pub fn cosine_sum_identity(theta: &[f64]) -> Result<(f64, f64)> {
    let g = global_order(theta)?;
    let mut lhs = 0.0;
    for a in theta {
        for b in theta {
            lhs += (a - b).cos();
        }
    }
    let nr = theta.len() as f64 * g.r_p;
    Ok((lhs, nr * nr))
}

/// `θ_s = (1/N) Σ γ_i θ_i` and `ω_s = (1/N) Σ m_i ω_i`.
pub fn weighted_averages(state: &OscillatorEnsemble, params: &ModelParams) -> Result<(f64, f64)> {
    params.check_state(state)?;
    let n = state.n() as f64;
    let ts = params.frictions().iter().zip(state.theta()).map(|(g, t)| g * t).sum::<f64>() / n;
    let ws = params.masses().iter().zip(state.omega()).map(|(m, w)| m * w).sum::<f64>() / n;
    Ok((ts, ws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, IntegratorConfig, Scheme};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn global_order_examples() {
        let g = global_order(&[1.3; 5]).unwrap();
        assert!(close(g.r_p, 1.0, 1e-15) && close(g.phi_p, 1.3, 1e-15) && !g.degenerate);
        for n in 2..12 {
            let s = OscillatorEnsemble::splay(n).unwrap();
            let g = global_order(s.theta()).unwrap();
            assert!(g.r_p <= 1e-12 && g.degenerate && g.phi_p == 0.0);
        }
        let g = global_order(&[0.0, PI / 2.0]).unwrap();
        assert!(close(g.r_p, 2f64.sqrt() / 2.0, 1e-15));
        assert!(close(g.phi_p, PI / 4.0, 1e-15));
        assert!(matches!(global_order(&[]), Err(Error::Empty)));
    }

    #[test]
    fn local_order_examples() {
        let theta = [0.1, 2.0, -1.0, 0.5];
        let g = global_order(&theta).unwrap();
        let (r, phi, _) = local_order(&theta, &Capacity::all_to_all(4)).unwrap();
        for i in 0..4 {
            assert!(close(r[i], g.r_p, 1e-14) && close(phi[i], g.phi_p, 1e-14));
        }
        let cap = Capacity::from_rows(&[vec![0.0, 0.2, 0.3], vec![0.2, 0.5, 0.1], vec![0.3, 0.1, 0.0]]).unwrap();
        let (r, _, _) = local_order(&[0.7; 3], &cap).unwrap();
        for i in 0..3 {
            assert!(close(r[i], cap.row_sum(i), 1e-15));
        }
    }

    #[test]
    fn energy_examples() {
        let p = ModelParams::all_to_all(3, 1.0, 1.0, 2.0).unwrap();
        let e = energies(&OscillatorEnsemble::at_rest(vec![0.4; 3]).unwrap(), &p).unwrap();
        assert_eq!((e.e_k, e.e_p, e.e), (0.0, 0.0, 0.0));
        assert_eq!(e.variant, EnergyVariant::Homogeneous);

        let p = ModelParams::all_to_all(2, 2.0, 1.0, 1.0).unwrap();
        let e = energies(&OscillatorEnsemble::new(vec![0.0, 0.0], vec![1.0, -1.0]).unwrap(), &p).unwrap();
        assert_eq!((e.e_k, e.e_p), (2.0, 0.0));

        let p = ModelParams::all_to_all(4, 1.0, 1.0, 1.0).unwrap();
        let s = OscillatorEnsemble::splay(4).unwrap();
        let e = energies(&s, &p).unwrap();
        let alt = potential_energy_order_form(s.theta(), 1.0).unwrap();
        assert!(close(e.e_p, 2.0, 1e-12) && close(alt, 2.0, 1e-12));
    }

    #[test]
    fn diameter_examples() {
        let p = ModelParams::all_to_all(2, 1.0, 1.0, 1.0).unwrap();
        let d = diameters(&OscillatorEnsemble::new(vec![0.0, 1.0], vec![2.0, 0.0]).unwrap(), &p).unwrap();
        assert_eq!((d.d_theta, d.d_dot, d.c1), (1.0, -2.0, 1.0));
        assert_eq!(d.c2, 1.0);
        assert_eq!(d.d_omega, 2.0);

        let d = diameters(&OscillatorEnsemble::new(vec![0.5, 0.5], vec![0.0, 3.0]).unwrap(), &p).unwrap();
        assert_eq!(d.d_theta, 0.0);
        assert!(d.max_tied);
        assert_eq!(d.c1, 0.0f64.max(d.d_dot));
    }

    #[test]
    fn functional_examples() {
        let p = ModelParams::all_to_all(5, 1.0, 1.0, 1.0).unwrap();
        let s = OscillatorEnsemble::splay(5).unwrap();
        assert!(freq_functional(&s, &p).unwrap() < 1e-28);
        let p1 = ModelParams::new(vec![2.0], vec![1.5], vec![0.0], 0.0, Capacity::all_to_all(1)).unwrap();
        let s1 = OscillatorEnsemble::new(vec![0.3], vec![0.8]).unwrap();
        assert!(close(freq_functional(&s1, &p1).unwrap(), 0.5 * 1.5 * 1.5 * 0.64, 1e-15));
    }

    #[test]
    fn cosine_identity_examples() {
        let (l, r) = cosine_sum_identity(&[0.2; 6]).unwrap();
        assert!(close(l, 36.0, 1e-14) && close(r, 36.0, 1e-14));
        let s = OscillatorEnsemble::splay(7).unwrap();
        let (l, r) = cosine_sum_identity(s.theta()).unwrap();
        assert!(l.abs() < 1e-10 && r.abs() < 1e-10);
    }

    #[test]
    fn weighted_average_examples() {
        let p = ModelParams::all_to_all(3, 1.0, 1.0, 1.0).unwrap();
        let s = OscillatorEnsemble::new(vec![1.0, 2.0, 6.0], vec![0.0, 3.0, 0.0]).unwrap();
        assert_eq!(weighted_averages(&s, &p).unwrap(), s.means());
        let rest = OscillatorEnsemble::at_rest(vec![1.0, 2.0, 6.0]).unwrap();
        assert_eq!(weighted_averages(&rest, &p).unwrap().1, 0.0);
    }

    #[test]
    fn weighted_sum_conserved_heterogeneous() {
        let p = ModelParams::new(
            vec![0.5, 1.0, 1.5],
            vec![0.8, 1.0, 1.2],
            vec![0.0; 3],
            1.0,
            Capacity::from_rows(&[vec![0.0, 0.4, 0.2], vec![0.4, 0.0, 0.3], vec![0.2, 0.3, 0.0]]).unwrap(),
        )
        .unwrap();
        let s = OscillatorEnsemble::new(vec![0.0, 1.0, -0.5], vec![0.3, -0.2, 0.5]).unwrap();
        let c = IntegratorConfig::new(1e-3, 10.0, 10, Scheme::Rk4).unwrap();
        let traj = simulate(&s, &p, &c).unwrap();
        let (t0, w0) = weighted_averages(&s, &p).unwrap();
        for st in traj.states() {
            let (t, w) = weighted_averages(st, &p).unwrap();
            assert!(((t + w) - (t0 + w0)).abs() < 1e-6);
        }
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_to_pi(PI), PI);
        assert!(close(wrap_to_pi(-PI), PI, 1e-15));
        assert!(close(wrap_to_pi(3.0 * PI / 2.0), -PI / 2.0, 1e-15));
        assert!(close(circle_distance(0.1, 2.0 * PI - 0.1), 0.2, 1e-14));
    }

    fn network(n: usize, w: &[f64]) -> Capacity {
        let mut e = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                e[i * n + j] = w[k % w.len()];
                e[j * n + i] = e[i * n + j];
                k += 1;
            }
        }
        Capacity::from_row_major(n, e).unwrap()
    }

    proptest! {
        #[test]
        fn sine_sum_vanishes(theta in prop::collection::vec(-10.0..10.0f64, 1..16)) {
            let g = global_order(&theta).unwrap();
            prop_assume!(g.r_p > 1e-8);
            let s: f64 = theta.iter().map(|t| (t - g.phi_p).sin()).sum();
            prop_assert!(s.abs() <= 1e-10);
        }

        #[test]
        fn cosine_sum_matches(theta in prop::collection::vec(-10.0..10.0f64, 1..16)) {
            let (l, r) = cosine_sum_identity(&theta).unwrap();
            prop_assert!((l - r).abs() <= 1e-10 * l.abs().max(theta.len() as f64));
        }

        #[test]
        fn local_identities(
            theta in prop::collection::vec(-PI..PI, 2..16),
            w in prop::collection::vec(0.0..1.0f64, 1..30),
        ) {
            let n = theta.len();
            let cap = network(n, &w);
            let (r, phi, _) = local_order_eps(&theta, &cap, 0.0).unwrap();
            for i in 0..n {
                let c: f64 = (0..n).map(|j| cap.get(i, j) * (theta[j] - theta[i]).cos()).sum();
                let s: f64 = (0..n).map(|j| cap.get(i, j) * (theta[j] - theta[i]).sin()).sum();
                prop_assert!((r[i] * (phi[i] - theta[i]).cos() - c).abs() <= 1e-12 * cap.row_sum(i).max(1.0));
                prop_assert!((r[i] * (phi[i] - theta[i]).sin() - s).abs() <= 1e-12 * cap.row_sum(i).max(1.0));
                prop_assert!(r[i] <= cap.row_sum(i) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn potential_energy_two_forms(
            theta in prop::collection::vec(-PI..PI, 1..16),
            kappa in 0.1..5.0f64,
        ) {
            let n = theta.len();
            let p = ModelParams::all_to_all(n, 1.0, 1.0, kappa).unwrap();
            let e = energies(&OscillatorEnsemble::at_rest(theta.clone()).unwrap(), &p).unwrap();
            let alt = potential_energy_order_form(&theta, kappa).unwrap();
            prop_assert!((e.e_p - alt).abs() <= 1e-10 * e.e_p.max(alt).max(1e-3));
            prop_assert!(e.e_p <= kappa * n as f64 / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn functional_two_forms(
            theta in prop::collection::vec(-PI..PI, 2..16),
            omega in prop::collection::vec(-2.0..2.0f64, 16),
            w in prop::collection::vec(0.0..1.0f64, 1..30),
        ) {
            let n = theta.len();
            let p = ModelParams::new(vec![1.0; n], vec![0.9; n], vec![0.0; n], 1.7, network(n, &w)).unwrap();
            let s = OscillatorEnsemble::new(theta, omega[..n].to_vec()).unwrap();
            let a = freq_functional(&s, &p).unwrap();
            let b = freq_functional_order_form(&s, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            let d = crate::model::rhs(&s, &p).unwrap();
            let c: f64 = 0.5 * d.domega.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((a - c).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn diameters_translation_invariant(
            theta in prop::collection::vec(-5.0..5.0f64, 1..12),
            shift in -50.0..50.0f64,
        ) {
            let n = theta.len();
            let p = ModelParams::all_to_all(n, 1.0, 1.0, 1.0).unwrap();
            let a = diameters(&OscillatorEnsemble::at_rest(theta.clone()).unwrap(), &p).unwrap();
            let b = diameters(&OscillatorEnsemble::at_rest(theta.iter().map(|t| t + shift).collect()).unwrap(), &p).unwrap();
            prop_assert!((a.d_theta - b.d_theta).abs() <= 1e-12 * shift.abs().max(1.0));
            prop_assert!(a.c1 >= a.d_theta && a.c2 >= a.d_theta);
        }
    }
}

//! Acceptance scenarios S1–S10. Each prints one `PASS`/`FAIL` line with the
//! measured quantities; the test fails if any scenario fails.

use std::f64::consts::PI;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kuramoto_core::integrator::frequency_bounds;
use kuramoto_core::meanfield::{
    meanfield_convergence_experiment, sample_initial, solve_assignment, stability_experiment, support_bound,
    wasserstein2, ConvergenceOptions, EmpiricalMeasure, InitialDistribution, KineticParams, StabilityOptions,
};
use kuramoto_core::model::{equilibrium_residual, grad_potential, potential};
use kuramoto_core::observables::{
    cosine_sum_identity, diameter, diameters, dissipation_rate, energies, freq_functional, global_order,
    kinetic_energy_bound, local_order, potential_energy_order_form,
};
use kuramoto_core::sync::{
    check_theorem34, check_theorem35, classify_lock, detect_sync_series, gronwall_envelope, LockKind,
};
use kuramoto_core::{simulate, simulate_with, Capacity, IntegratorConfig, ModelParams, OscillatorEnsemble, Scheme};

const DT: f64 = 1e-3;
const SYNC_TOL: f64 = 1e-6;
const MONITOR_SLACK: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn rk4(dt: f64, t_final: f64, sample_every: usize) -> IntegratorConfig {
    IntegratorConfig::new(dt, t_final, sample_every, Scheme::Rk4).unwrap()
}

/// Per-oscillator frequency bound and the `max{|ω|, mκ}` support bound,
/// tracked over every step.
struct BoundMonitor {
    freq: Vec<f64>,
    support: f64,
    freq_excess: f64,
    support_excess: f64,
}

impl BoundMonitor {
    fn new(init: &OscillatorEnsemble, params: &ModelParams) -> Self {
        let omega_max = init.omega().iter().fold(0.0f64, |a, w| a.max(w.abs()));
        let m = params.masses().iter().cloned().fold(0.0, f64::max);
        Self {
            freq: frequency_bounds(init, params).unwrap(),
            support: support_bound(omega_max, m, params.kappa()),
            freq_excess: f64::NEG_INFINITY,
            support_excess: f64::NEG_INFINITY,
        }
    }

    fn observe(&mut self, s: &OscillatorEnsemble) {
        for (w, b) in s.omega().iter().zip(&self.freq) {
            self.freq_excess = self.freq_excess.max(w.abs() - b);
            self.support_excess = self.support_excess.max(w.abs() - self.support);
        }
    }

    fn merge(&mut self, other: &BoundMonitor) {
        self.freq_excess = self.freq_excess.max(other.freq_excess);
        self.support_excess = self.support_excess.max(other.support_excess);
    }

    fn freq_ok(&self) -> bool {
        self.freq_excess <= MONITOR_SLACK
    }

    fn support_ok(&self) -> bool {
        self.support_excess <= MONITOR_SLACK
    }
}

/// Per-step energy balance `ΔE + ∫ Σ γ_i ω_i² dt` (trapezoidal in time).
struct EnergyBalance {
    prev: Option<(f64, f64, f64)>,
    e0: f64,
    max_residual: f64,
}

impl EnergyBalance {
    fn new() -> Self {
        Self {
            prev: None,
            e0: f64::NAN,
            max_residual: 0.0,
        }
    }

    fn observe(&mut self, t: f64, e: f64, dissipation: f64) {
        if let Some((t0, e_prev, d_prev)) = self.prev {
            let r = (e - e_prev) + 0.5 * (d_prev + dissipation) * (t - t0);
            self.max_residual = self.max_residual.max(r.abs());
        } else {
            self.e0 = e;
        }
        self.prev = Some((t, e, dissipation));
    }

    fn tolerance(&self) -> f64 {
        1e-6 * self.e0.max(1.0)
    }

    fn ok(&self) -> bool {
        self.max_residual <= self.tolerance()
    }
}

struct S1Run {
    sync_time: Option<f64>,
    r_margin: f64,
    kind: LockKind,
    residual: f64,
    f_200: f64,
    t34: bool,
    kappa: f64,
    balance: EnergyBalance,
    kinetic_excess: f64,
    bounds: BoundMonitor,
    runtime: f64,
}

fn s1_initial() -> (OscillatorEnsemble, ModelParams) {
    let n = 16;
    let m = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut omega: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..=0.2)).collect();
    let mean = omega.iter().sum::<f64>() / n as f64;
    omega.iter_mut().for_each(|w| *w -= mean);
    let r0 = global_order(&theta).unwrap().r_p;
    let kappa_star = m / n as f64 * omega.iter().map(|w| w * w).sum::<f64>() / (r0 * r0);
    let params = ModelParams::all_to_all(n, m, 1.0, 4.0 * kappa_star).unwrap();
    (OscillatorEnsemble::new(theta, omega).unwrap(), params)
}

fn run_s1() -> S1Run {
    let (init, params) = s1_initial();
    let n = init.n();
    let (m, gamma, kappa) = (0.5, 1.0, params.kappa());
    let verdict = check_theorem34(&init, &params).unwrap();
    let r_lower = verdict.margin("r_lower").unwrap();

    let clock = Instant::now();
    simulate(&init, &params, &rk4(DT, 200.0, 1000)).unwrap();
    let runtime = clock.elapsed().as_secs_f64();

    let e_k0 = energies(&init, &params).unwrap().e_k;
    let k_bound = kinetic_energy_bound(e_k0, m, gamma, kappa, n);
    let mut times = Vec::new();
    let mut spreads = Vec::new();
    let mut r_margin = f64::INFINITY;
    let mut f_200 = f64::NAN;
    let mut balance = EnergyBalance::new();
    let mut kinetic_excess = f64::NEG_INFINITY;
    let mut bounds = BoundMonitor::new(&init, &params);
    // Run past t = 200 so a later synchronization time is still measured.
    let fin = simulate_with(&init, &params, &rk4(DT, 400.0, 1), |k, t, s| {
        times.push(t);
        spreads.push(diameter(s.omega()));
        r_margin = r_margin.min(global_order(s.theta()).unwrap().r_p - (r_lower - 1e-6));
        let e = energies(s, &params).unwrap();
        balance.observe(t, e.e, -dissipation_rate(s, &params).unwrap());
        kinetic_excess = kinetic_excess.max(e.e_k - k_bound);
        bounds.observe(s);
        if k == 200_000 {
            f_200 = freq_functional(s, &params).unwrap();
        }
    })
    .unwrap();
    let class = classify_lock(fin.theta(), 0.05).unwrap();
    S1Run {
        sync_time: detect_sync_series(&times, &spreads, SYNC_TOL, 0.0),
        r_margin,
        kind: class.kind,
        residual: class.residual,
        f_200,
        t34: verdict.satisfied,
        kappa,
        balance,
        kinetic_excess,
        bounds,
        runtime,
    }
}

fn s1(run: &S1Run) -> Outcome {
    let sync_ok = run.sync_time.is_some_and(|t| t <= 200.0);
    let r_ok = run.r_margin >= 0.0;
    let class_ok = matches!(run.kind, LockKind::OnePointCluster | LockKind::Bipolar) && run.residual <= 1e-3;
    let f_ok = run.f_200 <= 1e-10;
    let time_ok = run.runtime < 5.0;
    Outcome::new(
        run.t34 && sync_ok && r_ok && class_ok && f_ok && time_ok,
        format!(
            "kappa={:.4e} T34={} sync_time={:?} (<=200: {sync_ok}) R_p margin={:.3e} class={:?} residual={:.2e} F(200)={:.3e} runtime={:.2}s",
            run.kappa, run.t34, run.sync_time, run.r_margin, run.kind, run.residual, run.f_200, run.runtime
        ),
    )
}

struct S2Run {
    t35: bool,
    delta: f64,
    sync_time: Option<f64>,
    /// Per convention: (label, worst R_{p,i} margin, worst cosine margin).
    margins: Vec<(&'static str, f64, f64)>,
    balance: EnergyBalance,
    bounds: BoundMonitor,
}

fn s2_initial() -> (OscillatorEnsemble, ModelParams) {
    let n = 12;
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7_310);
    let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=1.5)).collect();
    let frictions: Vec<f64> = (0..n).map(|_| rng.random_range(0.8..=1.2)).collect();
    let a_bar = 1.0 / nf;
    let delta_row = 0.01 / nf;
    let mut a = vec![a_bar; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = a_bar + rng.random_range(-1.0..=1.0) * delta_row / nf;
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect();
    let params = ModelParams::new(
        masses,
        frictions,
        vec![0.0; n],
        1.0,
        Capacity::from_row_major(n, a).unwrap(),
    )
    .unwrap();
    (OscillatorEnsemble::at_rest(theta).unwrap(), params)
}

fn run_s2() -> S2Run {
    let (init, params) = s2_initial();
    let a_bar = 1.0 / init.n() as f64;
    let verdict = check_theorem35(&init, &params, Some(a_bar)).unwrap();
    let delta = verdict.margin("delta").unwrap();
    let conventions: Vec<(&'static str, f64, f64)> = ["half_kappa", "normalized"]
        .into_iter()
        .map(|l| {
            (
                l,
                verdict.margin(&format!("r_local_lower_{l}")).unwrap(),
                verdict.margin(&format!("cos_phase_lower_{l}")).unwrap(),
            )
        })
        .collect();
    let mut margins: Vec<(&'static str, f64, f64)> =
        conventions.iter().map(|c| (c.0, f64::INFINITY, f64::INFINITY)).collect();

    let mut times = Vec::new();
    let mut spreads = Vec::new();
    let mut balance = EnergyBalance::new();
    let mut bounds = BoundMonitor::new(&init, &params);
    simulate_with(&init, &params, &rk4(DT, 300.0, 1), |_, t, s| {
        times.push(t);
        spreads.push(diameter(s.omega()));
        let e = energies(s, &params).unwrap();
        balance.observe(t, e.e, -dissipation_rate(s, &params).unwrap());
        bounds.observe(s);
        let (r, phi, _) = local_order(s.theta(), params.capacity()).unwrap();
        let phi_p = global_order(s.theta()).unwrap().phi_p;
        let r_min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let cos_min = phi.iter().map(|p| (p - phi_p).cos()).fold(f64::INFINITY, f64::min);
        for ((_, r_bound, cos_bound), slot) in conventions.iter().zip(margins.iter_mut()) {
            // NaN bounds (negative radicand) leave NaN margins, which never pass.
            slot.1 = slot.1.min(r_min - (r_bound - 1e-6));
            slot.2 = slot.2.min(cos_min - (cos_bound - 1e-6));
            if r_bound.is_nan() {
                slot.1 = f64::NAN;
            }
            if cos_bound.is_nan() {
                slot.2 = f64::NAN;
            }
        }
    })
    .unwrap();
    S2Run {
        t35: verdict.satisfied,
        delta,
        sync_time: detect_sync_series(&times, &spreads, SYNC_TOL, 0.0),
        margins,
        balance,
        bounds,
    }
}

fn s2(run: &S2Run) -> Outcome {
    let sync_ok = run.sync_time.is_some_and(|t| t <= 300.0);
    let delta_ok = run.delta <= 0.01 / 12.0;
    let holding: Vec<&str> = run
        .margins
        .iter()
        .filter(|(_, r, c)| *r >= 0.0 && *c >= 0.0)
        .map(|m| m.0)
        .collect();
    let margins: Vec<String> = run
        .margins
        .iter()
        .map(|(l, r, c)| format!("{l}: R_pi margin={r:.3e} cos margin={c:.3e}"))
        .collect();
    Outcome::new(
        run.t35 && delta_ok && sync_ok && !holding.is_empty(),
        format!(
            "T35={} delta={:.3e} sync_time={:?} bounds hold under {:?} [{}]",
            run.t35,
            run.delta,
            run.sync_time,
            holding,
            margins.join("; ")
        ),
    )
}

struct S3Run {
    outcome: Outcome,
    trapping_ok: bool,
    trapping_excess: f64,
    bounds: BoundMonitor,
}

fn centered_arc(rng: &mut ChaCha8Rng, n: usize, half: f64, omega: f64) -> OscillatorEnsemble {
    let mut theta: Vec<f64> = (0..n).map(|_| rng.random_range(-half..=half)).collect();
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-omega..=omega)).collect();
    let (tc, wc) = (
        theta.iter().sum::<f64>() / n as f64,
        w.iter().sum::<f64>() / n as f64,
    );
    theta.iter_mut().for_each(|t| *t -= tc);
    w.iter_mut().for_each(|x| *x -= wc);
    OscillatorEnsemble::new(theta, w).unwrap()
}

fn run_s3() -> S3Run {
    let n = 8;
    let params = ModelParams::all_to_all(n, 0.05, 1.0, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let a = centered_arc(&mut rng, n, 0.2, 0.1);
    let b = centered_arc(&mut rng, n, 0.2, 0.1);
    let c1_sum = diameters(&a, &params).unwrap().c1 + diameters(&b, &params).unwrap().c1;

    let options = StabilityOptions {
        fit_window: Some((1.0, 50.0)),
        ..StabilityOptions::default()
    };
    let report = stability_experiment(&a, &b, &params, &rk4(DT, 50.0, 100), &options).unwrap();
    let fit = report.decay_fit;
    let fit_ok = fit.is_some_and(|f| f.rate > 0.0 && f.r2 >= 0.99);
    let h = &report.hypotheses;
    let hyp_ok = c1_sum <= 1.0 && h.gamma > 0.5 && h.m_kappa <= h.gamma_tilde && h.satisfied;

    let mut bounds = BoundMonitor::new(&a, &params);
    let mut other = BoundMonitor::new(&b, &params);
    simulate_with(&a, &params, &rk4(DT, 50.0, 1), |_, _, s| bounds.observe(s)).unwrap();
    simulate_with(&b, &params, &rk4(DT, 50.0, 1), |_, _, s| other.observe(s)).unwrap();
    bounds.merge(&other);

    S3Run {
        outcome: Outcome::new(
            hyp_ok && report.monotone && fit_ok,
            format!(
                "C1+C1~={c1_sum:.4} m*kappa={:.3} Gamma~={:.4} eps={:.4} monotone={} max_increase={:.2e} fit={:?} C3_pred={:.3e}",
                h.m_kappa,
                h.gamma_tilde,
                report.epsilon,
                report.monotone,
                report.max_increase,
                fit.map(|f| (f.rate, f.r2)),
                report.c3_predicted
            ),
        ),
        trapping_ok: report.trapping_ok,
        trapping_excess: report.trapping_excess,
        bounds,
    }
}

fn s4(s1: &S1Run, s2: &S2Run) -> Outcome {
    let k_ok = s1.kinetic_excess <= MONITOR_SLACK;
    Outcome::new(
        s1.balance.ok() && s2.balance.ok() && k_ok,
        format!(
            "homogeneous balance max={:.3e} (tol {:.1e}); heterogeneous balance max={:.3e} (tol {:.1e}); kinetic bound excess={:.3e}",
            s1.balance.max_residual,
            s1.balance.tolerance(),
            s2.balance.max_residual,
            s2.balance.tolerance(),
            s1.kinetic_excess
        ),
    )
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn s5() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let instances = 200;
    for case in 0..instances {
        let n = rng.random_range(2..=16);
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let omega: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nu: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let kappa = rng.random_range(0.1..3.0);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(0.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let cap = Capacity::from_row_major(n, a).unwrap();
        let net = ModelParams::new(vec![1.0; n], vec![1.0; n], nu, kappa, cap.clone()).unwrap();
        let homo = ModelParams::all_to_all(n, 1.0, 1.0, kappa).unwrap();
        let state = OscillatorEnsemble::new(theta.clone(), omega).unwrap();

        let g = global_order(&theta).unwrap();
        if g.r_p > 1e-8 {
            let s: f64 = theta.iter().map(|t| (t - g.phi_p).sin()).sum();
            if s.abs() > 1e-10 * n as f64 {
                failures.push(format!("B-4-1 case {case}: {s:e}"));
            }
        }
        let (lhs, rhs) = cosine_sum_identity(&theta).unwrap();
        if !rel_close(lhs, rhs, 1e-10) {
            failures.push(format!("B-4-2 case {case}: {lhs} vs {rhs}"));
        }
        let (r, phi, _) = local_order(&theta, &cap).unwrap();
        for i in 0..n {
            let (mut c, mut s) = (0.0, 0.0);
            for j in 0..n {
                c += cap.get(i, j) * (theta[j] - theta[i]).cos();
                s += cap.get(i, j) * (theta[j] - theta[i]).sin();
            }
            let scale = cap.row_sum(i);
            if (r[i] * (phi[i] - theta[i]).cos() - c).abs() > 1e-10 * scale.max(1.0)
                || (r[i] * (phi[i] - theta[i]).sin() - s).abs() > 1e-10 * scale.max(1.0)
            {
                failures.push(format!("F-3-2 case {case} i={i}"));
            }
        }
        let e_p = energies(&state, &homo).unwrap().e_p;
        let e_p_order = potential_energy_order_form(&theta, kappa).unwrap();
        if !rel_close(e_p, e_p_order, 1e-10) {
            failures.push(format!("E_P forms case {case}: {e_p} vs {e_p_order}"));
        }
        let grad = grad_potential(&theta, &net).unwrap();
        let res = equilibrium_residual(&theta, &net).unwrap();
        if grad.iter().zip(&res).any(|(g, r)| !rel_close(*g, -r, 1e-10)) {
            failures.push(format!("grad/residual case {case}"));
        }
        let h = 1e-6;
        for i in 0..n {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (potential(&plus, &net).unwrap() - potential(&minus, &net).unwrap()) / (2.0 * h);
            if !rel_close(fd, grad[i], 1e-6) {
                failures.push(format!("finite difference case {case} i={i}: {fd} vs {}", grad[i]));
            }
        }
    }
    let runtime = clock.elapsed().as_secs_f64();
    Outcome::new(
        failures.is_empty() && runtime < 1.0,
        format!(
            "{instances} instances, {} failures {:?} runtime={runtime:.3}s",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> EmpiricalMeasure {
    EmpiricalMeasure::new(
        (0..n)
            .map(|_| (rng.random_range(0.0..2.0 * PI), rng.random_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap()
}

fn s6() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let perms: Vec<Vec<Vec<usize>>> = (0..=8).map(permutations).collect();
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
        let got = solve_assignment(n, &cost).unwrap().cost;
        let best = perms[n]
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max((got - best).abs());
    }
    let (mut sym_ok, mut ident, mut tri) = (true, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let (a, b, c) = (
            random_measure(&mut rng, n),
            random_measure(&mut rng, n),
            random_measure(&mut rng, n),
        );
        let ab = wasserstein2(&a, &b).unwrap();
        sym_ok &= ab == wasserstein2(&b, &a).unwrap();
        ident = ident.max(wasserstein2(&a, &a).unwrap());
        let (ac, bc) = (wasserstein2(&a, &c).unwrap(), wasserstein2(&b, &c).unwrap());
        tri = tri.max(ab - (ac + bc)).max(ac - (ab + bc)).max(bc - (ab + ac));
    }
    let runtime = clock.elapsed().as_secs_f64();
    Outcome::new(
        worst_gap <= 1e-12 && sym_ok && ident <= 1e-12 && tri <= 1e-10 && runtime < 5.0,
        format!(
            "assignment vs brute force max gap={worst_gap:.2e}; symmetric={sym_ok} W2(mu,mu) max={ident:.2e} triangle excess max={tri:.2e} runtime={runtime:.2}s"
        ),
    )
}

fn s7() -> (Outcome, BoundMonitor) {
    let dist = InitialDistribution::ArcUniform {
        center: 0.0,
        halfwidth: 0.4,
        omega: 0.0,
    };
    let params = KineticParams {
        mass: 0.05,
        friction: 1.0,
        kappa: 0.5,
    };
    let n_list = [64, 256, 1024];
    let n_ref = 4096;
    let seeds = [1, 2, 3, 4, 5];
    let config = rk4(DT, 50.0, 1000);
    let clock = Instant::now();
    let report =
        meanfield_convergence_experiment(&dist, &n_list, n_ref, &params, &config, &seeds, &ConvergenceOptions::default())
            .unwrap();
    let runtime = clock.elapsed().as_secs_f64();

    let mut bounds: Option<BoundMonitor> = None;
    for &seed in &seeds {
        let reference = sample_initial(&dist, n_ref, seed).unwrap();
        for n in n_list.iter().copied().chain([n_ref]) {
            let (theta, omega) = reference.clone().into_parts();
            let init = OscillatorEnsemble::new(theta[..n].to_vec(), omega[..n].to_vec()).unwrap();
            let model = params.particle_params(n).unwrap();
            let mut mon = BoundMonitor::new(&init, &model);
            simulate_with(&init, &model, &config, |_, _, s| mon.observe(s)).unwrap();
            match bounds.as_mut() {
                Some(b) => b.merge(&mon),
                None => bounds = Some(mon),
            }
        }
    }

    let medians: Vec<String> = report
        .summary
        .iter()
        .map(|s| format!("N={}: {:.4e}", s.n, s.median_sup_w2))
        .collect();
    let ratio_ok = report.ratio_last_first <= 0.5;
    let t36 = report.theorem36.iter().all(|c| c.satisfied);
    (
        Outcome::new(
            report.monotone_decreasing && ratio_ok && runtime < 600.0,
            format!(
                "median sup W2 [{}] strictly decreasing={} ratio(1024/64)={:.3} runtime={runtime:.1}s (limit-bound hypothesis met: {t36})",
                medians.join(", "),
                report.monotone_decreasing,
                report.ratio_last_first
            ),
        ),
        bounds.expect("at least one run"),
    )
}

fn s8() -> (Outcome, BoundMonitor) {
    let params = ModelParams::all_to_all(16, 0.5, 1.0, 0.2).unwrap();
    let splay = OscillatorEnsemble::splay(16).unwrap();
    let mut r_max: f64 = 0.0;
    let mut bounds = BoundMonitor::new(&splay, &params);
    simulate_with(&splay, &params, &rk4(DT, 100.0, 1), |_, _, s| {
        r_max = r_max.max(global_order(s.theta()).unwrap().r_p);
        bounds.observe(s);
    })
    .unwrap();

    let two_pole = sample_initial(
        &InitialDistribution::TwoPole {
            c1: 0.7,
            phi_star: 0.0,
        },
        10,
        0,
    )
    .unwrap();
    let params10 = ModelParams::all_to_all(10, 0.5, 1.0, 0.2).unwrap();
    let mut drift: f64 = 0.0;
    let mut other = BoundMonitor::new(&two_pole, &params10);
    simulate_with(&two_pole, &params10, &rk4(DT, 100.0, 1), |_, _, s| {
        for (x, x0) in s.theta().iter().zip(two_pole.theta()) {
            drift = drift.max((x - x0).abs());
        }
        for w in s.omega() {
            drift = drift.max(w.abs());
        }
        other.observe(s);
    })
    .unwrap();
    bounds.merge(&other);
    (
        Outcome::new(
            r_max <= 1e-8 && drift <= 1e-9,
            format!("splay max R_p={r_max:.3e}; two-pole (7,3) max state drift={drift:.3e}"),
        ),
        bounds,
    )
}

fn s9(runs: &[(&str, &BoundMonitor)], trapping_ok: bool, trapping_excess: f64) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = trapping_ok;
    for (name, b) in runs {
        pass &= b.freq_ok() && b.support_ok();
        parts.push(format!(
            "{name}: freq excess={:.2e} support excess={:.2e} (bound {:.3e})",
            b.freq_excess, b.support_excess, b.support
        ));
    }
    parts.push(format!("S3 trapping ok={trapping_ok} excess={trapping_excess:.2e}"));
    Outcome::new(pass, parts.join("; "))
}

fn s10() -> Outcome {
    let (alpha, y0, dt, t_final) = (2.0, 1.0, 1e-3, 20.0);
    let steps = (t_final / dt) as usize;
    let f = |t: f64, y: f64| -alpha * y + (-t).exp();
    let mut t_grid = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut y = y0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        t_grid.push(t);
        ys.push(y);
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
        let k4 = f(t + dt, y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let beta: Vec<f64> = t_grid.iter().map(|t| (-t).exp()).collect();
    let env = gronwall_envelope(y0, alpha, &beta, &t_grid).unwrap();
    let worst = ys
        .iter()
        .zip(&env)
        .map(|(y, e)| y - e)
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        worst <= 0.0,
        format!("max(y - envelope)={worst:.3e} over {} grid points", t_grid.len()),
    )
}

fn guarded<T>(name: &str, f: impl FnOnce() -> T) -> Result<T, String> {
    catch_unwind(AssertUnwindSafe(f)).map_err(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        format!("{name} panicked: {msg}")
    })
}

#[test]
fn acceptance_criteria() {
    let mut lines: Vec<(String, Outcome)> = Vec::new();
    let mut record = |id: &str, o: Result<Outcome, String>| {
        let o = o.unwrap_or_else(|e| Outcome::new(false, e));
        let line = format!("{id} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        // Written past the test harness capture so the lines appear on success too.
        let _ = writeln!(std::io::stderr().lock(), "{line}");
        lines.push((id.to_string(), o));
    };

    let s1_run = guarded("S1", run_s1);
    let s2_run = guarded("S2", run_s2);
    let s3_run = guarded("S3", run_s3);
    let s7_out = guarded("S7", s7);
    let s8_out = guarded("S8", s8);

    record("S1", s1_run.as_ref().map(s1).map_err(Clone::clone));
    record("S2", s2_run.as_ref().map(s2).map_err(Clone::clone));
    record(
        "S3",
        s3_run
            .as_ref()
            .map(|r| Outcome::new(r.outcome.pass, r.outcome.detail.clone()))
            .map_err(Clone::clone),
    );
    record(
        "S4",
        match (&s1_run, &s2_run) {
            (Ok(a), Ok(b)) => Ok(s4(a, b)),
            _ => Err("S4 needs the S1 and S2 trajectories".into()),
        },
    );
    record("S5", guarded("S5", s5));
    record("S6", guarded("S6", s6));
    record(
        "S7",
        s7_out
            .as_ref()
            .map(|(o, _)| Outcome::new(o.pass, o.detail.clone()))
            .map_err(Clone::clone),
    );
    record(
        "S8",
        s8_out
            .as_ref()
            .map(|(o, _)| Outcome::new(o.pass, o.detail.clone()))
            .map_err(Clone::clone),
    );
    record(
        "S9",
        match (&s1_run, &s2_run, &s3_run, &s7_out, &s8_out) {
            (Ok(a), Ok(b), Ok(c), Ok(d), Ok(e)) => Ok(s9(
                &[
                    ("S1", &a.bounds),
                    ("S2", &b.bounds),
                    ("S3", &c.bounds),
                    ("S7", &d.1),
                    ("S8", &e.1),
                ],
                c.trapping_ok,
                c.trapping_excess,
            )),
            _ => Err("S9 needs every scenario run".into()),
        },
    );
    record("S10", guarded("S10", s10));

    let failed: Vec<&str> = lines.iter().filter(|(_, o)| !o.pass).map(|(id, _)| id.as_str()).collect();
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}

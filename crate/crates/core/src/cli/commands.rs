//! The `run`, `sweep`, `check` and `w2` commands.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentSpec, Format, Monitor, Resolved};
use super::output::{
    csv_escape, fmt_f64, fmt_opt, write_atomic, write_json, AtomicFile, BoundViolation, NamedFit, RunReport,
};
use crate::error::{Error, Result};
use crate::integrator::{frequency_bounds, simulate_with};
use crate::meanfield::{
    kinetic_sync_from_state, meanfield_convergence_experiment, stability_experiment, wasserstein2_auto,
    ConvergenceOptions, EmpiricalMeasure, KineticParams, KineticSyncOptions, StabilityOptions, W2Options,
};
use crate::model::{ModelParams, ModelVariant, OscillatorEnsemble};
use crate::observables::{diameters, energies, freq_functional, global_order, kinetic_energy_bound};
use crate::sync::{
    all_verdicts, classify_lock, detect_sync_series, fit_decay, ConditionVerdict, LockKind, TheoremId,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

pub const OUT_DIR_ENV: &str = "KURAMOTO_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "kuramoto-out";

/// `--out`, then `output.dir`, then `KURAMOTO_OUT_DIR`, then `./kuramoto-out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&ExperimentConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config.and_then(|c| c.output.dir.clone()) {
        return p;
    }
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Headline numbers of one simulation, used by the summary and sweep CSVs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub sync_time: Option<f64>,
    pub final_r_p: f64,
    pub final_d_omega: f64,
    pub verdicts: Vec<String>,
    pub classification: Option<LockKind>,
    pub violations: usize,
}

fn verdict_cells(verdicts: &[ConditionVerdict], enabled: bool) -> Vec<String> {
    TheoremId::ALL
        .iter()
        .map(|id| {
            if !enabled {
                return "n/a".to_string();
            }
            match verdicts.iter().find(|v| v.theorem == *id) {
                Some(v) if v.satisfied => "satisfied".into(),
                Some(_) => "unsatisfied".into(),
                None => "n/a".into(),
            }
        })
        .collect()
}

fn kind_label(k: Option<LockKind>) -> &'static str {
    match k {
        Some(LockKind::OnePointCluster) => "one_point_cluster",
        Some(LockKind::Bipolar) => "bipolar",
        Some(LockKind::ZeroOrderParameter) => "zero_order_parameter",
        Some(LockKind::Unclassified) => "unclassified",
        None => "",
    }
}

struct MonitorState {
    name: Monitor,
    bound: Vec<f64>,
    first: Option<f64>,
    max_excess: f64,
}

impl MonitorState {
    fn new(name: Monitor, bound: Vec<f64>) -> Self {
        Self {
            name,
            bound,
            first: None,
            max_excess: f64::NEG_INFINITY,
        }
    }

    fn observe(&mut self, t: f64, values: impl Iterator<Item = f64>, slack: f64) {
        for (i, v) in values.enumerate() {
            let b = self.bound[i.min(self.bound.len() - 1)];
            let excess = v - b;
            self.max_excess = self.max_excess.max(excess);
            if excess > slack && self.first.is_none() {
                self.first = Some(t);
            }
        }
    }

    fn violation(&self) -> Option<BoundViolation> {
        self.first.map(|t| BoundViolation {
            monitor: self.name.as_str().into(),
            first_violation_time: t,
            max_excess: self.max_excess,
        })
    }
}

fn build_monitors(monitors: &[Monitor], init: &OscillatorEnsemble, params: &ModelParams) -> Result<Vec<MonitorState>> {
    let mut out = Vec::new();
    let n = init.n();
    for &m in monitors {
        let bound = match m {
            Monitor::FrequencyBound => Some(frequency_bounds(init, params)?),
            Monitor::KineticEnergyBound => match params.variant() {
                ModelVariant::HomogeneousAllToAll { m, gamma, nu } if nu == 0.0 => {
                    let e_k0 = energies(init, params)?.e_k;
                    Some(vec![kinetic_energy_bound(e_k0, m, gamma, params.kappa(), n)])
                }
                _ => None,
            },
            Monitor::PotentialEnergyBound => {
                let cap = params.capacity();
                let b = if cap.is_all_to_all() {
                    0.5 * params.kappa() * n as f64
                } else {
                    params.kappa() * (0..n).map(|i| cap.row_sum(i)).sum::<f64>()
                };
                Some(vec![b])
            }
            Monitor::Trapping => {
                let c1 = diameters(init, params)?.c1;
                (c1 < PI).then(|| vec![c1])
            }
            Monitor::SupportBound => params.uniform_inertia().map(|(m, _)| {
                let w0 = init.omega().iter().fold(0.0f64, |a, w| a.max(w.abs()));
                vec![crate::meanfield::support_bound(w0, m, params.kappa())]
            }),
        };
        if let Some(b) = bound {
            out.push(MonitorState::new(m, b));
        }
    }
    Ok(out)
}

fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("theta_{i}")));
    cols.extend((0..n).map(|i| format!("omega_{i}")));
    cols.extend(["R_p", "phi_p", "E_K", "E_P", "D_theta", "D_omega", "F"].map(String::from));
    cols.join(",")
}

/// Simulate one resolved configuration, optionally streaming the trajectory CSV.
pub fn run_single(resolved: &Resolved, mut csv: Option<&mut dyn Write>) -> Result<(RunReport, RunSummary)> {
    let start = Instant::now();
    let mut timings = BTreeMap::new();
    let a = &resolved.config.analyses;
    let (init, params, integ) = (&resolved.init, &resolved.params, &resolved.integrator);
    let verdicts = if a.verdicts { all_verdicts(init, params) } else { Vec::new() };
    let mut monitors = build_monitors(&a.monitors, init, params)?;
    timings.insert("setup".to_string(), start.elapsed().as_secs_f64());

    if let Some(w) = csv.as_deref_mut() {
        writeln!(w, "{}", trajectory_header(init.n()))?;
    }
    let sim_start = Instant::now();
    let every = integ.sample_every;
    let last = integ.total_steps();
    let mut times = Vec::new();
    let mut d_omega = Vec::new();
    let mut e_k = Vec::new();
    let mut r_p = Vec::new();
    let mut failure: Option<Error> = None;
    let slack = a.monitor_slack;
    let final_state = simulate_with(init, params, integ, |k, t, s| {
        if failure.is_some() || !(k % every == 0 || k == last) {
            return;
        }
        let sample = (|| -> Result<()> {
            let g = global_order(s.theta())?;
            let e = energies(s, params)?;
            let d = diameters(s, params)?;
            let f = freq_functional(s, params)?;
            times.push(t);
            d_omega.push(d.d_omega);
            e_k.push(e.e_k);
            r_p.push(g.r_p);
            for m in monitors.iter_mut() {
                match m.name {
                    Monitor::FrequencyBound | Monitor::SupportBound => {
                        m.observe(t, s.omega().iter().map(|w| w.abs()), slack)
                    }
                    Monitor::KineticEnergyBound => m.observe(t, std::iter::once(e.e_k), slack),
                    Monitor::PotentialEnergyBound => m.observe(t, std::iter::once(e.e_p), slack),
                    Monitor::Trapping => m.observe(t, std::iter::once(d.d_theta), slack),
                }
            }
            if let Some(w) = csv.as_deref_mut() {
                let mut line = fmt_f64(t);
                for v in s.theta().iter().chain(s.omega()) {
                    line.push(',');
                    line.push_str(&fmt_f64(*v));
                }
                for v in [g.r_p, g.phi_p, e.e_k, e.e_p, d.d_theta, d.d_omega, f] {
                    line.push(',');
                    line.push_str(&fmt_f64(v));
                }
                writeln!(w, "{line}")?;
            }
            Ok(())
        })();
        if let Err(e) = sample {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    timings.insert("simulate".to_string(), sim_start.elapsed().as_secs_f64());

    let an_start = Instant::now();
    let sync_time = if a.sync {
        detect_sync_series(&times, &d_omega, a.sync_tol, a.hold_time)
    } else {
        None
    };
    let classification = if a.classification {
        Some(classify_lock(final_state.theta(), a.classify_tol)?)
    } else {
        None
    };
    let t_f = integ.t_final;
    let window = a.decay_window.unwrap_or((0.1 * t_f, 0.5 * t_f));
    let mut decay_fits = Vec::new();
    for (name, series) in [("E_K", &e_k), ("D_omega", &d_omega)] {
        if let Ok(fit) = fit_decay(&times, series, window) {
            decay_fits.push(NamedFit {
                quantity: name.into(),
                fit,
            });
        }
    }
    let bound_violations: Vec<BoundViolation> = monitors.iter().filter_map(MonitorState::violation).collect();
    timings.insert("analysis".to_string(), an_start.elapsed().as_secs_f64());

    let summary = RunSummary {
        sync_time,
        final_r_p: *r_p.last().unwrap_or(&f64::NAN),
        final_d_omega: *d_omega.last().unwrap_or(&f64::NAN),
        verdicts: verdict_cells(&verdicts, a.verdicts),
        classification: classification.map(|c| c.kind),
        violations: bound_violations.len(),
    };
    let report = RunReport {
        config_hash: resolved.hash.clone(),
        verdicts,
        sync_time,
        classification,
        bound_violations,
        decay_fits,
        timings,
    };
    Ok((report, summary))
}

fn summary_csv(s: &RunSummary) -> String {
    let mut out = String::from("status,sync_time,final_R_p,final_D_omega,T31,T32,T33,T34,T35,classification,bound_violations\n");
    let status = if s.violations > 0 { "violation" } else { "ok" };
    out.push_str(&format!(
        "{status},{},{},{},{},{},{}\n",
        fmt_opt(s.sync_time),
        fmt_f64(s.final_r_p),
        fmt_f64(s.final_d_omega),
        s.verdicts.join(","),
        kind_label(s.classification),
        s.violations
    ));
    out
}

fn timed_report(resolved: &Resolved, verdicts: Vec<ConditionVerdict>, timings: BTreeMap<String, f64>) -> RunReport {
    RunReport {
        config_hash: resolved.hash.clone(),
        verdicts,
        sync_time: None,
        classification: None,
        bound_violations: Vec::new(),
        decay_fits: Vec::new(),
        timings,
    }
}

fn exit_for(report: &RunReport) -> i32 {
    if report.bound_violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

/// Execute `run` for a parsed configuration; returns the exit code.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<i32> {
    if let ExperimentSpec::Sweep { .. } = config.experiment {
        return sweep(config, out);
    }
    let resolved = config.resolve()?;
    fs::create_dir_all(out)?;
    let fmt = &config.output;
    match &config.experiment {
        ExperimentSpec::Single => {
            let (report, _) = if fmt.wants(Format::Csv) {
                let mut f = AtomicFile::create(&out.join("trajectory.csv"))?;
                let r = run_single(&resolved, Some(f.writer()))?;
                f.commit()?;
                write_atomic(&out.join("summary.csv"), summary_csv(&r.1).as_bytes())?;
                r
            } else {
                run_single(&resolved, None)?
            };
            if fmt.wants(Format::Json) {
                write_json(&out.join("report.json"), &report)?;
            }
            Ok(exit_for(&report))
        }
        ExperimentSpec::StabilityPair { epsilon, fit_window, .. } => {
            let start = Instant::now();
            let b = resolved.init_b.as_ref().expect("resolved with the pair");
            let options = StabilityOptions {
                epsilon: *epsilon,
                fit_window: *fit_window,
                ..StabilityOptions::default()
            };
            let rep = stability_experiment(&resolved.init, b, &resolved.params, &resolved.integrator, &options)?;
            let mut timings = BTreeMap::new();
            timings.insert("experiment".to_string(), start.elapsed().as_secs_f64());
            let mut report = timed_report(&resolved, all_verdicts(&resolved.init, &resolved.params), timings);
            if let Some(fit) = rep.decay_fit {
                report.decay_fits.push(NamedFit {
                    quantity: "E_eps".into(),
                    fit,
                });
            }
            if config.analyses.monitors.contains(&Monitor::Trapping) && !rep.trapping_ok {
                report.bound_violations.push(BoundViolation {
                    monitor: Monitor::Trapping.as_str().into(),
                    first_violation_time: f64::NAN,
                    max_excess: rep.trapping_excess,
                });
            }
            if fmt.wants(Format::Csv) {
                let mut text = String::from("t,E_eps,gap_norm_sq\n");
                for i in 0..rep.times.len() {
                    text.push_str(&format!(
                        "{},{},{}\n",
                        fmt_f64(rep.times[i]),
                        fmt_f64(rep.e_eps[i]),
                        fmt_f64(rep.gap_norm_sq[i])
                    ));
                }
                write_atomic(&out.join("stability.csv"), text.as_bytes())?;
            }
            if fmt.wants(Format::Json) {
                write_json(&out.join("experiment.json"), &rep)?;
                write_json(&out.join("report.json"), &report)?;
            }
            Ok(exit_for(&report))
        }
        ExperimentSpec::MeanfieldConvergence {
            distribution,
            n_list,
            n_ref,
            seeds,
            projections,
            allow_sliced,
        } => {
            let start = Instant::now();
            let kp = kinetic_params(&resolved.params)?;
            let options = ConvergenceOptions {
                w2: W2Options {
                    allow_sliced: *allow_sliced,
                    projections: *projections,
                    ..W2Options::default()
                },
            };
            let rep = meanfield_convergence_experiment(
                distribution,
                n_list,
                *n_ref,
                &kp,
                &resolved.integrator,
                seeds,
                &options,
            )?;
            let mut timings = BTreeMap::new();
            timings.insert("experiment".to_string(), start.elapsed().as_secs_f64());
            let report = timed_report(&resolved, Vec::new(), timings);
            if fmt.wants(Format::Csv) {
                let mut text = String::from("n,seed,sup_w2,initial_w2,method,max_mc_error\n");
                for r in &rep.rows {
                    let method = match r.method {
                        crate::meanfield::W2Method::Exact => "exact",
                        crate::meanfield::W2Method::Sliced => "sliced",
                    };
                    text.push_str(&format!(
                        "{},{},{},{},{method},{}\n",
                        r.n,
                        r.seed,
                        fmt_f64(r.sup_w2),
                        fmt_f64(r.initial_w2),
                        fmt_f64(r.max_mc_error)
                    ));
                }
                write_atomic(&out.join("convergence.csv"), text.as_bytes())?;
            }
            if fmt.wants(Format::Json) {
                write_json(&out.join("experiment.json"), &rep)?;
                write_json(&out.join("report.json"), &report)?;
            }
            Ok(EXIT_OK)
        }
        ExperimentSpec::KineticSync => {
            let start = Instant::now();
            let kp = kinetic_params(&resolved.params)?;
            let options = KineticSyncOptions {
                tol_angle: config.analyses.classify_tol,
                monitor_slack: config.analyses.monitor_slack,
                ..KineticSyncOptions::default()
            };
            let rep = kinetic_sync_from_state(&resolved.init, &kp, &resolved.integrator, &options)?;
            let mut timings = BTreeMap::new();
            timings.insert("experiment".to_string(), start.elapsed().as_secs_f64());
            let mut report = timed_report(&resolved, all_verdicts(&resolved.init, &resolved.params), timings);
            report.classification = Some(rep.classification);
            if let Ok(fit) = fit_decay(
                &rep.times,
                &rep.ek_bar_series,
                config
                    .analyses
                    .decay_window
                    .unwrap_or((0.1 * resolved.integrator.t_final, 0.5 * resolved.integrator.t_final)),
            ) {
                report.decay_fits.push(NamedFit {
                    quantity: "E_K_bar".into(),
                    fit,
                });
            }
            for (m, mon) in [
                (Monitor::SupportBound, &rep.support_bound),
                (Monitor::FrequencyBound, &rep.frequency_bound),
            ] {
                if config.analyses.monitors.contains(&m) {
                    if let Some(t) = mon.first_violation {
                        report.bound_violations.push(BoundViolation {
                            monitor: m.as_str().into(),
                            first_violation_time: t,
                            max_excess: mon.max_excess,
                        });
                    }
                }
            }
            if fmt.wants(Format::Csv) {
                let mut text = String::from("t,R,E_K_bar\n");
                for i in 0..rep.times.len() {
                    text.push_str(&format!(
                        "{},{},{}\n",
                        fmt_f64(rep.times[i]),
                        fmt_f64(rep.r_series[i]),
                        fmt_f64(rep.ek_bar_series[i])
                    ));
                }
                write_atomic(&out.join("kinetic.csv"), text.as_bytes())?;
            }
            if fmt.wants(Format::Json) {
                write_json(&out.join("experiment.json"), &rep)?;
                write_json(&out.join("report.json"), &report)?;
            }
            Ok(exit_for(&report))
        }
        ExperimentSpec::Sweep { .. } => unreachable!("handled above"),
    }
}

fn kinetic_params(params: &ModelParams) -> Result<KineticParams> {
    match params.variant() {
        ModelVariant::HomogeneousAllToAll { m, gamma, nu } if nu == 0.0 => Ok(KineticParams {
            mass: m,
            friction: gamma,
            kappa: params.kappa(),
        }),
        _ => Err(Error::WrongVariant {
            required: "identical oscillators, a_ij = 1/N, ν = 0",
        }),
    }
}

pub const SWEEP_HEADER: &str = "parameter,value,status,sync_time,final_R_p,final_D_omega,T31,T32,T33,T34,T35";

/// Run every child of a sweep and write `sweep.csv`. Child failures become rows.
pub fn sweep(config: &ExperimentConfig, out: &Path) -> Result<i32> {
    let ExperimentSpec::Sweep { parameter, .. } = &config.experiment else {
        return Err(Error::Config("experiment.kind: sweep required".into()));
    };
    let children = config.expand_sweep()?;
    fs::create_dir_all(out)?;
    let results: Vec<(f64, Result<RunSummary>)> = children
        .par_iter()
        .map(|(v, child)| (*v, child.resolve().and_then(|r| run_single(&r, None).map(|x| x.1))))
        .collect();
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    let mut any_violation = false;
    for (v, r) in &results {
        let p = parameter.as_str();
        match r {
            Ok(s) => {
                any_violation |= s.violations > 0;
                let status = if s.violations > 0 { "violation" } else { "ok" };
                text.push_str(&format!(
                    "{p},{},{status},{},{},{},{}\n",
                    fmt_f64(*v),
                    fmt_opt(s.sync_time),
                    fmt_f64(s.final_r_p),
                    fmt_f64(s.final_d_omega),
                    s.verdicts.join(",")
                ));
            }
            Err(e) => {
                let status = csv_escape(&format!("error: {e}"));
                text.push_str(&format!("{p},{},{status},,,,,,,,\n", fmt_f64(*v)));
            }
        }
    }
    write_atomic(&out.join("sweep.csv"), text.as_bytes())?;
    Ok(if any_violation { EXIT_VIOLATION } else { EXIT_OK })
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    config_hash: &'a str,
    verdicts: Vec<ConditionVerdict>,
}

/// Verdicts for the initial data without simulating, as JSON.
pub fn check(config: &ExperimentConfig) -> Result<String> {
    let resolved = config.resolve()?;
    let out = CheckOutput {
        config_hash: &resolved.hash,
        verdicts: all_verdicts(&resolved.init, &resolved.params),
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::Io(e.to_string()))
}

/// Read a state from a snapshot CSV (`theta,omega` rows) or the last row of a
/// trajectory CSV.
pub fn read_state_csv(path: &Path) -> Result<OscillatorEnsemble> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("{}: bad number {s:?}: {e}", path.display())))
    };
    if header.len() >= 2 && header[0] == "theta" && header[1] == "omega" {
        let mut theta = Vec::new();
        let mut omega = Vec::new();
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() < 2 {
                return Err(Error::Config(format!("{}: expected theta,omega rows", path.display())));
            }
            theta.push(parse(cells[0])?);
            omega.push(parse(cells[1])?);
        }
        return OscillatorEnsemble::new(theta, omega);
    }
    if header.first() == Some(&"t") {
        let last = lines
            .next_back()
            .ok_or_else(|| Error::Config(format!("{}: no data rows", path.display())))?;
        let cells: Vec<&str> = last.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Config(format!("{}: ragged last row", path.display())));
        }
        let mut theta = Vec::new();
        let mut omega = Vec::new();
        for (h, c) in header.iter().zip(&cells) {
            if h.starts_with("theta_") {
                theta.push(parse(c)?);
            } else if h.starts_with("omega_") {
                omega.push(parse(c)?);
            }
        }
        return OscillatorEnsemble::new(theta, omega);
    }
    Err(Error::Config(format!(
        "{}: header must start with \"theta,omega\" or \"t\"",
        path.display()
    )))
}

#[derive(Serialize)]
struct W2Output {
    value: f64,
    method: crate::meanfield::W2Method,
    mc_error: f64,
    atoms: (usize, usize),
}

/// `W₂` between two state files, as JSON.
pub fn w2(a: &Path, b: &Path, slice_seed: Option<u64>) -> Result<String> {
    let mu = EmpiricalMeasure::from_state(&read_state_csv(a)?)?;
    let nu = EmpiricalMeasure::from_state(&read_state_csv(b)?)?;
    let mut opts = W2Options::default();
    if let Some(s) = slice_seed {
        opts.seed = s;
    }
    let est = wasserstein2_auto(&mu, &nu, &opts)?;
    let out = W2Output {
        value: est.value,
        method: est.method,
        mc_error: est.mc_error,
        atoms: (mu.len(), nu.len()),
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::Io(e.to_string()))
}

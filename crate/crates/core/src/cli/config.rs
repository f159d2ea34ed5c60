//! Experiment configuration: JSON schema, validation and resolution into
//! model parameters and an initial state.

use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Scheme};
use crate::meanfield::{sample_initial, InitialDistribution};
use crate::model::{Capacity, ModelParams, OscillatorEnsemble};

/// A per-oscillator quantity: one value for all, explicit values, or iid uniform draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(f64),
    Array(Vec<f64>),
    Draw(DrawSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawSpec {
    pub uniform: [f64; 2],
}

impl ValueSpec {
    fn is_random(&self) -> bool {
        matches!(self, ValueSpec::Draw(_))
    }

    fn resolve(&self, name: &'static str, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            ValueSpec::Scalar(v) => Ok(vec![*v; n]),
            ValueSpec::Array(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!("model.{name}: expected {n} values, found {}", v.len())));
                }
                Ok(v.clone())
            }
            ValueSpec::Draw(DrawSpec { uniform: [lo, hi] }) => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config(format!("model.{name}: invalid uniform range [{lo}, {hi}]")));
                }
                Ok((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
            }
        }
    }
}

fn one() -> ValueSpec {
    ValueSpec::Scalar(1.0)
}

fn zero() -> ValueSpec {
    ValueSpec::Scalar(0.0)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CapacitySpec {
    /// `a_ij = 1/N`.
    #[default]
    AllToAll,
    Matrix(Vec<Vec<f64>>),
    /// `a_ii = ā` and `a_ij = a_ji = ā + u δ_row/N` with `u` uniform on `[−1, 1]`,
    /// so every row deviates from `ā` by at most `δ_row` in `ℓ¹`.
    PerturbedUniform { a_bar: f64, delta_row: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub kappa: f64,
    #[serde(default = "one")]
    pub mass: ValueSpec,
    #[serde(default = "one")]
    pub friction: ValueSpec,
    #[serde(default = "zero")]
    pub natural_freq: ValueSpec,
    #[serde(default)]
    pub capacity: CapacitySpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `θ_j = −1 + 2j/(N−1)`, at rest.
    #[default]
    Lattice,
    Splay,
    Explicit { theta: Vec<f64>, omega: Vec<f64> },
    Distribution(InitialDistribution),
    /// Independent uniform phases and frequencies; optionally shifted to `ω_c = 0`.
    Box {
        theta: [f64; 2],
        omega: [f64; 2],
        #[serde(default)]
        center_omega: bool,
    },
}

impl InitSpec {
    fn is_random(&self) -> bool {
        match self {
            InitSpec::Distribution(d) => !d.is_deterministic(),
            InitSpec::Box { .. } => true,
            _ => false,
        }
    }

    fn resolve(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<OscillatorEnsemble> {
        match self {
            InitSpec::Lattice => {
                let theta = if n == 1 {
                    vec![0.0]
                } else {
                    (0..n).map(|j| -1.0 + 2.0 * j as f64 / (n - 1) as f64).collect()
                };
                OscillatorEnsemble::at_rest(theta)
            }
            InitSpec::Splay => OscillatorEnsemble::splay(n),
            InitSpec::Explicit { theta, omega } => {
                if theta.len() != n || omega.len() != n {
                    return Err(Error::Config(format!(
                        "init.explicit: expected {n} phases and frequencies, found {} and {}",
                        theta.len(),
                        omega.len()
                    )));
                }
                OscillatorEnsemble::new(theta.clone(), omega.clone())
            }
            InitSpec::Distribution(d) => sample_initial(d, n, rng.next_u64()),
            InitSpec::Box {
                theta: [tl, th],
                omega: [wl, wh],
                center_omega,
            } => {
                if !(tl <= th && wl <= wh) {
                    return Err(Error::Config("init.box: ranges must satisfy lo ≤ hi".into()));
                }
                let mut theta = Vec::with_capacity(n);
                let mut omega = Vec::with_capacity(n);
                for _ in 0..n {
                    theta.push(tl + (th - tl) * rng.random::<f64>());
                    omega.push(wl + (wh - wl) * rng.random::<f64>());
                }
                if *center_omega {
                    let mean = omega.iter().sum::<f64>() / n as f64;
                    omega.iter_mut().for_each(|w| *w -= mean);
                }
                OscillatorEnsemble::new(theta, omega)
            }
        }
    }
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    10.0
}
fn default_sample_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub scheme: Scheme,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_final: default_t_final(),
            sample_every: default_sample_every(),
            scheme: Scheme::Rk4,
        }
    }
}

impl IntegratorSpec {
    pub fn to_config(&self) -> Result<IntegratorConfig> {
        IntegratorConfig::new(self.dt, self.t_final, self.sample_every, self.scheme)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// `|ω_i(t)| ≤ max{(|ν_i| + κ Σ_j a_ij)/γ_i, |ω_i(0)|}`.
    FrequencyBound,
    /// `E_K(t) ≤ max{E_K(0), m²κ²N/(4γ²)}` (identical oscillators, `ν = 0`).
    KineticEnergyBound,
    /// `E_P(t) ≤ κN/2` for `a_ij = 1/N`, `κ Σ a_ij` otherwise.
    PotentialEnergyBound,
    /// `D(Θ(t)) ≤ C₁(0)` whenever `C₁(0) < π`.
    Trapping,
    /// `|ω_i(t)| ≤ max{max_j |ω_j(0)|, mκ}` (identical oscillators).
    SupportBound,
}

impl Monitor {
    pub fn as_str(self) -> &'static str {
        match self {
            Monitor::FrequencyBound => "frequency_bound",
            Monitor::KineticEnergyBound => "kinetic_energy_bound",
            Monitor::PotentialEnergyBound => "potential_energy_bound",
            Monitor::Trapping => "trapping",
            Monitor::SupportBound => "support_bound",
        }
    }
}

fn default_monitors() -> Vec<Monitor> {
    vec![
        Monitor::FrequencyBound,
        Monitor::KineticEnergyBound,
        Monitor::PotentialEnergyBound,
    ]
}
fn yes() -> bool {
    true
}
fn default_sync_tol() -> f64 {
    1e-6
}
fn default_hold_time() -> f64 {
    crate::sync::DEFAULT_HOLD_TIME
}
fn default_classify_tol() -> f64 {
    0.05
}
fn default_monitor_slack() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysesSpec {
    #[serde(default = "yes")]
    pub verdicts: bool,
    #[serde(default = "yes")]
    pub sync: bool,
    #[serde(default = "yes")]
    pub classification: bool,
    #[serde(default = "default_monitors")]
    pub monitors: Vec<Monitor>,
    #[serde(default = "default_sync_tol")]
    pub sync_tol: f64,
    #[serde(default = "default_hold_time")]
    pub hold_time: f64,
    #[serde(default = "default_classify_tol")]
    pub classify_tol: f64,
    #[serde(default = "default_monitor_slack")]
    pub monitor_slack: f64,
    /// Window for the exponential fits; defaults to `[0.1, 0.5]·t_final`.
    #[serde(default)]
    pub decay_window: Option<(f64, f64)>,
}

impl Default for AnalysesSpec {
    fn default() -> Self {
        Self {
            verdicts: true,
            sync: true,
            classification: true,
            monitors: default_monitors(),
            sync_tol: default_sync_tol(),
            hold_time: default_hold_time(),
            classify_tol: default_classify_tol(),
            monitor_slack: default_monitor_slack(),
            decay_window: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Kappa,
    Mass,
    Friction,
    NaturalFreq,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Kappa => "kappa",
            SweepParameter::Mass => "mass",
            SweepParameter::Friction => "friction",
            SweepParameter::NaturalFreq => "natural_freq",
        }
    }
}

fn default_projections() -> usize {
    crate::meanfield::DEFAULT_PROJECTIONS
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    #[default]
    Single,
    Sweep {
        parameter: SweepParameter,
        values: Vec<f64>,
    },
    StabilityPair {
        init_b: InitSpec,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        fit_window: Option<(f64, f64)>,
    },
    MeanfieldConvergence {
        distribution: InitialDistribution,
        n_list: Vec<usize>,
        n_ref: usize,
        seeds: Vec<u64>,
        #[serde(default = "default_projections")]
        projections: usize,
        #[serde(default = "yes")]
        allow_sliced: bool,
    },
    KineticSync,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub analyses: AnalysesSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
}

/// Parse and validate a configuration. Errors carry the line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(dt) = o.dt {
            self.integrator.dt = dt;
        }
        if let Some(t) = o.t_final {
            self.integrator.t_final = t;
        }
    }

    fn is_random(&self) -> bool {
        let m = &self.model;
        let exp_random = match &self.experiment {
            ExperimentSpec::StabilityPair { init_b, .. } => init_b.is_random(),
            _ => false,
        };
        m.mass.is_random()
            || m.friction.is_random()
            || m.natural_freq.is_random()
            || matches!(m.capacity, CapacitySpec::PerturbedUniform { .. })
            || self.init.is_random()
            || exp_random
    }

    /// Structural checks that need no random draws.
    pub fn validate(&self) -> Result<()> {
        if self.model.n == 0 {
            return Err(Error::Config("model.n: must be at least 1".into()));
        }
        if self.is_random() && self.seed.is_none() {
            return Err(Error::Config(
                "seed: required because the configuration contains random draws".into(),
            ));
        }
        self.integrator.to_config()?;
        let a = &self.analyses;
        if !(a.classify_tol > 0.0 && a.classify_tol < std::f64::consts::FRAC_PI_4) {
            return Err(Error::Config(format!("analyses.classify_tol: must lie in (0, π/4), got {}", a.classify_tol)));
        }
        if !(a.sync_tol > 0.0 && a.hold_time >= 0.0 && a.monitor_slack >= 0.0) {
            return Err(Error::Config("analyses: sync_tol must be > 0, hold_time and monitor_slack ≥ 0".into()));
        }
        match &self.experiment {
            ExperimentSpec::MeanfieldConvergence {
                distribution,
                n_list,
                n_ref,
                seeds,
                ..
            } => {
                distribution.validate()?;
                if n_list.is_empty() || seeds.is_empty() {
                    return Err(Error::Config("experiment: n_list and seeds must be nonempty".into()));
                }
                if n_list.iter().any(|&n| n == 0 || n > *n_ref) {
                    return Err(Error::Config(format!("experiment.n_list: sizes must lie in 1..={n_ref}")));
                }
            }
            ExperimentSpec::Sweep { values, .. } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("experiment.values: must be finite".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (all defaults filled in).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Child configurations of a sweep, ordered by parameter value.
    pub fn expand_sweep(&self) -> Result<Vec<(f64, ExperimentConfig)>> {
        let ExperimentSpec::Sweep { parameter, values } = &self.experiment else {
            return Err(Error::Config("experiment.kind: sweep required".into()));
        };
        let mut values = values.clone();
        values.sort_by(f64::total_cmp);
        Ok(values
            .into_iter()
            .map(|v| {
                let mut child = self.clone();
                child.experiment = ExperimentSpec::Single;
                match parameter {
                    SweepParameter::Kappa => child.model.kappa = v,
                    SweepParameter::Mass => child.model.mass = ValueSpec::Scalar(v),
                    SweepParameter::Friction => child.model.friction = ValueSpec::Scalar(v),
                    SweepParameter::NaturalFreq => child.model.natural_freq = ValueSpec::Scalar(v),
                }
                (v, child)
            })
            .collect())
    }

    /// Draw everything random (model first, then the initial state) from one stream.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let n = self.model.n;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
        let masses = self.model.mass.resolve("mass", n, &mut rng)?;
        let frictions = self.model.friction.resolve("friction", n, &mut rng)?;
        let nu = self.model.natural_freq.resolve("natural_freq", n, &mut rng)?;
        let capacity = match &self.model.capacity {
            CapacitySpec::AllToAll => Capacity::all_to_all(n),
            CapacitySpec::Matrix(rows) => {
                if rows.len() != n {
                    return Err(Error::Config(format!("model.capacity.matrix: expected {n} rows, found {}", rows.len())));
                }
                Capacity::from_rows(rows)?
            }
            CapacitySpec::PerturbedUniform { a_bar, delta_row } => {
                perturbed_uniform(n, *a_bar, *delta_row, &mut rng)?
            }
        };
        let params = ModelParams::new(masses, frictions, nu, self.model.kappa, capacity)?;
        let init = self.init.resolve(n, &mut rng)?;
        let init_b = match &self.experiment {
            ExperimentSpec::StabilityPair { init_b, .. } => Some(init_b.resolve(n, &mut rng)?),
            _ => None,
        };
        Ok(Resolved {
            hash: self.hash(),
            params,
            init,
            init_b,
            integrator: self.integrator.to_config()?,
            config: self.clone(),
        })
    }
}

fn perturbed_uniform(n: usize, a_bar: f64, delta_row: f64, rng: &mut ChaCha8Rng) -> Result<Capacity> {
    let step = delta_row / n as f64;
    if !(a_bar > 0.0 && a_bar.is_finite() && delta_row >= 0.0 && step <= a_bar) {
        return Err(Error::Config(format!(
            "model.capacity.perturbed_uniform: need a_bar > 0 and 0 ≤ delta_row ≤ N·a_bar, got {a_bar}, {delta_row}"
        )));
    }
    let mut entries = vec![a_bar; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let v = a_bar + u * step;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Capacity::from_row_major(n, entries)
}

/// A configuration with all random draws made.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub hash: String,
    pub params: ModelParams,
    pub init: OscillatorEnsemble,
    pub init_b: Option<OscillatorEnsemble>,
    pub integrator: IntegratorConfig,
}

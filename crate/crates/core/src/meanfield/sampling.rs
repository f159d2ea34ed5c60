//! Seeded samplers for initial measures.
//!
//! Atoms are drawn one at a time (phase, then frequency) from a single
//! ChaCha stream, so the first `n` atoms of a sample of size `N ≥ n` are the
//! sample of size `n` for the same seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OscillatorEnsemble;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDistribution {
    /// Phases uniform on `[center − halfwidth, center + halfwidth]`, every `ω` equal.
    ArcUniform {
        center: f64,
        halfwidth: f64,
        omega: f64,
    },
    /// Von Mises phases, centred Gaussian frequencies truncated to `|ω| ≤ omega_cutoff`.
    ProductVonMisesGaussian {
        mu: f64,
        concentration: f64,
        omega_sigma: f64,
        omega_cutoff: f64,
    },
    /// `round(c1·N)` atoms at `phi_star`, the rest at `phi_star + π`, all at rest.
    TwoPole { c1: f64, phi_star: f64 },
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

impl InitialDistribution {
    pub fn validate(&self) -> Result<()> {
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite, got {v}")))
            }
        };
        match *self {
            InitialDistribution::ArcUniform {
                center,
                halfwidth,
                omega,
            } => {
                finite("center", center)?;
                finite("omega", omega)?;
                if !(halfwidth > 0.0 && halfwidth < PI) {
                    return Err(invalid("halfwidth", format!("must lie in (0, π), got {halfwidth}")));
                }
            }
            InitialDistribution::ProductVonMisesGaussian {
                mu,
                concentration,
                omega_sigma,
                omega_cutoff,
            } => {
                finite("mu", mu)?;
                if !(concentration >= 0.0 && concentration.is_finite()) {
                    return Err(invalid("concentration", format!("must be finite and ≥ 0, got {concentration}")));
                }
                if !(omega_sigma >= 0.0 && omega_sigma.is_finite()) {
                    return Err(invalid("omega_sigma", format!("must be finite and ≥ 0, got {omega_sigma}")));
                }
                if !(omega_cutoff > 0.0 && omega_cutoff.is_finite()) {
                    return Err(invalid("omega_cutoff", format!("must be finite and > 0, got {omega_cutoff}")));
                }
            }
            InitialDistribution::TwoPole { c1, phi_star } => {
                finite("phi_star", phi_star)?;
                if !(c1 > 0.5 && c1 <= 1.0) {
                    return Err(invalid("c1", format!("must lie in (1/2, 1], got {c1}")));
                }
            }
        }
        Ok(())
    }

    /// True when the distribution has no randomness.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, InitialDistribution::TwoPole { .. })
    }
}

/// Best–Fisher rejection sampler for the von Mises distribution.
fn von_mises<R: Rng>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return mu + PI * (2.0 * rng.random::<f64>() - 1.0);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let angle = f.clamp(-1.0, 1.0).acos();
            return if u3 > 0.5 { mu + angle } else { mu - angle };
        }
    }
}

pub fn sample_initial(dist: &InitialDistribution, n: usize, seed: u64) -> Result<OscillatorEnsemble> {
    if n == 0 {
        return Err(Error::Empty);
    }
    dist.validate()?;
    let mut theta = Vec::with_capacity(n);
    let mut omega = Vec::with_capacity(n);
    match *dist {
        InitialDistribution::ArcUniform {
            center,
            halfwidth,
            omega: w,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let u: f64 = rng.random();
                theta.push(center + halfwidth * (2.0 * u - 1.0));
                omega.push(w);
            }
        }
        InitialDistribution::ProductVonMisesGaussian {
            mu,
            concentration,
            omega_sigma,
            omega_cutoff,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, omega_sigma)
                .map_err(|e| invalid("omega_sigma", e.to_string()))?;
            for _ in 0..n {
                theta.push(von_mises(&mut rng, mu, concentration));
                let w = loop {
                    let w: f64 = normal.sample(&mut rng);
                    if w.abs() <= omega_cutoff {
                        break w;
                    }
                };
                omega.push(w);
            }
        }
        InitialDistribution::TwoPole { c1, phi_star } => {
            let k = (c1 * n as f64).round() as usize;
            for i in 0..n {
                theta.push(if i < k { phi_star } else { phi_star + PI });
                omega.push(0.0);
            }
        }
    }
    OscillatorEnsemble::new(theta, omega)
}

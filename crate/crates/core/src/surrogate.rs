//! Surrogate derivatives of the spike nonlinearity.
//!
//! Every function takes `x = U - U_thr`:
//!
//! | kind | dS/dU |
//! |------|-------|
//! | fast sigmoid | `1 / (1 + k|x|)^2` |
//! | arctangent | `(1/pi) / (1 + (pi x alpha / 2)^2)` |
//! | spike-rate escape | `k exp(-beta |x + (U_thr - 1)|)` |
//! | stochastic spike operator | `1` for `x >= 0`, else `(U(-0.5, 0.5) + mu) sigma^2` |
//!
//! The deterministic kinds also have a smooth forward primitive
//! ([`relaxed_forward`]) with range (0, 1) whose derivative is
//! `relaxed_gain(spec) * surrogate_grad(spec, x)`:
//!
//! * fast sigmoid: `(1 + kx / (1 + k|x|)) / 2`, gain `k / 2`
//! * arctangent: `1/2 + atan(pi alpha x / 2) / pi`, gain `pi alpha / 2`
//! * spike-rate escape, with `z = x + U_thr - 1`: `exp(beta z) / 2` for
//!   `z < 0` and `1 - exp(-beta z) / 2` otherwise, gain `beta / (2k)`
//!
//! The stochastic operator draws its sub-threshold noise from a counter-based
//! stream keyed by `(seed, layer, timestep, neuron)`, so a replayed backward
//! pass sees the same samples regardless of evaluation order.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    #[serde(rename = "fast_sigmoid")]
    FastSigmoid,
    #[serde(rename = "atan")]
    Atan,
    #[serde(rename = "spike_rate_escape")]
    SpikeRateEscape,
    #[serde(rename = "SSO")]
    StochasticSpikeOperator,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 4] = [
        SurrogateKind::FastSigmoid,
        SurrogateKind::Atan,
        SurrogateKind::SpikeRateEscape,
        SurrogateKind::StochasticSpikeOperator,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SurrogateKind::FastSigmoid => "fast_sigmoid",
            SurrogateKind::Atan => "atan",
            SurrogateKind::SpikeRateEscape => "spike_rate_escape",
            SurrogateKind::StochasticSpikeOperator => "SSO",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast_sigmoid" | "fs" | "FS" => Ok(SurrogateKind::FastSigmoid),
            "atan" | "ATAN" => Ok(SurrogateKind::Atan),
            "spike_rate_escape" | "sre" | "SRE" => Ok(SurrogateKind::SpikeRateEscape),
            "SSO" | "sso" => Ok(SurrogateKind::StochasticSpikeOperator),
            other => Err(Error::Config(format!("unknown surrogate_type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub fs_k: f64,
    pub atan_alpha: f64,
    pub sre_k: f64,
    pub sre_beta: f64,
    pub u_thr: f64,
    pub sso_mu: f64,
    pub sso_sigma2: f64,
    pub rng_seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::FastSigmoid,
            fs_k: 25.0,
            atan_alpha: 2.0,
            sre_k: 1.0,
            sre_beta: 1.0,
            u_thr: 1.0,
            sso_mu: 0.0,
            sso_sigma2: 0.2,
            rng_seed: 0,
        }
    }
}

impl SurrogateSpec {
    pub fn fast_sigmoid(k: f64) -> Self {
        Self {
            kind: SurrogateKind::FastSigmoid,
            fs_k: k,
            ..Self::default()
        }
    }

    pub fn atan(alpha: f64) -> Self {
        Self {
            kind: SurrogateKind::Atan,
            atan_alpha: alpha,
            ..Self::default()
        }
    }

    pub fn spike_rate_escape(k: f64, beta: f64, u_thr: f64) -> Self {
        Self {
            kind: SurrogateKind::SpikeRateEscape,
            sre_k: k,
            sre_beta: beta,
            u_thr,
            ..Self::default()
        }
    }

    /// Escape-rate surrogate with peak scale tied to the decay rate
    /// (`k = beta`), centered at threshold 1.
    pub fn spike_rate_escape_tied(beta: f64) -> Self {
        Self::spike_rate_escape(beta, beta, 1.0)
    }

    pub fn sso(mu: f64, sigma2: f64, seed: u64) -> Self {
        Self {
            kind: SurrogateKind::StochasticSpikeOperator,
            sso_mu: mu,
            sso_sigma2: sigma2,
            rng_seed: seed,
            ..Self::default()
        }
    }

    /// Builds a spec from the single "slope" knob used by sweep configs.
    /// For spike-rate escape the slope is the decay rate `beta`, with unit
    /// peak scale so every kind peaks at the same height order. The
    /// stochastic operator has no slope; its noise parameters keep their
    /// defaults.
    pub fn from_slope(kind: SurrogateKind, slope: f64) -> Self {
        match kind {
            SurrogateKind::FastSigmoid => Self::fast_sigmoid(slope),
            SurrogateKind::Atan => Self::atan(slope),
            SurrogateKind::SpikeRateEscape => Self::spike_rate_escape(1.0, slope, 1.0),
            SurrogateKind::StochasticSpikeOperator => Self {
                kind,
                ..Self::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0 (got {v})")))
            }
        };
        match self.kind {
            SurrogateKind::FastSigmoid => positive("fs_k", self.fs_k),
            SurrogateKind::Atan => positive("atan_alpha", self.atan_alpha),
            SurrogateKind::SpikeRateEscape => {
                positive("sre_k", self.sre_k)?;
                positive("sre_beta", self.sre_beta)?;
                if self.u_thr.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("u_thr must be finite".into()))
                }
            }
            SurrogateKind::StochasticSpikeOperator => {
                if self.sso_sigma2 >= 0.0 && self.sso_sigma2.is_finite() && self.sso_mu.is_finite()
                {
                    Ok(())
                } else {
                    Err(Error::Config("sso_sigma2 must be >= 0 and sso_mu finite".into()))
                }
            }
        }
    }

    /// Surrogate derivative at `x`, keyed for the stochastic operator.
    pub fn grad_at(&self, x: f64, key: SampleKey) -> f64 {
        match self.kind {
            SurrogateKind::FastSigmoid => {
                let d = 1.0 + self.fs_k * x.abs();
                1.0 / (d * d)
            }
            SurrogateKind::Atan => {
                let z = PI * x * self.atan_alpha / 2.0;
                (1.0 / PI) / (1.0 + z * z)
            }
            SurrogateKind::SpikeRateEscape => {
                self.sre_k * (-self.sre_beta * (x + (self.u_thr - 1.0)).abs()).exp()
            }
            SurrogateKind::StochasticSpikeOperator => {
                if x >= 0.0 {
                    1.0
                } else {
                    (uniform_sample(self.rng_seed, key) - 0.5 + self.sso_mu) * self.sso_sigma2
                }
            }
        }
    }
}

/// Identifies one firing decision for the stochastic operator's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SampleKey {
    pub layer: u32,
    pub timestep: u32,
    pub neuron: u32,
}

impl SampleKey {
    pub fn new(layer: usize, timestep: usize, neuron: usize) -> Self {
        Self {
            layer: layer as u32,
            timestep: timestep as u32,
            neuron: neuron as u32,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) that depends only on `(seed, key)`.
fn uniform_sample(seed: u64, key: SampleKey) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ u64::from(key.layer));
    h = splitmix64(h ^ u64::from(key.timestep));
    h = splitmix64(h ^ u64::from(key.neuron));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn surrogate_grad(spec: &SurrogateSpec, x: f64) -> f64 {
    spec.grad_at(x, SampleKey::default())
}

/// Forward spike nonlinearity: 1 iff `x >= 0`.
#[inline]
pub fn heaviside(x: f64) -> u8 {
    u8::from(x >= 0.0)
}

/// Ratio between the derivative of [`relaxed_forward`] and
/// [`surrogate_grad`].
pub fn relaxed_gain(spec: &SurrogateSpec) -> Result<f64> {
    match spec.kind {
        SurrogateKind::FastSigmoid => Ok(spec.fs_k / 2.0),
        SurrogateKind::Atan => Ok(PI * spec.atan_alpha / 2.0),
        SurrogateKind::SpikeRateEscape => Ok(spec.sre_beta / (2.0 * spec.sre_k)),
        SurrogateKind::StochasticSpikeOperator => Err(Error::Unsupported(
            "the stochastic spike operator has no deterministic primitive".into(),
        )),
    }
}

/// Smooth, monotone stand-in for the Heaviside step with range (0, 1).
pub fn relaxed_forward(spec: &SurrogateSpec, x: f64) -> Result<f64> {
    match spec.kind {
        SurrogateKind::FastSigmoid => {
            let k = spec.fs_k;
            Ok(0.5 * (1.0 + k * x / (1.0 + k * x.abs())))
        }
        SurrogateKind::Atan => Ok(0.5 + (PI * spec.atan_alpha * x / 2.0).atan() / PI),
        SurrogateKind::SpikeRateEscape => {
            let z = x + (spec.u_thr - 1.0);
            let b = spec.sre_beta;
            Ok(if z < 0.0 {
                0.5 * (b * z).exp()
            } else {
                1.0 - 0.5 * (-b * z).exp()
            })
        }
        SurrogateKind::StochasticSpikeOperator => Err(Error::Unsupported(
            "the stochastic spike operator has no deterministic primitive".into(),
        )),
    }
}

//! Floating-point LIF and Lapicque dynamics.
//!
//! Both models share one update: `u' = decay·u + gain·syn`, then fire where
//! `u' >= theta` and reset in the same step. LIF has `decay = beta` and unit
//! gain; Lapicque has `decay = 1 - T/(RC)` and `gain = T/C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Subtract the threshold on a spike.
    #[default]
    Subtract,
    /// Clamp the membrane to zero on a spike.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub beta: f64,
    pub theta: f64,
    #[serde(default)]
    pub reset: ResetMode,
}

impl LifParams {
    pub fn new(beta: f64, theta: f64, reset: ResetMode) -> Result<Self> {
        let p = Self { beta, theta, reset };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Domain(format!("LIF beta {} outside (0, 1]", self.beta)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Domain(format!("threshold {} must be > 0", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LapParams {
    pub r: f64,
    pub c: f64,
    pub t_step: f64,
    pub theta: f64,
    #[serde(default)]
    pub reset: ResetMode,
}

impl LapParams {
    pub fn new(r: f64, c: f64, t_step: f64, theta: f64, reset: ResetMode) -> Result<Self> {
        let p = Self {
            r,
            c,
            t_step,
            theta,
            reset,
        };
        p.validate()?;
        Ok(p)
    }

    /// Maps a leak factor onto RC constants: `T = 1`, `C = -1/ln(beta)`, and
    /// `R` solved so the membrane decay equals `beta`. The input gain `T/C`
    /// then becomes `-ln(beta)`.
    pub fn from_beta(beta: f64, theta: f64, reset: ResetMode) -> Result<Self> {
        let c = beta_to_capacitance(beta)?;
        let r = 1.0 / (c * (1.0 - beta));
        Self::new(r, c, 1.0, theta, reset)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R", self.r), ("C", self.c), ("T", self.t_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("Lapicque {name} = {v} must be > 0")));
            }
        }
        let ratio = self.t_step / (self.r * self.c);
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Domain(format!(
                "T/(RC) = {ratio} must lie in (0, 1) for a stable decay"
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Domain(format!("threshold {} must be > 0", self.theta)));
        }
        Ok(())
    }

    pub fn decay(&self) -> f64 {
        1.0 - self.t_step / (self.r * self.c)
    }

    pub fn gain(&self) -> f64 {
        self.t_step / self.c
    }
}

/// Per-layer neuron model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NeuronParams {
    Lif(LifParams),
    Lapicque(LapParams),
}

impl NeuronParams {
    pub fn decay(&self) -> f64 {
        match self {
            NeuronParams::Lif(p) => p.beta,
            NeuronParams::Lapicque(p) => p.decay(),
        }
    }

    pub fn gain(&self) -> f64 {
        match self {
            NeuronParams::Lif(_) => 1.0,
            NeuronParams::Lapicque(p) => p.gain(),
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            NeuronParams::Lif(p) => p.theta,
            NeuronParams::Lapicque(p) => p.theta,
        }
    }

    pub fn reset(&self) -> ResetMode {
        match self {
            NeuronParams::Lif(p) => p.reset,
            NeuronParams::Lapicque(p) => p.reset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NeuronParams::Lif(p) => p.validate(),
            NeuronParams::Lapicque(p) => p.validate(),
        }
    }

    pub fn step(&self, u: &NeuronState, syn: &[f64]) -> Result<(NeuronState, Vec<u8>)> {
        match self {
            NeuronParams::Lif(p) => lif_step(u, syn, p),
            NeuronParams::Lapicque(p) => lapicque_step(u, syn, p),
        }
    }
}

/// Membrane potentials of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub u: Vec<f64>,
}

impl NeuronState {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Integrate, fire and reset a single neuron. Returns the post-reset
/// potential and whether it spiked.
#[inline]
pub fn neuron_update(
    u: f64,
    syn: f64,
    decay: f64,
    gain: f64,
    theta: f64,
    reset: ResetMode,
) -> (f64, bool) {
    let v = decay * u + syn * gain;
    if v >= theta {
        let after = match reset {
            ResetMode::Subtract => v - theta,
            ResetMode::Zero => 0.0,
        };
        (after, true)
    } else {
        (v, false)
    }
}

fn check_inputs(u: &NeuronState, syn: &[f64]) -> Result<()> {
    if u.len() != syn.len() {
        return Err(Error::Shape(format!(
            "state has {} neurons but synaptic input has {}",
            u.len(),
            syn.len()
        )));
    }
    if let Some(i) = syn.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite synaptic input at neuron {i}")));
    }
    Ok(())
}

fn step_with(
    u: &NeuronState,
    syn: &[f64],
    decay: f64,
    gain: f64,
    theta: f64,
    reset: ResetMode,
) -> (NeuronState, Vec<u8>) {
    let mut next = Vec::with_capacity(u.len());
    let mut spikes = Vec::with_capacity(u.len());
    for (&ui, &si) in u.u.iter().zip(syn) {
        let (v, fired) = neuron_update(ui, si, decay, gain, theta, reset);
        next.push(v);
        spikes.push(u8::from(fired));
    }
    (NeuronState { u: next }, spikes)
}

pub fn lif_step(u: &NeuronState, syn: &[f64], p: &LifParams) -> Result<(NeuronState, Vec<u8>)> {
    check_inputs(u, syn)?;
    Ok(step_with(u, syn, p.beta, 1.0, p.theta, p.reset))
}

pub fn lapicque_step(
    u: &NeuronState,
    syn: &[f64],
    p: &LapParams,
) -> Result<(NeuronState, Vec<u8>)> {
    check_inputs(u, syn)?;
    p.validate()?;
    Ok(step_with(u, syn, p.decay(), p.gain(), p.theta, p.reset))
}

/// Equivalent capacitance `C = -1/ln(beta)` for a leak factor in (0, 1).
pub fn beta_to_capacitance(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!(
            "beta {beta} outside (0, 1); capacitance is undefined"
        )));
    }
    Ok(-1.0 / beta.ln())
}

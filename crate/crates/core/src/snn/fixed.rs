//! Fixed-point deployment arithmetic and the dense reference forward pass.
//!
//! Membranes are stored in units of the layer's weight scale with `frac`
//! fractional bits, so a 4-bit weight `q` contributes exactly `q << frac`
//! (LIF) or `q * gain` (Lapicque). Synaptic input is summed in a wide
//! accumulator first and applied once per timestep, which makes the result
//! independent of the order in which events arrive.

use serde::{Deserialize, Serialize};

use super::neuron::{NeuronParams, ResetMode};
use super::ops::{accumulate_dense_int, maxpool_spikes};
use super::spikes::SpikeTrain;
use super::topology::{LayerKind, Topology};
use crate::error::{Error, Result};
use crate::quant::QuantizedWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedFormat {
    /// Total signed width of a stored membrane potential.
    pub bits: u32,
    /// Fractional bits.
    pub frac: u32,
}

impl Default for FixedFormat {
    fn default() -> Self {
        Self { bits: 16, frac: 8 }
    }
}

impl FixedFormat {
    pub fn validate(&self) -> Result<()> {
        if !(2..=32).contains(&self.bits) || self.frac >= self.bits {
            return Err(Error::Config(format!(
                "fixed format Q{}.{} is not representable",
                self.bits.saturating_sub(self.frac),
                self.frac
            )));
        }
        Ok(())
    }

    pub fn max(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    pub fn min(&self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn one(&self) -> i64 {
        1i64 << self.frac
    }

    /// Clamps into range, reporting whether clamping happened.
    #[inline]
    pub fn saturate(&self, v: i64) -> (i32, bool) {
        if v > self.max() {
            (self.max() as i32, true)
        } else if v < self.min() {
            (self.min() as i32, true)
        } else {
            (v as i32, false)
        }
    }
}

/// How the membrane decay is realized in hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum DecayOp {
    /// `u >> k`; exact when the leak is `2^-k`.
    Shift(u32),
    /// `(u * m) >> frac`.
    Mul(i32),
}

/// How accumulated input is scaled onto the membrane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum GainOp {
    /// `acc << frac`; a fixed alignment, no arithmetic.
    Align,
    /// `acc * m`.
    Mul(i32),
}

/// A layer's neuron model after conversion to fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedNeuron {
    pub format: FixedFormat,
    pub decay: DecayOp,
    pub gain: GainOp,
    pub theta: i32,
    pub reset: ResetMode,
}

impl FixedNeuron {
    /// Converts float neuron parameters for a layer whose weights have the
    /// given quantization scale.
    pub fn from_params(params: &NeuronParams, weight_scale: f64, format: FixedFormat) -> Result<Self> {
        format.validate()?;
        params.validate()?;
        if !(weight_scale > 0.0 && weight_scale.is_finite()) {
            return Err(Error::Domain(format!("weight scale {weight_scale} must be > 0")));
        }
        let one = format.one() as f64;
        let decay = match params {
            NeuronParams::Lif(p) => match power_of_two_shift(p.beta, format.frac) {
                Some(k) => DecayOp::Shift(k),
                None => DecayOp::Mul((p.beta * one).round() as i32),
            },
            NeuronParams::Lapicque(p) => DecayOp::Mul((p.decay() * one).round() as i32),
        };
        let gain = match params {
            NeuronParams::Lif(_) => GainOp::Align,
            NeuronParams::Lapicque(p) => GainOp::Mul((p.gain() * one).round() as i32),
        };
        let theta = ((params.theta() / weight_scale) * one).round();
        let theta = theta.clamp(1.0, format.max() as f64) as i32;
        Ok(Self {
            format,
            decay,
            gain,
            theta,
            reset: params.reset(),
        })
    }

    #[inline]
    pub fn decay(&self, u: i32) -> i32 {
        match self.decay {
            DecayOp::Shift(k) => u >> k,
            DecayOp::Mul(m) => ((i64::from(u) * i64::from(m)) >> self.format.frac) as i32,
        }
    }

    #[inline]
    fn scaled_input(&self, acc: i32) -> i64 {
        match self.gain {
            GainOp::Align => i64::from(acc) << self.format.frac,
            GainOp::Mul(m) => i64::from(acc) * i64::from(m),
        }
    }

    /// One timestep: decay, add the accumulated input, compare, reset.
    /// Returns `(membrane, spiked, saturated)`.
    #[inline]
    pub fn update(&self, u: i32, acc: i32) -> (i32, bool, bool) {
        let v = i64::from(self.decay(u)) + self.scaled_input(acc);
        let (v, sat) = self.format.saturate(v);
        if v >= self.theta {
            let after = match self.reset {
                ResetMode::Subtract => v - self.theta,
                ResetMode::Zero => 0,
            };
            (after, true, sat)
        } else {
            (v, false, sat)
        }
    }
}

/// `Some(k)` when `beta == 2^-k` exactly.
fn power_of_two_shift(beta: f64, frac: u32) -> Option<u32> {
    (0..=frac).find(|&k| beta == 1.0 / f64::from(1u32 << k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedForwardOutput {
    /// Output spikes of every layer, pooling included.
    pub layer_spikes: Vec<SpikeTrain>,
    /// Final membranes of each spiking layer.
    pub membranes: Vec<Vec<i32>>,
    pub saturations: u64,
}

pub fn fixed_neurons(
    topology: &Topology,
    weights: &QuantizedWeights,
    params: &[NeuronParams],
    format: FixedFormat,
) -> Result<Vec<FixedNeuron>> {
    if params.len() != topology.num_spiking() {
        return Err(Error::Shape(format!(
            "{} neuron parameter sets for {} spiking layers",
            params.len(),
            topology.num_spiking()
        )));
    }
    topology
        .spiking_layers()
        .zip(params)
        .map(|((li, _), p)| FixedNeuron::from_params(p, weights.layers[li].scale, format))
        .collect()
}

pub fn check_quantized(topology: &Topology, weights: &QuantizedWeights) -> Result<()> {
    if weights.layers.len() != topology.layers.len() {
        return Err(Error::Shape(format!(
            "{} weight tensors for {} layers",
            weights.layers.len(),
            topology.layers.len()
        )));
    }
    for (i, (l, w)) in topology.layers.iter().zip(&weights.layers).enumerate() {
        if w.values.len() != l.weight_len() {
            return Err(Error::Shape(format!(
                "layer {i} has {} weights, expected {}",
                w.values.len(),
                l.weight_len()
            )));
        }
    }
    weights.validate()
}

/// Dense fixed-point forward pass over all timesteps. This is the functional
/// reference the event-driven simulator must match bit for bit.
pub fn forward_fixed(
    topology: &Topology,
    weights: &QuantizedWeights,
    neurons: &[FixedNeuron],
    input: &SpikeTrain,
) -> Result<FixedForwardOutput> {
    check_quantized(topology, weights)?;
    if input.shape() != topology.input || input.timesteps() != topology.timesteps {
        return Err(Error::Shape(format!(
            "input {} x {} does not match topology {} x {}",
            input.shape(),
            input.timesteps(),
            topology.input,
            topology.timesteps
        )));
    }
    if neurons.len() != topology.num_spiking() {
        return Err(Error::Shape("one fixed neuron model per spiking layer required".into()));
    }
    let t_len = topology.timesteps;
    let mut membranes: Vec<Vec<i32>> = topology
        .spiking_layers()
        .map(|(_, l)| vec![0; l.out_shape.len()])
        .collect();
    let mut frames: Vec<Vec<Vec<u8>>> = vec![Vec::with_capacity(t_len); topology.layers.len()];
    let mut saturations = 0u64;
    for t in 0..t_len {
        let mut current = input.frame(t).to_vec();
        let mut si = 0;
        for (li, layer) in topology.layers.iter().enumerate() {
            let next = match layer.kind {
                LayerKind::MaxPool { window } => maxpool_spikes(&current, layer.in_shape, window)?,
                _ => {
                    let acc = accumulate_dense_int(&current, &weights.layers[li].values, layer)?;
                    let neuron = &neurons[si];
                    let mem = &mut membranes[si];
                    let mut out = vec![0u8; acc.len()];
                    for ((u, a), o) in mem.iter_mut().zip(&acc).zip(out.iter_mut()) {
                        let (v, fired, sat) = neuron.update(*u, *a);
                        *u = v;
                        *o = u8::from(fired);
                        saturations += u64::from(sat);
                    }
                    si += 1;
                    out
                }
            };
            frames[li].push(next.clone());
            current = next;
        }
    }
    let layer_spikes = topology
        .layers
        .iter()
        .zip(frames)
        .map(|(l, f)| SpikeTrain::from_frames(l.out_shape, f))
        .collect::<Result<_>>()?;
    Ok(FixedForwardOutput {
        layer_spikes,
        membranes,
        saturations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::neuron::{LapParams, LifParams};

    fn lif(beta: f64, theta: f64) -> NeuronParams {
        NeuronParams::Lif(LifParams::new(beta, theta, ResetMode::Subtract).unwrap())
    }

    #[test]
    fn power_of_two_leaks_use_shifts() {
        let f = FixedFormat::default();
        let n = FixedNeuron::from_params(&lif(0.5, 1.0), 0.25, f).unwrap();
        assert_eq!(n.decay, DecayOp::Shift(1));
        assert_eq!(n.gain, GainOp::Align);
        assert_eq!(n.theta, 4 << 8);
        let n = FixedNeuron::from_params(&lif(1.0, 1.0), 0.25, f).unwrap();
        assert_eq!(n.decay, DecayOp::Shift(0));
        let n = FixedNeuron::from_params(&lif(0.3, 1.0), 0.25, f).unwrap();
        assert_eq!(n.decay, DecayOp::Mul(77));
    }

    #[test]
    fn lapicque_always_multiplies() {
        let p = NeuronParams::Lapicque(LapParams::from_beta(0.5, 1.0, ResetMode::Subtract).unwrap());
        let n = FixedNeuron::from_params(&p, 1.0, FixedFormat::default()).unwrap();
        assert_eq!(n.decay, DecayOp::Mul(128));
        assert_eq!(n.gain, GainOp::Mul((2f64.ln() * 256.0).round() as i32));
    }

    #[test]
    fn update_matches_float_on_exact_values() {
        // beta 0.5, weight scale 1: u = 1.0, input 2 units, theta 2.0
        let n = FixedNeuron::from_params(&lif(0.5, 2.0), 1.0, FixedFormat::default()).unwrap();
        let (u, fired, sat) = n.update(256, 2);
        assert!(fired && !sat);
        assert_eq!(u, 128); // 0.5 + 2 - 2
    }

    #[test]
    fn saturation_is_reported() {
        let f = FixedFormat { bits: 8, frac: 4 };
        let n = FixedNeuron::from_params(&lif(1.0, 5.0), 1.0, f).unwrap();
        assert_eq!(n.theta, 80);
        let (u, fired, sat) = n.update(100, 10);
        assert!(sat && fired);
        assert_eq!(u, 127 - 80);
    }

    #[test]
    fn negative_shift_rounds_down() {
        let n = FixedNeuron::from_params(&lif(0.5, 1.0), 1.0, FixedFormat::default()).unwrap();
        assert_eq!(n.decay(-1), -1);
        assert_eq!(n.decay(-3), -2);
    }

    #[test]
    fn bad_format_rejected() {
        assert!(FixedFormat { bits: 8, frac: 8 }.validate().is_err());
        assert!(FixedFormat { bits: 40, frac: 8 }.validate().is_err());
    }
}

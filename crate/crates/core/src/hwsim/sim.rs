//! Event-driven execution with cycle accounting.
//!
//! Per layer and timestep:
//!
//! ```text
//! cycles = C_ovHD
//!        + penc_cycles * N_active
//!        + ceil(accumulates * T_accum / P)
//!        + ceil(updates * update_cost / P)
//! ```
//!
//! Only neurons that received input (or still sit above threshold after a
//! subtractive reset) are read, updated and written back. Skipped timesteps
//! are folded in lazily: when a neuron is next touched, the leak it missed is
//! applied first, so membranes match the dense reference exactly.

use serde::{Deserialize, Serialize};

use super::config::{HwConfig, UpdateOps};
use super::units::{agu_visit, penc_scan};
use crate::error::{Error, Result};
use crate::metrics::{activity_density, estimate_energy, EnergyModel};
use crate::quant::{QuantizedLayer, QuantizedWeights};
use crate::snn::fixed::{check_quantized, fixed_neurons, FixedNeuron};
use crate::snn::{maxpool_spikes, LayerKind, LayerSpec, NeuronParams, SpikeTrain, Topology};
use crate::trainer::Checkpoint;

/// Primitive operation and memory counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub adds: u64,
    pub shifts: u64,
    pub compares: u64,
    pub muls: u64,
    pub membrane_reads: u64,
    pub membrane_writes: u64,
    pub weight_fetches: u64,
}

impl OpCounts {
    pub fn add(&mut self, o: &OpCounts) {
        self.adds += o.adds;
        self.shifts += o.shifts;
        self.compares += o.compares;
        self.muls += o.muls;
        self.membrane_reads += o.membrane_reads;
        self.membrane_writes += o.membrane_writes;
        self.weight_fetches += o.weight_fetches;
    }

    pub fn scaled(&self, k: u64) -> OpCounts {
        OpCounts {
            adds: self.adds * k,
            shifts: self.shifts * k,
            compares: self.compares * k,
            muls: self.muls * k,
            membrane_reads: self.membrane_reads * k,
            membrane_writes: self.membrane_writes * k,
            weight_fetches: self.weight_fetches * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub active_inputs: u64,
    pub accumulates: u64,
    pub updates: u64,
    pub output_spikes: u64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSimReport {
    pub layer: usize,
    /// Grammar token of the layer, e.g. `16C3`.
    pub kind: String,
    pub cycles: u64,
    pub steps: Vec<StepStats>,
    pub accumulates: u64,
    pub updates: u64,
    pub ops: OpCounts,
    pub output_spikes_per_channel: Vec<u64>,
    pub saturations: u64,
    /// Neurons in the layer's output.
    pub neurons: usize,
}

impl LayerSimReport {
    pub fn output_spikes(&self) -> u64 {
        self.output_spikes_per_channel.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub layers: Vec<LayerSimReport>,
    pub total_cycles: u64,
    pub frequency_mhz: f64,
    pub latency_ms: f64,
    /// Spikes per neuron per timestep across spiking layers.
    pub activity_density: f64,
    pub ops: OpCounts,
    /// Model energy in mJ under the default [`EnergyModel`].
    pub energy_mj: f64,
}

/// Layer output plus the final membranes (spiking layers only).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSim {
    pub report: LayerSimReport,
    pub output: SpikeTrain,
    pub membranes: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub report: SimReport,
    pub layer_spikes: Vec<SpikeTrain>,
    pub membranes: Vec<Vec<i32>>,
}

fn layer_token(spec: &LayerSpec) -> String {
    Topology {
        input: spec.in_shape,
        timesteps: 1,
        layers: vec![*spec],
    }
    .render()
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

fn check_input(spec: &LayerSpec, input: &SpikeTrain) -> Result<()> {
    if input.shape() != spec.in_shape {
        return Err(Error::Shape(format!(
            "layer input is {}, expected {}",
            input.shape(),
            spec.in_shape
        )));
    }
    Ok(())
}

/// Pooling: the encoder walks active inputs and ORs them into their window.
fn simulate_pool(index: usize, spec: &LayerSpec, input: &SpikeTrain, hw: &HwConfig) -> Result<LayerSim> {
    check_input(spec, input)?;
    let LayerKind::MaxPool { window } = spec.kind else {
        unreachable!("caller dispatches on kind")
    };
    let mut frames = Vec::with_capacity(input.timesteps());
    let mut steps = Vec::with_capacity(input.timesteps());
    let mut cycles = 0;
    for t in 0..input.timesteps() {
        let active = penc_scan(input.frame(t)).len() as u64;
        let out = maxpool_spikes(input.frame(t), spec.in_shape, window)?;
        let c = hw.control_overhead + hw.penc_cycles_per_active * active;
        cycles += c;
        steps.push(StepStats {
            active_inputs: active,
            output_spikes: out.iter().map(|&b| u64::from(b)).sum(),
            cycles: c,
            ..StepStats::default()
        });
        frames.push(out);
    }
    let output = SpikeTrain::from_frames(spec.out_shape, frames)?;
    let per_channel = channel_totals(&output);
    Ok(LayerSim {
        report: LayerSimReport {
            layer: index,
            kind: layer_token(spec),
            cycles,
            steps,
            accumulates: 0,
            updates: 0,
            ops: OpCounts::default(),
            output_spikes_per_channel: per_channel,
            saturations: 0,
            neurons: spec.out_shape.len(),
        },
        output,
        membranes: Vec::new(),
    })
}

fn channel_totals(s: &SpikeTrain) -> Vec<u64> {
    let mut out = vec![0u64; s.shape().channels];
    for t in 0..s.timesteps() {
        for (o, &c) in out.iter_mut().zip(s.channel_counts(t)) {
            *o += u64::from(c);
        }
    }
    out
}

/// Weights read for one timestep: a conv layer fetches the `F·C_out` kernel
/// slice of every input channel that has at least one spike; an FC layer
/// fetches one column per active input.
fn weight_fetches(spec: &LayerSpec, active: &[usize]) -> u64 {
    match spec.kind {
        LayerKind::Conv {
            out_channels,
            kernel,
            ..
        } => {
            let plane = spec.in_shape.plane();
            let mut channels: Vec<usize> = active.iter().map(|&i| i / plane).collect();
            channels.dedup();
            (channels.len() * kernel * kernel * out_channels) as u64
        }
        LayerKind::FullyConnected { out_features } => (active.len() * out_features) as u64,
        LayerKind::MaxPool { .. } => 0,
    }
}

/// Runs one conv or FC layer event by event.
pub fn simulate_layer(
    index: usize,
    spec: &LayerSpec,
    input: &SpikeTrain,
    weights: &QuantizedLayer,
    neuron: &FixedNeuron,
    hw: &HwConfig,
) -> Result<LayerSim> {
    hw.validate()?;
    if !spec.is_spiking() {
        return simulate_pool(index, spec, input, hw);
    }
    check_input(spec, input)?;
    if weights.values.len() != spec.weight_len() {
        return Err(Error::Shape(format!(
            "layer {index} has {} weights, expected {}",
            weights.values.len(),
            spec.weight_len()
        )));
    }
    let n = spec.out_shape.len();
    let steps_total = input.timesteps();
    let op_mix = UpdateOps::of(neuron);
    let update_cost = hw.update_cost(&op_mix);
    let q = &weights.values;

    let mut u = vec![0i32; n];
    // Timestep at which each stored membrane was last brought up to date.
    let mut fresh_at = vec![0usize; n];
    let mut acc = vec![0i32; n];
    let mut touched = vec![false; n];
    let mut list: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();

    let mut frames = Vec::with_capacity(steps_total);
    let mut steps = Vec::with_capacity(steps_total);
    let mut ops = OpCounts::default();
    let (mut cycles, mut accumulates, mut updates, mut saturations) = (0u64, 0u64, 0u64, 0u64);

    for t in 0..steps_total {
        let active = penc_scan(input.frame(t));
        let mut work = 0u64;
        for &i in &active {
            agu_visit(i, spec, |o, w| {
                acc[o] += i32::from(q[w]);
                work += 1;
                if !touched[o] {
                    touched[o] = true;
                    list.push(o);
                }
            })?;
        }
        for &o in &pending {
            if !touched[o] {
                touched[o] = true;
                list.push(o);
            }
        }
        pending.clear();
        list.sort_unstable();

        let mut frame = vec![0u8; n];
        let mut fired = 0u64;
        for &o in &list {
            let mut m = u[o];
            for _ in fresh_at[o]..t {
                m = neuron.decay(m);
            }
            let (next, spike, sat) = neuron.update(m, acc[o]);
            saturations += u64::from(sat);
            u[o] = next;
            fresh_at[o] = t + 1;
            if spike {
                frame[o] = 1;
                fired += 1;
            }
            if neuron.update(next, 0).1 {
                pending.push(o);
            }
            acc[o] = 0;
            touched[o] = false;
        }
        let upd = list.len() as u64;
        list.clear();

        let c = hw.control_overhead
            + hw.penc_cycles_per_active * active.len() as u64
            + ceil_div(work * hw.accumulate_cycles, hw.parallelism)
            + ceil_div(upd * update_cost, hw.parallelism);
        cycles += c;
        accumulates += work;
        updates += upd;
        ops.add(&OpCounts {
            adds: work,
            weight_fetches: weight_fetches(spec, &active),
            membrane_reads: upd,
            membrane_writes: upd,
            ..OpCounts::default()
        });
        ops.add(
            &OpCounts {
                adds: op_mix.adds,
                shifts: op_mix.shifts,
                compares: op_mix.compares,
                muls: op_mix.muls,
                ..OpCounts::default()
            }
            .scaled(upd),
        );
        steps.push(StepStats {
            active_inputs: active.len() as u64,
            accumulates: work,
            updates: upd,
            output_spikes: fired,
            cycles: c,
        });
        frames.push(frame);
    }
    // Bring every membrane to the end of the run for inspection; this flush
    // is not part of the timed schedule.
    for (o, m) in u.iter_mut().enumerate() {
        for _ in fresh_at[o]..steps_total {
            *m = neuron.decay(*m);
        }
    }
    let output = SpikeTrain::from_frames(spec.out_shape, frames)?;
    Ok(LayerSim {
        report: LayerSimReport {
            layer: index,
            kind: layer_token(spec),
            cycles,
            steps,
            accumulates,
            updates,
            ops,
            output_spikes_per_channel: channel_totals(&output),
            saturations,
            neurons: n,
        },
        output,
        membranes: u,
    })
}

/// Layers run one after another within each timestep. Because layers only
/// communicate through spikes, running each layer over all timesteps in turn
/// yields the same counts.
pub fn simulate_quantized(
    topology: &Topology,
    weights: &QuantizedWeights,
    neurons: &[NeuronParams],
    input: &SpikeTrain,
    hw: &HwConfig,
) -> Result<SimResult> {
    hw.validate()?;
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
    let fixed = fixed_neurons(topology, weights, neurons, hw.format)?;
    let mut layers = Vec::with_capacity(topology.layers.len());
    let mut spikes = Vec::with_capacity(topology.layers.len());
    let mut membranes = Vec::new();
    let mut current = input.clone();
    let mut si = 0;
    for (li, spec) in topology.layers.iter().enumerate() {
        let sim = if spec.is_spiking() {
            let s = simulate_layer(li, spec, &current, &weights.layers[li], &fixed[si], hw)?;
            si += 1;
            membranes.push(s.membranes.clone());
            s
        } else {
            simulate_pool(li, spec, &current, hw)?
        };
        current = sim.output.clone();
        layers.push(sim.report);
        spikes.push(sim.output);
    }
    let total_cycles = layers.iter().map(|l| l.cycles).sum();
    let mut ops = OpCounts::default();
    for l in &layers {
        ops.add(&l.ops);
    }
    let spiking: Vec<&SpikeTrain> = topology.spiking_layers().map(|(i, _)| &spikes[i]).collect();
    let mut report = SimReport {
        layers,
        total_cycles,
        frequency_mhz: hw.frequency_mhz,
        latency_ms: hw.cycles_to_ms(total_cycles),
        activity_density: activity_density(&spiking)?,
        ops,
        energy_mj: 0.0,
    };
    report.energy_mj = estimate_energy(&report, &EnergyModel::default())?;
    Ok(SimResult {
        report,
        layer_spikes: spikes,
        membranes,
    })
}

pub fn simulate_network(
    topology: &Topology,
    input: &SpikeTrain,
    checkpoint: &Checkpoint,
    hw: &HwConfig,
) -> Result<SimResult> {
    if topology.render() != checkpoint.topology.render()
        || topology.input != checkpoint.topology.input
    {
        return Err(Error::Shape(format!(
            "checkpoint topology {} does not match {}",
            checkpoint.topology.render(),
            topology.render()
        )));
    }
    simulate_quantized(topology, &checkpoint.quantized, &checkpoint.neurons, input, hw)
}

/// Coarse closed form: `ceil((C_ovHD + N_active * T_accum) / P)`.
pub fn analytic_latency(n_active: u64, hw: &HwConfig) -> u64 {
    ceil_div(
        hw.control_overhead + n_active * hw.accumulate_cycles,
        hw.parallelism.max(1),
    )
}

/// Accumulate work of a conv layer: `F * C_out * sum_i S_i`.
pub fn conv_workload(kernel_area: u64, out_channels: u64, spike_counts: &[u64]) -> u64 {
    kernel_area * out_channels * spike_counts.iter().sum::<u64>()
}

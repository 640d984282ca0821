use super::neuron::{NeuronParams, NeuronState};
use super::ops::{conv_forward_dense, maxpool_spikes};
use super::spikes::SpikeTrain;
use super::topology::{LayerKind, Topology};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Output spikes of every layer, pooling included.
    pub layer_spikes: Vec<SpikeTrain>,
    /// Membrane state of each spiking layer after the last timestep.
    pub final_states: Vec<NeuronState>,
}

impl ForwardOutput {
    pub fn output(&self) -> &SpikeTrain {
        self.layer_spikes.last().expect("topology has at least one layer")
    }
}

pub(crate) fn check_float_weights(topology: &Topology, weights: &[Vec<f64>]) -> Result<()> {
    if weights.len() != topology.layers.len() {
        return Err(Error::Shape(format!(
            "{} weight tensors for {} layers",
            weights.len(),
            topology.layers.len()
        )));
    }
    for (i, (l, w)) in topology.layers.iter().zip(weights).enumerate() {
        if w.len() != l.weight_len() {
            return Err(Error::Shape(format!(
                "layer {i} has {} weights, expected {}",
                w.len(),
                l.weight_len()
            )));
        }
    }
    Ok(())
}

/// Floating-point inference over `T` timesteps. Membranes start at zero and
/// spikes propagate through every layer within the same timestep.
pub fn forward_network(
    topology: &Topology,
    weights: &[Vec<f64>],
    params: &[NeuronParams],
    input: &SpikeTrain,
) -> Result<ForwardOutput> {
    check_float_weights(topology, weights)?;
    if params.len() != topology.num_spiking() {
        return Err(Error::Shape(format!(
            "{} neuron parameter sets for {} spiking layers",
            params.len(),
            topology.num_spiking()
        )));
    }
    if input.shape() != topology.input || input.timesteps() != topology.timesteps {
        return Err(Error::Shape(format!(
            "input {} x {} does not match topology {} x {}",
            input.shape(),
            input.timesteps(),
            topology.input,
            topology.timesteps
        )));
    }
    let mut states: Vec<NeuronState> = topology
        .spiking_layers()
        .map(|(_, l)| NeuronState::zeros(l.out_shape.len()))
        .collect();
    let mut frames: Vec<Vec<Vec<u8>>> = vec![Vec::new(); topology.layers.len()];
    for t in 0..topology.timesteps {
        let mut current = input.frame(t).to_vec();
        let mut si = 0;
        for (li, layer) in topology.layers.iter().enumerate() {
            let next = match layer.kind {
                LayerKind::MaxPool { window } => maxpool_spikes(&current, layer.in_shape, window)?,
                _ => {
                    let syn = conv_forward_dense(&current, &weights[li], layer)?;
                    let (state, spikes) = params[si].step(&states[si], &syn)?;
                    states[si] = state;
                    si += 1;
                    spikes
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
    Ok(ForwardOutput {
        layer_spikes,
        final_states: states,
    })
}

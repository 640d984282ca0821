//! Network topology, neuron dynamics and forward passes.

pub mod fixed;
pub mod forward;
pub mod neuron;
pub mod ops;
pub mod spikes;
pub mod topology;

pub use fixed::{forward_fixed, FixedFormat, FixedForwardOutput, FixedNeuron};
pub use forward::{forward_network, ForwardOutput};
pub use neuron::{
    beta_to_capacitance, lapicque_step, lif_step, LapParams, LifParams, NeuronParams, NeuronState,
    ResetMode,
};
pub use ops::{conv_forward_dense, maxpool_spikes};
pub use spikes::SpikeTrain;
pub use topology::{LayerKind, LayerSpec, Shape, Topology};

//! Checkpoint files.
//!
//! A checkpoint directory holds three files:
//!
//! * `checkpoint.json`: manifest (see [`Manifest`])
//! * `checkpoint.f32.bin`: float weights, little-endian `f32`, layers
//!   concatenated in topology order
//! * `checkpoint.q4.bin`: quantized weights, one `i8` per weight in
//!   [-7, 7], same order
//!
//! Each manifest layer entry gives the weight count and byte offsets into
//! both blobs, plus the quantization scale. Pooling layers have zero weights.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{quantize_weights, QuantizedLayer, QuantizedWeights};
use crate::snn::{NeuronParams, Shape, Topology};
use crate::surrogate::SurrogateSpec;

pub const FORMAT: &str = "spikeperf-checkpoint/1";
pub const MANIFEST_FILE: &str = "checkpoint.json";
pub const FLOAT_FILE: &str = "checkpoint.f32.bin";
pub const QUANT_FILE: &str = "checkpoint.q4.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Validation accuracy when a validation set was used, else training
    /// accuracy of the last epoch.
    pub final_accuracy: f64,
    pub epochs_run: usize,
    pub seed: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub topology: Topology,
    /// One entry per spiking layer.
    pub neurons: Vec<NeuronParams>,
    pub surrogate: SurrogateSpec,
    /// Float weights, rounded to `f32` precision so they survive a save/load
    /// cycle unchanged.
    pub weights: Vec<Vec<f64>>,
    pub quantized: QuantizedWeights,
    pub meta: CheckpointMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub layer: String,
    pub weights: usize,
    pub float_offset: usize,
    pub quantized_offset: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub topology: String,
    pub input_shape: Shape,
    pub timesteps: usize,
    pub neurons: Vec<NeuronParams>,
    pub surrogate: SurrogateSpec,
    pub float_weights: String,
    pub quantized_weights: String,
    pub layers: Vec<LayerEntry>,
    pub metadata: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(
        topology: Topology,
        neurons: Vec<NeuronParams>,
        surrogate: SurrogateSpec,
        weights: &[Vec<f64>],
        meta: CheckpointMeta,
    ) -> Result<Self> {
        crate::snn::forward::check_float_weights(&topology, weights)?;
        if neurons.len() != topology.num_spiking() {
            return Err(Error::Shape(format!(
                "{} neuron parameter sets for {} spiking layers",
                neurons.len(),
                topology.num_spiking()
            )));
        }
        let weights: Vec<Vec<f64>> = weights
            .iter()
            .map(|l| l.iter().map(|&w| f64::from(w as f32)).collect())
            .collect();
        let quantized = quantize_weights(&weights, 4)?;
        Ok(Self {
            topology,
            neurons,
            surrogate,
            weights,
            quantized,
            meta,
        })
    }

    pub fn manifest(&self) -> Manifest {
        let mut float_offset = 0;
        let mut quantized_offset = 0;
        let layers = self
            .topology
            .layers
            .iter()
            .zip(&self.quantized.layers)
            .map(|(l, q)| {
                let n = l.weight_len();
                let e = LayerEntry {
                    layer: Topology {
                        input: l.in_shape,
                        timesteps: 1,
                        layers: vec![*l],
                    }
                    .render(),
                    weights: n,
                    float_offset,
                    quantized_offset,
                    scale: q.scale,
                };
                float_offset += 4 * n;
                quantized_offset += n;
                e
            })
            .collect();
        Manifest {
            format: FORMAT.into(),
            topology: self.topology.render(),
            input_shape: self.topology.input,
            timesteps: self.topology.timesteps,
            neurons: self.neurons.clone(),
            surrogate: self.surrogate,
            float_weights: FLOAT_FILE.into(),
            quantized_weights: QUANT_FILE.into(),
            layers,
            metadata: self.meta.clone(),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let floats: Vec<u8> = self
            .weights
            .iter()
            .flatten()
            .flat_map(|&w| (w as f32).to_le_bytes())
            .collect();
        let ints: Vec<u8> = self
            .quantized
            .layers
            .iter()
            .flat_map(|l| l.values.iter().map(|&q| q as u8))
            .collect();
        let write = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(p, e))
        };
        write(FLOAT_FILE, &floats)?;
        write(QUANT_FILE, &ints)?;
        let json = serde_json::to_string_pretty(&self.manifest())?;
        write(MANIFEST_FILE, format!("{json}\n").as_bytes())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(p, e))
        };
        let m: Manifest = serde_json::from_slice(&read(MANIFEST_FILE)?)?;
        if m.format != FORMAT {
            return Err(Error::Validation(format!("unknown checkpoint format '{}'", m.format)));
        }
        let topology = Topology::parse(&m.topology, m.input_shape, m.timesteps)?;
        if m.layers.len() != topology.layers.len() {
            return Err(Error::Validation(format!(
                "manifest lists {} layers, topology has {}",
                m.layers.len(),
                topology.layers.len()
            )));
        }
        let floats = read(&m.float_weights)?;
        let ints = read(&m.quantized_weights)?;
        let mut weights = Vec::with_capacity(m.layers.len());
        let mut qlayers = Vec::with_capacity(m.layers.len());
        for (i, (entry, spec)) in m.layers.iter().zip(&topology.layers).enumerate() {
            if entry.weights != spec.weight_len() {
                return Err(Error::Shape(format!(
                    "layer {i}: manifest has {} weights, topology needs {}",
                    entry.weights,
                    spec.weight_len()
                )));
            }
            let fb = floats
                .get(entry.float_offset..entry.float_offset + 4 * entry.weights)
                .ok_or_else(|| Error::Validation(format!("layer {i}: float blob too short")))?;
            weights.push(
                fb.chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                    .collect::<Vec<f64>>(),
            );
            let qb = ints
                .get(entry.quantized_offset..entry.quantized_offset + entry.weights)
                .ok_or_else(|| Error::Validation(format!("layer {i}: quantized blob too short")))?;
            qlayers.push(QuantizedLayer {
                values: qb.iter().map(|&b| b as i8).collect(),
                scale: entry.scale,
            });
        }
        let quantized = QuantizedWeights { layers: qlayers };
        quantized.validate()?;
        if m.neurons.len() != topology.num_spiking() {
            return Err(Error::Shape("neuron parameters do not match spiking layers".into()));
        }
        for n in &m.neurons {
            n.validate()?;
        }
        Ok(Self {
            topology,
            neurons: m.neurons,
            surrogate: m.surrogate,
            weights,
            quantized,
            meta: m.metadata,
        })
    }
}

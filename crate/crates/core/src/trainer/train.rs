use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::config::TrainConfig;
use super::graph::{BpttOptions, Engine};
use super::loss::{cosine_lr, predict, rate_loss_grad};
use crate::error::{Error, Result};
use crate::metrics::activity_density;
use crate::snn::fixed::{fixed_neurons, forward_fixed, FixedFormat};
use crate::snn::{forward_network, NeuronParams, SpikeTrain, Topology};
use crate::surrogate::SurrogateSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub input: SpikeTrain,
    pub label: usize,
}

/// Weights and neurons being trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub topology: Topology,
    pub neurons: Vec<NeuronParams>,
    pub weights: Vec<Vec<f64>>,
}

impl Network {
    /// Uniform init in `±gain·sqrt(6 / fan_in)` per layer.
    pub fn init(
        topology: Topology,
        neuron: NeuronParams,
        gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let weights = topology
            .layers
            .iter()
            .map(|l| {
                if !l.is_spiking() {
                    return Vec::new();
                }
                let bound = gain * (6.0 / l.fan_in() as f64).sqrt();
                (0..l.weight_len()).map(|_| rng.gen_range(-bound..bound)).collect()
            })
            .collect();
        let neurons = vec![neuron; topology.num_spiking()];
        Self {
            topology,
            neurons,
            weights,
        }
    }
}

/// Batch-averaged gradients and the forward statistics gathered on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    pub grads: Vec<Vec<f64>>,
    pub loss: f64,
    pub correct: usize,
    /// Spikes per neuron per timestep over the batch.
    pub density: f64,
}

fn check_samples(topology: &Topology, batch: &[Sample]) -> Result<()> {
    let classes = topology.output_shape().len();
    for (i, s) in batch.iter().enumerate() {
        if s.input.shape() != topology.input || s.input.timesteps() != topology.timesteps {
            return Err(Error::Shape(format!(
                "sample {i} is {} x {}, network expects {} x {}",
                s.input.shape(),
                s.input.timesteps(),
                topology.input,
                topology.timesteps
            )));
        }
        if s.label >= classes {
            return Err(Error::Validation(format!(
                "sample {i} label {} but only {classes} outputs",
                s.label
            )));
        }
    }
    Ok(())
}

/// Surrogate for one sample: the stochastic operator gets a fresh stream per
/// sample so noise is not replayed identically every epoch.
fn sample_surrogate(base: &SurrogateSpec, counter: u64) -> SurrogateSpec {
    let mut s = *base;
    s.rng_seed = base.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(counter);
    s
}

/// BPTT gradients of the mean rate loss over `batch`.
pub fn bptt_gradients(
    net: &Network,
    batch: &[Sample],
    surrogate: &SurrogateSpec,
    opts: BpttOptions,
) -> Result<BatchGradients> {
    bptt_with_counter(net, batch, surrogate, opts, 0)
}

fn bptt_with_counter(
    net: &Network,
    batch: &[Sample],
    surrogate: &SurrogateSpec,
    opts: BpttOptions,
    counter: u64,
) -> Result<BatchGradients> {
    check_samples(&net.topology, batch)?;
    let engine = Engine::new(&net.topology, &net.neurons)?;
    let mut grads: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut loss = 0.0;
    let mut correct = 0;
    let mut spikes = 0.0;
    for (k, s) in batch.iter().enumerate() {
        let sg = sample_surrogate(surrogate, counter + k as u64);
        let trace = engine.forward(&net.weights, &s.input, &sg, opts)?;
        let (l, dcounts) = rate_loss_grad(&trace.counts, s.label);
        if !l.is_finite() {
            return Err(Error::Divergence {
                layer: net.topology.layers.len() - 1,
                timestep: net.topology.timesteps - 1,
                detail: format!("loss is {l}"),
            });
        }
        loss += l;
        correct += usize::from(predict(&trace.counts) == s.label);
        spikes += trace.spikes;
        engine.backward(&trace, &net.weights, &dcounts, &sg, opts, &mut grads)?;
    }
    let n = batch.len().max(1) as f64;
    for g in grads.iter_mut().flatten() {
        *g /= n;
    }
    let denom = n * (net.topology.timesteps * net.topology.total_neurons()) as f64;
    Ok(BatchGradients {
        grads,
        loss: loss / n,
        correct,
        density: spikes / denom,
    })
}

/// Mean rate loss over `batch` without a backward pass.
pub fn batch_loss(
    net: &Network,
    batch: &[Sample],
    surrogate: &SurrogateSpec,
    opts: BpttOptions,
) -> Result<f64> {
    check_samples(&net.topology, batch)?;
    let engine = Engine::new(&net.topology, &net.neurons)?;
    let mut loss = 0.0;
    for (k, s) in batch.iter().enumerate() {
        let sg = sample_surrogate(surrogate, k as u64);
        let trace = engine.forward(&net.weights, &s.input, &sg, opts)?;
        loss += super::loss::rate_loss(&trace.counts, s.label);
    }
    Ok(loss / batch.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub density: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub epoch: usize,
    pub layer: usize,
    pub timestep: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    /// Final (or, after divergence, last good) weights.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    pub divergence: Option<Divergence>,
}

impl TrainRun {
    /// Turns a recorded divergence into an error.
    pub fn into_result(self) -> Result<Checkpoint> {
        match self.divergence {
            None => Ok(self.checkpoint),
            Some(d) => Err(Error::Divergence {
                layer: d.layer,
                timestep: d.timestep,
                detail: format!("epoch {}: {}", d.epoch, d.detail),
            }),
        }
    }
}

/// SGD with momentum under a cosine schedule. With a validation set, the
/// best-scoring weights are kept and training stops after `patience` epochs
/// without improvement.
pub fn train(config: &TrainConfig, train_set: &[Sample], val_set: Option<&[Sample]>) -> Result<TrainRun> {
    config.validate()?;
    let first = train_set
        .first()
        .ok_or_else(|| Error::Empty("training set has no samples".into()))?;
    let topology = config.build_topology(first.input.shape())?;
    check_samples(&topology, train_set)?;
    if let Some(v) = val_set {
        check_samples(&topology, v)?;
    }
    let surrogate = config.surrogate();
    let mut run_surrogate = surrogate;
    run_surrogate.rng_seed ^= config.seed.rotate_left(32);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(topology, config.neuron()?, config.init_gain, &mut rng);
    let opts = BpttOptions {
        detach_reset: config.detach_reset,
        ..BpttOptions::default()
    };
    let mut velocity: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut since_best = 0;
    let mut divergence = None;
    let mut counter = 0u64;

    'epochs: for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config.epochs, config.lr0, config.lr_min);
        order.shuffle(&mut rng);
        let (mut loss, mut correct, mut density) = (0.0, 0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let g = match bptt_with_counter(&net, &batch, &run_surrogate, opts, counter) {
                Ok(g) => g,
                Err(Error::Divergence {
                    layer,
                    timestep,
                    detail,
                }) => {
                    divergence = Some(Divergence {
                        epoch,
                        layer,
                        timestep,
                        detail,
                    });
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            counter += batch.len() as u64;
            let w = batch.len() as f64;
            loss += g.loss * w;
            correct += g.correct;
            density += g.density * w;
            let mut next = net.weights.clone();
            for ((wl, vl), gl) in next.iter_mut().zip(&mut velocity).zip(&g.grads) {
                for ((w, v), &gr) in wl.iter_mut().zip(vl.iter_mut()).zip(gl) {
                    *v = config.momentum * *v + gr;
                    *w -= lr * *v;
                }
            }
            if let Some((li, _)) = next
                .iter()
                .enumerate()
                .flat_map(|(li, l)| l.iter().map(move |w| (li, w)))
                .find(|(_, w)| !w.is_finite() || w.abs() > f64::from(f32::MAX))
            {
                divergence = Some(Divergence {
                    epoch,
                    layer: li,
                    timestep: 0,
                    detail: "weight update left the representable range".into(),
                });
                break 'epochs;
            }
            net.weights = next;
        }
        let n = train_set.len() as f64;
        let val_accuracy = match val_set {
            Some(v) => Some(accuracy_of(&net, v)?),
            None => None,
        };
        let stats = EpochStats {
            epoch,
            lr,
            train_loss: loss / n,
            train_accuracy: correct as f64 / n,
            density: density / n,
            val_accuracy,
        };
        info!(
            "epoch {epoch}: loss {:.4} acc {:.3} density {:.4}{}",
            stats.train_loss,
            stats.train_accuracy,
            stats.density,
            val_accuracy.map_or(String::new(), |a| format!(" val {a:.3}"))
        );
        history.push(stats);
        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, net.weights.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    info!("no validation improvement for {since_best} epochs, stopping");
                    break;
                }
            }
        }
    }

    let final_accuracy = match &best {
        Some((acc, w)) if divergence.is_none() => {
            net.weights = w.clone();
            *acc
        }
        _ => history.last().map_or(0.0, |s| s.val_accuracy.unwrap_or(s.train_accuracy)),
    };
    let meta = CheckpointMeta {
        final_accuracy,
        epochs_run: history.len(),
        seed: config.seed,
        diverged: divergence.is_some(),
    };
    let checkpoint = Checkpoint::new(net.topology, net.neurons, surrogate, &net.weights, meta)?;
    Ok(TrainRun {
        checkpoint,
        history,
        divergence,
    })
}

fn accuracy_of(net: &Network, data: &[Sample]) -> Result<f64> {
    let engine = Engine::new(&net.topology, &net.neurons)?;
    let sg = SurrogateSpec::default();
    let mut correct = 0;
    for s in data {
        let trace = engine.forward(&net.weights, &s.input, &sg, BpttOptions::default())?;
        correct += usize::from(predict(&trace.counts) == s.label);
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean spikes per neuron per timestep over spiking layers.
    pub density: f64,
    pub samples: usize,
    pub quantized: bool,
}

/// Classifies by the most active output neuron (lowest index on ties),
/// using either the float weights or the deployed fixed-point arithmetic.
pub fn evaluate(checkpoint: &Checkpoint, data: &[Sample], use_quantized: bool) -> Result<Evaluation> {
    let topo = &checkpoint.topology;
    check_samples(topo, data)?;
    let fixed = if use_quantized {
        Some(fixed_neurons(
            topo,
            &checkpoint.quantized,
            &checkpoint.neurons,
            FixedFormat::default(),
        )?)
    } else {
        None
    };
    let mut correct = 0;
    let mut density = 0.0;
    for s in data {
        let layers = match &fixed {
            Some(neurons) => forward_fixed(topo, &checkpoint.quantized, neurons, &s.input)?.layer_spikes,
            None => forward_network(topo, &checkpoint.weights, &checkpoint.neurons, &s.input)?.layer_spikes,
        };
        let counts: Vec<f64> = layers
            .last()
            .expect("topology has layers")
            .counts_per_neuron()
            .iter()
            .map(|&c| f64::from(c))
            .collect();
        correct += usize::from(predict(&counts) == s.label);
        let spiking: Vec<&SpikeTrain> = topo
            .spiking_layers()
            .map(|(i, _)| &layers[i])
            .collect();
        density += activity_density(&spiking)?;
    }
    let n = data.len().max(1) as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        density: density / n,
        samples: data.len(),
        quantized: use_quantized,
    })
}

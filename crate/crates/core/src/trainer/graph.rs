//! Unrolled forward pass with a saved trace, and its BPTT backward pass.
//!
//! Per spiking layer and timestep:
//!
//! ```text
//! v[t] = decay * u[t-1] + gain * (W x[t])
//! s[t] = f(v[t] - theta)
//! u[t] = v[t] - theta * s[t]      (subtract reset)
//! u[t] = v[t] * (1 - s[t])        (zero reset)
//! ```
//!
//! `f` is the Heaviside step during training, with the surrogate standing in
//! for its derivative, or the smooth relaxed primitive for gradient checks.
//! With binary spikes this is exactly the float forward pass of
//! [`crate::snn::forward_network`].

use crate::error::{Error, Result};
use crate::snn::{LayerKind, LayerSpec, NeuronParams, ResetMode, Topology};
use crate::surrogate::{heaviside, relaxed_forward, relaxed_gain, SampleKey, SurrogateSpec};

/// Sparse connection table: for each input index, the `(output, weight)`
/// index pairs it feeds.
#[derive(Debug, Clone)]
pub(crate) struct Connectivity {
    starts: Vec<u32>,
    links: Vec<(u32, u32)>,
}

impl Connectivity {
    pub(crate) fn new(spec: &LayerSpec) -> Self {
        let ins = spec.in_shape;
        let outs = spec.out_shape;
        let mut starts = Vec::with_capacity(ins.len() + 1);
        let mut links = Vec::new();
        starts.push(0);
        for i in 0..ins.len() {
            match spec.kind {
                LayerKind::Conv {
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let (ic, iy, ix) = ins.coords(i);
                    for oc in 0..outs.channels {
                        for ky in 0..kernel {
                            let ny = (iy + padding) as isize - ky as isize;
                            if ny < 0 || !(ny as usize).is_multiple_of(stride) || ny as usize / stride >= outs.height
                            {
                                continue;
                            }
                            let oy = ny as usize / stride;
                            for kx in 0..kernel {
                                let nx = (ix + padding) as isize - kx as isize;
                                if nx < 0
                                    || !(nx as usize).is_multiple_of(stride)
                                    || nx as usize / stride >= outs.width
                                {
                                    continue;
                                }
                                let ox = nx as usize / stride;
                                links.push((
                                    outs.index(oc, oy, ox) as u32,
                                    spec.conv_weight_index(oc, ic, ky, kx) as u32,
                                ));
                            }
                        }
                    }
                }
                LayerKind::FullyConnected { out_features } => {
                    for o in 0..out_features {
                        links.push((o as u32, (o * ins.len() + i) as u32));
                    }
                }
                LayerKind::MaxPool { .. } => {}
            }
            starts.push(links.len() as u32);
        }
        Self { starts, links }
    }

    #[inline]
    fn of(&self, input: usize) -> &[(u32, u32)] {
        &self.links[self.starts[input] as usize..self.starts[input + 1] as usize]
    }

    /// `out += W x`, skipping zero inputs.
    fn forward(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for &(o, k) in self.of(i) {
                    out[o as usize] += w[k as usize] * xi;
                }
            }
        }
    }

    /// `dw += g xᵀ` over non-zero inputs.
    fn weight_grad(&self, x: &[f64], g: &[f64], dw: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for &(o, k) in self.of(i) {
                    dw[k as usize] += g[o as usize] * xi;
                }
            }
        }
    }

    /// `Wᵀ g`.
    fn input_grad(&self, w: &[f64], g: &[f64], dx: &mut [f64]) {
        for (i, d) in dx.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(o, k) in self.of(i) {
                acc += w[k as usize] * g[o as usize];
            }
            *d = acc;
        }
    }
}

/// Forward nonlinearity used while unrolling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeFn {
    /// Binary spikes; the surrogate replaces the derivative.
    #[default]
    Heaviside,
    /// Smooth relaxed primitive with its exact derivative.
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BpttOptions {
    pub spike_fn: SpikeFn,
    /// Block gradient flow through the reset term.
    pub detach_reset: bool,
}

impl Default for BpttOptions {
    fn default() -> Self {
        Self {
            spike_fn: SpikeFn::Heaviside,
            detach_reset: true,
        }
    }
}

enum LayerTrace {
    Spiking {
        inputs: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        s: Vec<Vec<f64>>,
    },
    Pool {
        argmax: Vec<Vec<u32>>,
    },
}

/// Recorded activity of one sample.
pub(crate) struct Trace {
    layers: Vec<LayerTrace>,
    /// Output of the last layer summed over time.
    pub counts: Vec<f64>,
    /// Spikes emitted by spiking layers, summed over neurons and time.
    pub spikes: f64,
}

/// Topology plus cached connectivity.
pub(crate) struct Engine<'a> {
    pub topology: &'a Topology,
    pub params: &'a [NeuronParams],
    conns: Vec<Option<Connectivity>>,
    first_spiking: usize,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(topology: &'a Topology, params: &'a [NeuronParams]) -> Result<Self> {
        if params.len() != topology.num_spiking() {
            return Err(Error::Shape(format!(
                "{} neuron parameter sets for {} spiking layers",
                params.len(),
                topology.num_spiking()
            )));
        }
        let conns = topology
            .layers
            .iter()
            .map(|l| l.is_spiking().then(|| Connectivity::new(l)))
            .collect();
        let first_spiking = topology
            .layers
            .iter()
            .position(LayerSpec::is_spiking)
            .ok_or_else(|| Error::Config("topology has no spiking layer".into()))?;
        Ok(Self {
            topology,
            params,
            conns,
            first_spiking,
        })
    }

    fn spike(
        &self,
        opts: BpttOptions,
        sg: &SurrogateSpec,
        x: f64,
    ) -> Result<f64> {
        Ok(match opts.spike_fn {
            SpikeFn::Heaviside => f64::from(heaviside(x)),
            SpikeFn::Relaxed => relaxed_forward(sg, x)?,
        })
    }

    pub(crate) fn forward(
        &self,
        weights: &[Vec<f64>],
        input: &crate::snn::SpikeTrain,
        sg: &SurrogateSpec,
        opts: BpttOptions,
    ) -> Result<Trace> {
        let topo = self.topology;
        let steps = topo.timesteps;
        let mut layers: Vec<LayerTrace> = topo
            .layers
            .iter()
            .map(|l| {
                if l.is_spiking() {
                    LayerTrace::Spiking {
                        inputs: Vec::with_capacity(steps),
                        v: Vec::with_capacity(steps),
                        s: Vec::with_capacity(steps),
                    }
                } else {
                    LayerTrace::Pool {
                        argmax: Vec::with_capacity(steps),
                    }
                }
            })
            .collect();
        let mut membranes: Vec<Vec<f64>> = topo
            .layers
            .iter()
            .map(|l| if l.is_spiking() { vec![0.0; l.out_shape.len()] } else { Vec::new() })
            .collect();
        let mut counts = vec![0.0; topo.output_shape().len()];
        let mut spikes = 0.0;
        for t in 0..steps {
            let mut x: Vec<f64> = input.frame(t).iter().map(|&b| f64::from(b)).collect();
            let mut si = 0;
            for (li, layer) in topo.layers.iter().enumerate() {
                match &mut layers[li] {
                    LayerTrace::Pool { argmax } => {
                        let LayerKind::MaxPool { window } = layer.kind else {
                            unreachable!()
                        };
                        let (out, idx) = maxpool_forward(&x, layer, window);
                        argmax.push(idx);
                        x = out;
                    }
                    LayerTrace::Spiking { inputs, v, s } => {
                        let p = &self.params[si];
                        let (decay, gain, theta) = (p.decay(), p.gain(), p.theta());
                        let mut syn = vec![0.0; layer.out_shape.len()];
                        self.conns[li]
                            .as_ref()
                            .expect("spiking layer has connectivity")
                            .forward(&x, &weights[li], &mut syn);
                        let u = &mut membranes[li];
                        let mut vt = Vec::with_capacity(syn.len());
                        let mut st = Vec::with_capacity(syn.len());
                        for (n, (un, sy)) in u.iter_mut().zip(&syn).enumerate() {
                            let vn = decay * *un + sy * gain;
                            if !vn.is_finite() {
                                return Err(Error::Divergence {
                                    layer: li,
                                    timestep: t,
                                    detail: format!("membrane of neuron {n} is {vn}"),
                                });
                            }
                            let sn = self.spike(opts, sg, vn - theta)?;
                            *un = match p.reset() {
                                ResetMode::Subtract => vn - theta * sn,
                                ResetMode::Zero => vn * (1.0 - sn),
                            };
                            vt.push(vn);
                            st.push(sn);
                        }
                        spikes += st.iter().sum::<f64>();
                        inputs.push(std::mem::replace(&mut x, st.clone()));
                        v.push(vt);
                        s.push(st);
                        si += 1;
                    }
                }
            }
            for (c, xi) in counts.iter_mut().zip(&x) {
                *c += xi;
            }
        }
        Ok(Trace {
            layers,
            counts,
            spikes,
        })
    }

    /// Accumulates `dL/dW` into `grads` given `dL/dcounts`.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        weights: &[Vec<f64>],
        dcounts: &[f64],
        sg: &SurrogateSpec,
        opts: BpttOptions,
        grads: &mut [Vec<f64>],
    ) -> Result<()> {
        let topo = self.topology;
        let gain_scale = match opts.spike_fn {
            SpikeFn::Heaviside => 1.0,
            SpikeFn::Relaxed => relaxed_gain(sg)?,
        };
        // dL/du[t] carried backwards through the membrane recurrence.
        let mut carry: Vec<Vec<f64>> = topo
            .layers
            .iter()
            .map(|l| if l.is_spiking() { vec![0.0; l.out_shape.len()] } else { Vec::new() })
            .collect();
        let spiking_index: Vec<usize> = {
            let mut k = 0;
            topo.layers
                .iter()
                .map(|l| {
                    let i = k;
                    if l.is_spiking() {
                        k += 1;
                    }
                    i
                })
                .collect()
        };
        for t in (0..topo.timesteps).rev() {
            let mut ds = dcounts.to_vec();
            for li in (0..topo.layers.len()).rev() {
                let layer = &topo.layers[li];
                match &trace.layers[li] {
                    LayerTrace::Pool { argmax } => {
                        let mut din = vec![0.0; layer.in_shape.len()];
                        for (o, &i) in argmax[t].iter().enumerate() {
                            din[i as usize] += ds[o];
                        }
                        ds = din;
                    }
                    LayerTrace::Spiking { inputs, v, s } => {
                        let p = &self.params[spiking_index[li]];
                        let (decay, gain, theta) = (p.decay(), p.gain(), p.theta());
                        let reset = p.reset();
                        let gu = &mut carry[li];
                        let mut gsyn = vec![0.0; gu.len()];
                        for n in 0..gu.len() {
                            let vn = v[t][n];
                            let sn = s[t][n];
                            let x = vn - theta;
                            let dsdv = gain_scale
                                * sg.grad_at(x, SampleKey::new(li, t, n));
                            let (du_dv, du_ds) = match reset {
                                ResetMode::Subtract => (1.0, -theta),
                                ResetMode::Zero => (1.0 - sn, -vn),
                            };
                            let mut total_ds = ds[n];
                            if !opts.detach_reset {
                                total_ds += gu[n] * du_ds;
                            }
                            let gv = gu[n] * du_dv + total_ds * dsdv;
                            if !gv.is_finite() {
                                return Err(Error::Divergence {
                                    layer: li,
                                    timestep: t,
                                    detail: format!("gradient of neuron {n} is {gv}"),
                                });
                            }
                            gu[n] = gv * decay;
                            gsyn[n] = gv * gain;
                        }
                        let conn = self.conns[li].as_ref().expect("spiking layer has connectivity");
                        conn.weight_grad(&inputs[t], &gsyn, &mut grads[li]);
                        if li > self.first_spiking {
                            let mut dx = vec![0.0; layer.in_shape.len()];
                            conn.input_grad(&weights[li], &gsyn, &mut dx);
                            ds = dx;
                        } else {
                            break;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn maxpool_forward(x: &[f64], layer: &LayerSpec, window: usize) -> (Vec<f64>, Vec<u32>) {
    let ins = layer.in_shape;
    let outs = layer.out_shape;
    let mut out = vec![f64::NEG_INFINITY; outs.len()];
    let mut idx = vec![0u32; outs.len()];
    for c in 0..outs.channels {
        for oy in 0..outs.height {
            for ox in 0..outs.width {
                let o = outs.index(c, oy, ox);
                for dy in 0..window {
                    for dx in 0..window {
                        let i = ins.index(c, oy * window + dy, ox * window + dx);
                        if x[i] > out[o] {
                            out[o] = x[i];
                            idx[o] = i as u32;
                        }
                    }
                }
            }
        }
    }
    (out, idx)
}

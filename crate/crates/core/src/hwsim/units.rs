//! Priority encoder and address generation.

use crate::error::{Error, Result};
use crate::snn::{LayerKind, LayerSpec};

/// Indices of set bits in ascending order, as the priority encoder emits
/// them one per cycle.
pub fn penc_scan(bits: &[u8]) -> Vec<usize> {
    bits.iter()
        .enumerate()
        .filter_map(|(i, &b)| (b != 0).then_some(i))
        .collect()
}

/// Output neurons reached by one active input, with the weight used for each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AguTargets {
    /// `(output neuron index, weight index)`.
    pub targets: Vec<(usize, usize)>,
}

impl AguTargets {
    pub fn count(&self) -> usize {
        self.targets.len()
    }
}

/// For a conv layer, every output position whose receptive field covers the
/// input pixel, across all output channels (at most `F·C_out`, fewer at
/// borders). For an FC layer, every output.
pub fn agu_targets(index: usize, spec: &LayerSpec) -> Result<AguTargets> {
    let mut targets = Vec::new();
    agu_visit(index, spec, |o, w| targets.push((o, w)))?;
    Ok(AguTargets { targets })
}

pub(crate) fn agu_visit(
    index: usize,
    spec: &LayerSpec,
    mut f: impl FnMut(usize, usize),
) -> Result<()> {
    let ins = spec.in_shape;
    let outs = spec.out_shape;
    if index >= ins.len() {
        return Err(Error::Shape(format!(
            "input index {index} outside layer input of {} neurons",
            ins.len()
        )));
    }
    match spec.kind {
        LayerKind::Conv {
            out_channels,
            kernel,
            stride,
            padding,
        } => {
            let (ic, iy, ix) = ins.coords(index);
            // Output rows/cols o with o*stride + k - padding == i for some k.
            let span = |i: usize, limit: usize| {
                (0..kernel).filter_map(move |k| {
                    let n = (i + padding).checked_sub(k)?;
                    (n % stride == 0 && n / stride < limit).then_some((n / stride, k))
                })
            };
            for oc in 0..out_channels {
                for (oy, ky) in span(iy, outs.height) {
                    for (ox, kx) in span(ix, outs.width) {
                        f(outs.index(oc, oy, ox), spec.conv_weight_index(oc, ic, ky, kx));
                    }
                }
            }
        }
        LayerKind::FullyConnected { out_features } => {
            for o in 0..out_features {
                f(o, o * ins.len() + index);
            }
        }
        LayerKind::MaxPool { .. } => {
            return Err(Error::Shape("pooling layers have no address generation".into()));
        }
    }
    Ok(())
}

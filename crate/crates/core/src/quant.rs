//! Symmetric per-layer 4-bit post-training weight quantization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest representable magnitude for signed 4-bit weights (symmetric, so
/// -8 is unused).
pub const Q4_MAX: i8 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLayer {
    pub values: Vec<i8>,
    pub scale: f64,
}

impl QuantizedLayer {
    pub fn dequantize(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&q| f64::from(q) * self.scale)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Validation(format!("scale {} must be > 0", self.scale)));
        }
        if let Some(q) = self.values.iter().find(|q| q.abs() > Q4_MAX) {
            return Err(Error::Validation(format!("quantized weight {q} outside [-7, 7]")));
        }
        Ok(())
    }
}

/// One entry per topology layer; pooling layers carry an empty tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedWeights {
    pub layers: Vec<QuantizedLayer>,
}

impl QuantizedWeights {
    pub fn validate(&self) -> Result<()> {
        self.layers.iter().try_for_each(QuantizedLayer::validate)
    }
}

/// `scale = max|w| / 7`, `q = clamp(round(w / scale), -7, 7)` with
/// round-half-away-from-zero. An all-zero layer gets scale 1.
pub fn quantize_layer(weights: &[f64], bits: u32) -> Result<QuantizedLayer> {
    if bits != 4 {
        return Err(Error::Unsupported(format!("{bits}-bit quantization")));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::Numeric(format!("non-finite weight at index {i}")));
    }
    let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max == 0.0 {
        return Ok(QuantizedLayer {
            values: vec![0; weights.len()],
            scale: 1.0,
        });
    }
    let scale = max / f64::from(Q4_MAX);
    let lim = f64::from(Q4_MAX);
    let values = weights
        .iter()
        .map(|&w| (w / scale).round().clamp(-lim, lim) as i8)
        .collect();
    Ok(QuantizedLayer { values, scale })
}

pub fn quantize_weights(layers: &[Vec<f64>], bits: u32) -> Result<QuantizedWeights> {
    Ok(QuantizedWeights {
        layers: layers
            .iter()
            .map(|w| quantize_layer(w, bits))
            .collect::<Result<_>>()?,
    })
}

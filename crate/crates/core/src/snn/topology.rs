//! Layer grammar and shape arithmetic.
//!
//! A topology is written as dash-separated tokens:
//!
//! * `XCY`: convolution with `X` output channels and a `Y`×`Y` kernel. Stride
//!   defaults to 1 and padding to `Y/2`; either can be overridden with an `s`
//!   or `p` suffix, e.g. `16C3s2p0`.
//! * `MPZ`: `Z`×`Z` max pooling over spikes (binary OR). Spatial dims must be
//!   divisible by `Z`.
//! * `FCN` (or a bare `N`): fully connected layer with `N` outputs.
//!
//! `render` emits the canonical form, so `parse(render(t)) == t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channels × height × width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub const fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    /// Inverse of [`Shape::index`].
    #[inline]
    pub const fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let plane = self.height * self.width;
        (idx / plane, (idx % plane) / self.width, idx % self.width)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        window: usize,
    },
    FullyConnected {
        out_features: usize,
    },
}

impl LayerKind {
    pub fn conv(out_channels: usize, kernel: usize) -> Self {
        LayerKind::Conv {
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
        }
    }

    fn render(&self) -> String {
        match *self {
            LayerKind::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let mut s = format!("{out_channels}C{kernel}");
                if stride != 1 {
                    s.push_str(&format!("s{stride}"));
                }
                if padding != kernel / 2 {
                    s.push_str(&format!("p{padding}"));
                }
                s
            }
            LayerKind::MaxPool { window } => format!("MP{window}"),
            LayerKind::FullyConnected { out_features } => format!("FC{out_features}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_shape: Shape,
    pub out_shape: Shape,
}

impl LayerSpec {
    /// Builds a layer and derives its output shape.
    pub fn new(kind: LayerKind, in_shape: Shape) -> Result<Self> {
        if in_shape.is_empty() {
            return Err(Error::Shape(format!("empty input shape {in_shape}")));
        }
        let out_shape = match kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::Config(format!(
                        "conv needs out_channels, kernel and stride >= 1 (got {out_channels}, {kernel}, {stride})"
                    )));
                }
                let h = in_shape.height + 2 * padding;
                let w = in_shape.width + 2 * padding;
                if h < kernel || w < kernel {
                    return Err(Error::Shape(format!(
                        "kernel {kernel} larger than padded input {h}x{w}"
                    )));
                }
                Shape::new(out_channels, (h - kernel) / stride + 1, (w - kernel) / stride + 1)
            }
            LayerKind::MaxPool { window } => {
                if window == 0 {
                    return Err(Error::Config("pool window must be >= 1".into()));
                }
                if !in_shape.height.is_multiple_of(window) || !in_shape.width.is_multiple_of(window) {
                    return Err(Error::Shape(format!(
                        "pool window {window} does not divide {}x{}",
                        in_shape.height, in_shape.width
                    )));
                }
                Shape::new(
                    in_shape.channels,
                    in_shape.height / window,
                    in_shape.width / window,
                )
            }
            LayerKind::FullyConnected { out_features } => {
                if out_features == 0 {
                    return Err(Error::Config("fc layer needs >= 1 output".into()));
                }
                Shape::new(out_features, 1, 1)
            }
        };
        Ok(Self {
            kind,
            in_shape,
            out_shape,
        })
    }

    /// Conv and FC layers hold neurons; pooling does not.
    pub fn is_spiking(&self) -> bool {
        !matches!(self.kind, LayerKind::MaxPool { .. })
    }

    /// Number of synaptic weights, zero for pooling.
    pub fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                ..
            } => out_channels * self.in_shape.channels * kernel * kernel,
            LayerKind::MaxPool { .. } => 0,
            LayerKind::FullyConnected { out_features } => out_features * self.in_shape.len(),
        }
    }

    /// Fan-in of one output neuron.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv { kernel, .. } => self.in_shape.channels * kernel * kernel,
            LayerKind::MaxPool { window } => window * window,
            LayerKind::FullyConnected { .. } => self.in_shape.len(),
        }
    }

    /// Index into a conv weight tensor laid out `[out][in][ky][kx]`.
    #[inline]
    pub fn conv_weight_index(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        let k = match self.kind {
            LayerKind::Conv { kernel, .. } => kernel,
            _ => unreachable!("conv_weight_index on non-conv layer"),
        };
        ((oc * self.in_shape.channels + ic) * k + ky) * k + kx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub input: Shape,
    pub timesteps: usize,
    pub layers: Vec<LayerSpec>,
}

impl Topology {
    pub fn parse(grammar: &str, input: Shape, timesteps: usize) -> Result<Self> {
        if timesteps == 0 {
            return Err(Error::Config("timesteps must be >= 1".into()));
        }
        let grammar = grammar.trim();
        if grammar.is_empty() {
            return Err(Error::Config("empty topology grammar".into()));
        }
        let mut layers = Vec::new();
        let mut shape = input;
        for token in grammar.split('-') {
            let kind = parse_token(token.trim())?;
            let layer = LayerSpec::new(kind, shape)?;
            shape = layer.out_shape;
            layers.push(layer);
        }
        Ok(Self {
            input,
            timesteps,
            layers,
        })
    }

    pub fn render(&self) -> String {
        self.layers
            .iter()
            .map(|l| l.kind.render())
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.out_shape)
    }

    pub fn spiking_layers(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.is_spiking())
    }

    pub fn num_spiking(&self) -> usize {
        self.layers.iter().filter(|l| l.is_spiking()).count()
    }

    /// Neurons across all spiking layers.
    pub fn total_neurons(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.is_spiking())
            .map(|l| l.out_shape.len())
            .sum()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerSpec::weight_len).sum()
    }

    /// Checks that adjacent layer shapes chain.
    pub fn validate(&self) -> Result<()> {
        let mut shape = self.input;
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_shape != shape {
                return Err(Error::Shape(format!(
                    "layer {i} expects input {} but receives {shape}",
                    l.in_shape
                )));
            }
            let derived = LayerSpec::new(l.kind, l.in_shape)?;
            if derived.out_shape != l.out_shape {
                return Err(Error::Shape(format!("layer {i} output shape is inconsistent")));
            }
            shape = l.out_shape;
        }
        Ok(())
    }
}

fn parse_usize(s: &str, token: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::Config(format!("bad number '{s}' in layer token '{token}'")))
}

fn parse_token(token: &str) -> Result<LayerKind> {
    let upper = token.to_ascii_uppercase();
    if let Some(rest) = upper.strip_prefix("MP") {
        return Ok(LayerKind::MaxPool {
            window: parse_usize(rest, token)?,
        });
    }
    if let Some(rest) = upper.strip_prefix("FC") {
        return Ok(LayerKind::FullyConnected {
            out_features: parse_usize(rest, token)?,
        });
    }
    if let Some((channels, rest)) = upper.split_once('C') {
        let out_channels = parse_usize(channels, token)?;
        let digits_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        let kernel = parse_usize(&rest[..digits_end], token)?;
        let mut stride = 1;
        let mut padding = kernel / 2;
        let mut tail = &rest[digits_end..];
        while !tail.is_empty() {
            let (flag, after) = tail.split_at(1);
            let end = after.find(|c: char| !c.is_ascii_digit()).unwrap_or(after.len());
            let value = parse_usize(&after[..end], token)?;
            match flag {
                "S" => stride = value,
                "P" => padding = value,
                _ => return Err(Error::Config(format!("unknown conv option in '{token}'"))),
            }
            tail = &after[end..];
        }
        return Ok(LayerKind::Conv {
            out_channels,
            kernel,
            stride,
            padding,
        });
    }
    if !upper.is_empty() && upper.chars().all(|c| c.is_ascii_digit()) {
        return Ok(LayerKind::FullyConnected {
            out_features: parse_usize(&upper, token)?,
        });
    }
    Err(Error::Config(format!("unrecognized layer token '{token}'")))
}

//! Dense layer arithmetic on spike frames.
//!
//! These are the straightforward gather loops used as the functional
//! reference. The event-driven simulator reproduces them by scattering only
//! active inputs.

use super::spikes::SpikeTrain;
use super::topology::{LayerKind, LayerSpec, Shape};
use crate::error::{Error, Result};

fn check_weights(spec: &LayerSpec, len: usize) -> Result<()> {
    if !spec.is_spiking() {
        return Err(Error::Shape("pooling layers have no weights".into()));
    }
    if len != spec.weight_len() {
        return Err(Error::Shape(format!(
            "layer expects {} weights, got {len}",
            spec.weight_len()
        )));
    }
    Ok(())
}

/// Dense gather over a layer's receptive fields with a caller-supplied
/// accumulator type.
fn gather<W: Copy, A: Copy + Default + std::ops::AddAssign>(
    frame: &[u8],
    weights: &[W],
    spec: &LayerSpec,
    widen: impl Fn(W) -> A,
) -> Vec<A> {
    let ins = spec.in_shape;
    let outs = spec.out_shape;
    let mut out = vec![A::default(); outs.len()];
    match spec.kind {
        LayerKind::Conv {
            kernel,
            stride,
            padding,
            ..
        } => {
            for oc in 0..outs.channels {
                for oy in 0..outs.height {
                    for ox in 0..outs.width {
                        let mut acc = A::default();
                        for ic in 0..ins.channels {
                            for ky in 0..kernel {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                if iy < 0 || iy >= ins.height as isize {
                                    continue;
                                }
                                for kx in 0..kernel {
                                    let ix = (ox * stride + kx) as isize - padding as isize;
                                    if ix < 0 || ix >= ins.width as isize {
                                        continue;
                                    }
                                    if frame[ins.index(ic, iy as usize, ix as usize)] != 0 {
                                        acc += widen(
                                            weights[spec.conv_weight_index(oc, ic, ky, kx)],
                                        );
                                    }
                                }
                            }
                        }
                        out[outs.index(oc, oy, ox)] = acc;
                    }
                }
            }
        }
        LayerKind::FullyConnected { out_features } => {
            let n_in = ins.len();
            for (o, slot) in out.iter_mut().enumerate().take(out_features) {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut acc = A::default();
                for (i, &s) in frame.iter().enumerate() {
                    if s != 0 {
                        acc += widen(row[i]);
                    }
                }
                *slot = acc;
            }
        }
        LayerKind::MaxPool { .. } => unreachable!("checked by caller"),
    }
    out
}

/// Synaptic currents `Σ_i w_ij s_i` for one binary input frame. Conv layers
/// use `[out][in][ky][kx]` weights; FC layers use `[out][in]`.
pub fn conv_forward_dense(frame: &[u8], weights: &[f64], spec: &LayerSpec) -> Result<Vec<f64>> {
    check_weights(spec, weights.len())?;
    if frame.len() != spec.in_shape.len() {
        return Err(Error::Shape(format!(
            "input frame has {} entries, layer expects {}",
            frame.len(),
            spec.in_shape.len()
        )));
    }
    Ok(gather(frame, weights, spec, |w| w))
}

/// Integer accumulation of quantized weights over a binary frame.
pub fn accumulate_dense_int(frame: &[u8], weights: &[i8], spec: &LayerSpec) -> Result<Vec<i32>> {
    check_weights(spec, weights.len())?;
    if frame.len() != spec.in_shape.len() {
        return Err(Error::Shape(format!(
            "input frame has {} entries, layer expects {}",
            frame.len(),
            spec.in_shape.len()
        )));
    }
    Ok(gather(frame, weights, spec, i32::from))
}

/// Binary OR over each `window`×`window` block.
pub fn maxpool_spikes(frame: &[u8], in_shape: Shape, window: usize) -> Result<Vec<u8>> {
    if window == 0 || !in_shape.height.is_multiple_of(window) || !in_shape.width.is_multiple_of(window) {
        return Err(Error::Shape(format!(
            "pool window {window} does not divide {}x{}",
            in_shape.height, in_shape.width
        )));
    }
    if frame.len() != in_shape.len() {
        return Err(Error::Shape("pool input length mismatch".into()));
    }
    let out_shape = Shape::new(
        in_shape.channels,
        in_shape.height / window,
        in_shape.width / window,
    );
    let mut out = vec![0u8; out_shape.len()];
    for c in 0..in_shape.channels {
        for y in 0..in_shape.height {
            for x in 0..in_shape.width {
                if frame[in_shape.index(c, y, x)] != 0 {
                    out[out_shape.index(c, y / window, x / window)] = 1;
                }
            }
        }
    }
    Ok(out)
}

pub fn maxpool_train(input: &SpikeTrain, window: usize) -> Result<SpikeTrain> {
    let shape = input.shape();
    let frames = (0..input.timesteps())
        .map(|t| maxpool_spikes(input.frame(t), shape, window))
        .collect::<Result<Vec<_>>>()?;
    SpikeTrain::from_frames(
        Shape::new(shape.channels, shape.height / window, shape.width / window),
        frames,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv_spec(in_shape: Shape, out_channels: usize, kernel: usize, padding: usize) -> LayerSpec {
        LayerSpec::new(
            LayerKind::Conv {
                out_channels,
                kernel,
                stride: 1,
                padding,
            },
            in_shape,
        )
        .unwrap()
    }

    #[test]
    fn zero_input_zero_current() {
        let spec = conv_spec(Shape::new(2, 5, 5), 3, 3, 1);
        let w = vec![0.7; spec.weight_len()];
        let out = conv_forward_dense(&[0; 50], &w, &spec).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_through_unit_kernel() {
        let spec = conv_spec(Shape::new(1, 4, 4), 1, 1, 0);
        let mut frame = vec![0u8; 16];
        frame[Shape::new(1, 4, 4).index(0, 2, 1)] = 1;
        let out = conv_forward_dense(&frame, &[0.375], &spec).unwrap();
        for (i, v) in out.iter().enumerate() {
            let expect = if i == 2 * 4 + 1 { 0.375 } else { 0.0 };
            assert_eq!(*v, expect);
        }
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::new(1, 5, 5);
        let spec = conv_spec(shape, 1, 3, 0);
        let frame: Vec<u8> = (0..25).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        let w: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = conv_forward_dense(&frame, &w, &spec).unwrap();
        // valid 3x3 correlation written out longhand
        let mut expect = [[0.0f64; 3]; 3];
        for (oy, row) in expect.iter_mut().enumerate() {
            for (ox, cell) in row.iter_mut().enumerate() {
                for ky in 0..3 {
                    for kx in 0..3 {
                        *cell += w[ky * 3 + kx] * f64::from(frame[(oy + ky) * 5 + ox + kx]);
                    }
                }
            }
        }
        for oy in 0..3 {
            for ox in 0..3 {
                assert!((out[oy * 3 + ox] - expect[oy][ox]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fc_is_matrix_product() {
        let spec = LayerSpec::new(
            LayerKind::FullyConnected { out_features: 2 },
            Shape::new(1, 1, 3),
        )
        .unwrap();
        let w = [1.0, 2.0, 3.0, -1.0, -2.0, -3.0];
        let out = conv_forward_dense(&[1, 0, 1], &w, &spec).unwrap();
        assert_eq!(out, vec![4.0, -4.0]);
    }

    #[test]
    fn int_and_float_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = conv_spec(Shape::new(2, 6, 6), 3, 3, 1);
        let w: Vec<i8> = (0..spec.weight_len()).map(|_| rng.gen_range(-7..=7)).collect();
        let wf: Vec<f64> = w.iter().map(|&q| f64::from(q)).collect();
        let frame: Vec<u8> = (0..72).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        let a = accumulate_dense_int(&frame, &w, &spec).unwrap();
        let b = conv_forward_dense(&frame, &wf, &spec).unwrap();
        assert!(a.iter().zip(&b).all(|(&x, &y)| f64::from(x) == y));
    }

    #[test]
    fn weight_shape_checked() {
        let spec = conv_spec(Shape::new(1, 4, 4), 2, 3, 1);
        assert!(conv_forward_dense(&[0; 16], &[0.0; 5], &spec).is_err());
    }

    #[test]
    fn pool_enumerated_windows() {
        let shape = Shape::new(1, 4, 4);
        let mut frame = vec![0u8; 16];
        frame[shape.index(0, 0, 0)] = 1;
        frame[shape.index(0, 3, 3)] = 1;
        assert_eq!(maxpool_spikes(&frame, shape, 2).unwrap(), vec![1, 0, 0, 1]);
        assert_eq!(maxpool_spikes(&[0; 16], shape, 2).unwrap(), vec![0; 4]);
        assert!(maxpool_spikes(&[0; 15], Shape::new(1, 3, 5), 2).is_err());
    }
}

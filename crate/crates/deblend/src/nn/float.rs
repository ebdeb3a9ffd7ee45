//! Double-precision reference forward pass. This path is the in-repo oracle
//! the quantized path is verified against.

use super::descriptor::{LayerKind, INPUT_NODE};
use super::model::Model;
use super::tensor::Tensor;
use super::{Frame, InferenceOutput};
use crate::fxp::OverflowLog;

/// Runs the float path over raw input values (any descriptor input shape)
/// and returns every layer's output tensor, in layer order. Calibration uses
/// this to see intermediate activations.
pub fn forward_float(model: &Model, values: &[f64]) -> Vec<Tensor> {
    let d = &model.descriptor;
    let (in_len, in_ch) = d.input_shape;
    debug_assert_eq!(values.len(), in_len * in_ch);
    let input = Tensor::new(in_len, in_ch, values.to_vec());
    let mut outputs: Vec<Tensor> = Vec::with_capacity(d.layers.len());
    for (i, layer) in d.layers.iter().enumerate() {
        let fetch = |name: &str| -> &Tensor {
            if name == INPUT_NODE {
                &input
            } else {
                let idx = d.layers.iter().position(|l| l.name == *name).unwrap();
                &outputs[idx]
            }
        };
        let x = fetch(&layer.inputs[0]);
        let lw = &model.layer_weights[i];
        let out = match &layer.kind {
            LayerKind::Dense { units, use_bias } => dense(
                x,
                lw.weights.as_slice(),
                if *use_bias { &lw.bias } else { &[] },
                *units,
            ),
            LayerKind::Conv1D {
                filters,
                kernel_size,
                use_bias,
                ..
            } => conv1d_same(
                x,
                &lw.weights,
                if *use_bias { &lw.bias } else { &[] },
                *filters,
                *kernel_size,
            ),
            LayerKind::MaxPool1D { factor } => max_pool(x, *factor),
            LayerKind::UpSample1D { factor } => up_sample(x, *factor),
            LayerKind::Concatenate { with } => concat(x, fetch(with)),
            LayerKind::ReLU => Tensor::new(
                x.len,
                x.channels,
                x.data.iter().map(|&v| v.max(0.0)).collect(),
            ),
            LayerKind::Sigmoid => Tensor::new(
                x.len,
                x.channels,
                x.data.iter().map(|&v| sigmoid(v)).collect(),
            ),
            LayerKind::Flatten => Tensor::new(x.len * x.channels, 1, x.data.clone()),
        };
        outputs.push(out);
    }
    outputs
}

/// Double-precision forward pass over one frame; the model must satisfy the
/// 260-in/520-out frame contract.
pub fn infer_float(model: &Model, frame: &Frame) -> InferenceOutput {
    let outputs = forward_float(model, frame.values());
    let d = &model.descriptor;
    let terminal = d
        .layers
        .iter()
        .position(|l| l.name == d.output_layer().name)
        .unwrap();
    let out = &outputs[terminal];
    InferenceOutput::from_values(out.data.clone(), OverflowLog::new())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully connected over the flattened input: out[j] = sum_i x[i] w[i][j] + b[j].
fn dense(x: &Tensor, w: &[f64], b: &[f64], units: usize) -> Tensor {
    let n = x.data.len();
    debug_assert_eq!(w.len(), n * units);
    let mut out = vec![0.0; units];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = if b.is_empty() { 0.0 } else { b[j] };
        for i in 0..n {
            acc += x.data[i] * w[i * units + j];
        }
        *o = acc;
    }
    Tensor::new(units, 1, out)
}

/// Same-padded 1D convolution; weights laid out [kernel][in_ch][out_ch].
/// Total padding is kernel-1, split with the extra element on the right.
fn conv1d_same(x: &Tensor, w: &[f64], b: &[f64], filters: usize, kernel: usize) -> Tensor {
    let cin = x.channels;
    debug_assert_eq!(w.len(), kernel * cin * filters);
    let pad_left = (kernel - 1) / 2;
    let mut out = Tensor::zeros(x.len, filters);
    for pos in 0..x.len {
        for f in 0..filters {
            let mut acc = if b.is_empty() { 0.0 } else { b[f] };
            for k in 0..kernel {
                let src = pos as isize + k as isize - pad_left as isize;
                if src < 0 || src as usize >= x.len {
                    continue;
                }
                for c in 0..cin {
                    acc += x.get(src as usize, c) * w[(k * cin + c) * filters + f];
                }
            }
            out.set(pos, f, acc);
        }
    }
    out
}

fn max_pool(x: &Tensor, factor: usize) -> Tensor {
    let out_len = x.len / factor;
    let mut out = Tensor::zeros(out_len, x.channels);
    for pos in 0..out_len {
        for c in 0..x.channels {
            let mut m = f64::NEG_INFINITY;
            for k in 0..factor {
                m = m.max(x.get(pos * factor + k, c));
            }
            out.set(pos, c, m);
        }
    }
    out
}

fn up_sample(x: &Tensor, factor: usize) -> Tensor {
    let mut out = Tensor::zeros(x.len * factor, x.channels);
    for pos in 0..x.len {
        for k in 0..factor {
            for c in 0..x.channels {
                out.set(pos * factor + k, c, x.get(pos, c));
            }
        }
    }
    out
}

fn concat(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.len, b.len);
    let channels = a.channels + b.channels;
    let mut out = Tensor::zeros(a.len, channels);
    for pos in 0..a.len {
        for c in 0..a.channels {
            out.set(pos, c, a.get(pos, c));
        }
        for c in 0..b.channels {
            out.set(pos, a.channels + c, b.get(pos, c));
        }
    }
    out
}

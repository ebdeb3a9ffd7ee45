//! Fixed-point forward pass.
//!
//! Every layer's output is re-gridded onto that layer's spec from the
//! precision plan, and that re-grid is the only rounding/overflow site: dot
//! products accumulate exactly in a widened integer (the software analogue of
//! a hardware multiplier/adder tree with a wide accumulator) and are
//! quantized once per output element. Overflow events are counted per layer;
//! input-frame quantization is logged under the site `"input"`.

use crate::fxp::{finish, quantize, FixedSpec, OverflowLog};
use crate::quant::{quantize_model, PrecisionPlan, QuantError, QuantizedModel};

use super::descriptor::{LayerKind, INPUT_NODE};
use super::tensor::QTensor;
use super::{Frame, InferenceOutput, Model, NnError};

/// Convenience wrapper: quantizes the model under `plan`, then runs the
/// fixed-point pass. For repeated inference quantize once via
/// [`crate::quant::quantize_model`] and call [`infer_quantized`].
pub fn infer_fixed(
    model: &Model,
    frame: &Frame,
    plan: &PrecisionPlan,
) -> Result<InferenceOutput, NnError> {
    let qm = quantize_model(model, plan).map_err(|e| match e {
        QuantError::PlanMismatch { layer } => NnError::PlanMismatch { layer },
        other => NnError::Parse(other.to_string()),
    })?;
    Ok(infer_quantized(&qm, frame))
}

/// Bit-deterministic fixed-point forward pass over one frame; the model must
/// satisfy the 260-in/520-out frame contract.
pub fn infer_quantized(qm: &QuantizedModel, frame: &Frame) -> InferenceOutput {
    let (values, log) = forward_quantized(qm, frame.values());
    InferenceOutput::from_values(values, log)
}

/// Fixed-point forward pass over raw input values (any descriptor input
/// shape), returning the flattened terminal outputs and the overflow log.
pub fn forward_quantized(qm: &QuantizedModel, values: &[f64]) -> (Vec<f64>, OverflowLog) {
    let d = &qm.model.descriptor;
    let mut log = OverflowLog::new();

    // The input is gridded with the entry layer's spec, exactly as the host
    // side does when packing the input buffer.
    let entry_spec = qm
        .plan
        .spec_of(&d.entry_layer().name)
        .expect("plan validated at quantization time");
    let input = quantize_input(values, d.input_shape, entry_spec, &mut log);

    let mut outputs: Vec<QTensor> = Vec::with_capacity(d.layers.len());
    for (i, layer) in d.layers.iter().enumerate() {
        let spec = qm
            .plan
            .spec_of(&layer.name)
            .expect("plan covers every layer");
        let fetch = |name: &str| -> &QTensor {
            if name == INPUT_NODE {
                &input
            } else {
                let idx = d.layers.iter().position(|l| l.name == *name).unwrap();
                &outputs[idx]
            }
        };
        let x = fetch(&layer.inputs[0]);
        let qw = &qm.layers[i];
        let mut overflows = 0u64;
        let out = match &layer.kind {
            LayerKind::Dense { units, use_bias } => dense(
                x,
                &qw.weights,
                if *use_bias { &qw.bias } else { &[] },
                *units,
                spec,
                &mut overflows,
            ),
            LayerKind::Conv1D {
                filters,
                kernel_size,
                use_bias,
                ..
            } => conv1d_same(
                x,
                &qw.weights,
                if *use_bias { &qw.bias } else { &[] },
                *filters,
                *kernel_size,
                spec,
                &mut overflows,
            ),
            LayerKind::MaxPool1D { factor } => max_pool(x, *factor, spec, &mut overflows),
            LayerKind::UpSample1D { factor } => up_sample(x, *factor, spec, &mut overflows),
            LayerKind::Concatenate { with } => concat(x, fetch(with), spec, &mut overflows),
            LayerKind::ReLU => relu(x, spec, &mut overflows),
            LayerKind::Sigmoid => {
                let table = &qm.sigmoid_tables[&layer.name];
                let codes = x.codes.iter().map(|&c| table.lookup(c, x.spec)).collect();
                QTensor::new(x.len, x.channels, codes, spec)
            }
            LayerKind::Flatten => {
                let (codes, n) = (x.codes.clone(), x.len * x.channels);
                requantize_into(QTensor::new(n, 1, codes, x.spec), spec, &mut overflows)
            }
        };
        log.record_many(&layer.name, overflows);
        outputs.push(out);
    }

    let terminal = d
        .layers
        .iter()
        .position(|l| l.name == d.output_layer().name)
        .unwrap();
    (outputs[terminal].to_reals(), log)
}

fn quantize_input(
    values: &[f64],
    shape: (usize, usize),
    spec: FixedSpec,
    log: &mut OverflowLog,
) -> QTensor {
    let mut overflows = 0u64;
    let codes = values
        .iter()
        .map(|&v| {
            let (q, over) = quantize(v, spec).expect("frame values are finite");
            if over {
                overflows += 1;
            }
            q.code
        })
        .collect();
    log.record_many(INPUT_NODE, overflows);
    QTensor::new(shape.0, shape.1, codes, spec)
}

/// Re-grids one exact accumulator value (at `frac` fraction bits) onto `spec`.
fn settle(acc: i128, frac: u32, spec: FixedSpec, overflows: &mut u64) -> i64 {
    let (v, over) = finish(acc, frac, spec);
    if over {
        *overflows += 1;
    }
    v.code
}

fn requantize_into(x: QTensor, spec: FixedSpec, overflows: &mut u64) -> QTensor {
    if x.spec == spec {
        return QTensor::new(x.len, x.channels, x.codes, spec);
    }
    let f = x.spec.frac_bits();
    let codes = x
        .codes
        .iter()
        .map(|&c| settle(c as i128, f, spec, overflows))
        .collect();
    QTensor::new(x.len, x.channels, codes, spec)
}

fn dense(
    x: &QTensor,
    w: &[i64],
    b: &[i64],
    units: usize,
    spec: FixedSpec,
    overflows: &mut u64,
) -> QTensor {
    let n = x.codes.len();
    debug_assert_eq!(w.len(), n * units);
    let f_in = x.spec.frac_bits();
    let f_w = spec.frac_bits();
    let mut codes = Vec::with_capacity(units);
    for j in 0..units {
        // Exact accumulation at f_in + f_w fraction bits; the bias (at f_w)
        // is aligned by shifting left f_in.
        let mut acc: i128 = if b.is_empty() {
            0
        } else {
            (b[j] as i128) << f_in
        };
        for i in 0..n {
            acc += (x.codes[i] * w[i * units + j]) as i128;
        }
        codes.push(settle(acc, f_in + f_w, spec, overflows));
    }
    QTensor::new(units, 1, codes, spec)
}

fn conv1d_same(
    x: &QTensor,
    w: &[i64],
    b: &[i64],
    filters: usize,
    kernel: usize,
    spec: FixedSpec,
    overflows: &mut u64,
) -> QTensor {
    let cin = x.channels;
    debug_assert_eq!(w.len(), kernel * cin * filters);
    let pad_left = (kernel - 1) / 2;
    let f_in = x.spec.frac_bits();
    let f_w = spec.frac_bits();
    let mut codes = vec![0i64; x.len * filters];
    for pos in 0..x.len {
        for f in 0..filters {
            let mut acc: i128 = if b.is_empty() {
                0
            } else {
                (b[f] as i128) << f_in
            };
            for k in 0..kernel {
                let src = pos as isize + k as isize - pad_left as isize;
                if src < 0 || src as usize >= x.len {
                    continue;
                }
                let row = src as usize * cin;
                let wrow = (k * cin) * filters + f;
                for c in 0..cin {
                    acc += (x.codes[row + c] * w[wrow + c * filters]) as i128;
                }
            }
            codes[pos * filters + f] = settle(acc, f_in + f_w, spec, overflows);
        }
    }
    QTensor::new(x.len, filters, codes, spec)
}

fn max_pool(x: &QTensor, factor: usize, spec: FixedSpec, overflows: &mut u64) -> QTensor {
    let out_len = x.len / factor;
    let mut codes = Vec::with_capacity(out_len * x.channels);
    for pos in 0..out_len {
        for c in 0..x.channels {
            let mut m = i64::MIN;
            for k in 0..factor {
                m = m.max(x.get(pos * factor + k, c));
            }
            codes.push(m);
        }
    }
    requantize_into(
        QTensor::new(out_len, x.channels, codes, x.spec),
        spec,
        overflows,
    )
}

fn up_sample(x: &QTensor, factor: usize, spec: FixedSpec, overflows: &mut u64) -> QTensor {
    let mut codes = Vec::with_capacity(x.len * factor * x.channels);
    for pos in 0..x.len {
        for _ in 0..factor {
            for c in 0..x.channels {
                codes.push(x.get(pos, c));
            }
        }
    }
    requantize_into(
        QTensor::new(x.len * factor, x.channels, codes, x.spec),
        spec,
        overflows,
    )
}

fn concat(a: &QTensor, b: &QTensor, spec: FixedSpec, overflows: &mut u64) -> QTensor {
    debug_assert_eq!(a.len, b.len);
    let fa = a.spec.frac_bits();
    let fb = b.spec.frac_bits();
    let channels = a.channels + b.channels;
    let mut codes = Vec::with_capacity(a.len * channels);
    for pos in 0..a.len {
        for c in 0..a.channels {
            codes.push(settle(a.get(pos, c) as i128, fa, spec, overflows));
        }
        for c in 0..b.channels {
            codes.push(settle(b.get(pos, c) as i128, fb, spec, overflows));
        }
    }
    QTensor::new(a.len, channels, codes, spec)
}

fn relu(x: &QTensor, spec: FixedSpec, overflows: &mut u64) -> QTensor {
    let codes: Vec<i64> = x.codes.iter().map(|&c| c.max(0)).collect();
    requantize_into(
        QTensor::new(x.len, x.channels, codes, x.spec),
        spec,
        overflows,
    )
}

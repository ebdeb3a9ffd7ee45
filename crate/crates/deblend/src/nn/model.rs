//! Models bind real-valued weights to a descriptor, plus the weight file
//! format and the two reference model graphs.
//!
//! Weight files are a flat little-endian IEEE-754 f32 array in descriptor
//! order, per layer weights then bias. Dense weights are laid out [in][out],
//! Conv1D weights [kernel][in_ch][out_ch]. On disk the array is preceded by a
//! one-line JSON header carrying `"format": 1` and the value count.

use serde::{Deserialize, Serialize};

use super::descriptor::{LayerDescriptor, LayerKind, ModelDescriptor, INPUT_NODE};
use super::NnError;

pub const WEIGHTS_FORMAT: u32 = 1;

/// Weights and bias of one parameterized layer, as loaded (f64 workspace,
/// f32 storage precision).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerWeights {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub descriptor: ModelDescriptor,
    /// Indexed like `descriptor.layers`; empty for parameter-free layers.
    pub layer_weights: Vec<LayerWeights>,
}

impl Model {
    /// Binds a raw f32 weight buffer to the descriptor. The buffer length
    /// must be exactly `parameters * 4` bytes.
    pub fn load_weights(bytes: &[u8], descriptor: &ModelDescriptor) -> Result<Self, NnError> {
        let expected = descriptor.parameters * 4;
        if bytes.len() != expected {
            return Err(NnError::SizeMismatch {
                expected,
                actual: bytes.len(),
            });
        }
        let mut values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        let mut layer_weights = Vec::with_capacity(descriptor.layers.len());
        for (i, layer) in descriptor.layers.iter().enumerate() {
            let (w, b) = weight_element_counts(layer, descriptor.input_shape_of(i));
            layer_weights.push(LayerWeights {
                weights: values.by_ref().take(w).collect(),
                bias: values.by_ref().take(b).collect(),
            });
        }
        debug_assert!(values.next().is_none());
        Ok(Self {
            descriptor: descriptor.clone(),
            layer_weights,
        })
    }

    pub fn weights_of(&self, name: &str) -> Option<&LayerWeights> {
        self.descriptor
            .layers
            .iter()
            .position(|l| l.name == name)
            .map(|i| &self.layer_weights[i])
    }

    /// Serializes weights back to the flat f32 byte layout.
    pub fn to_weight_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.descriptor.parameters * 4);
        for lw in &self.layer_weights {
            for &v in lw.weights.iter().chain(lw.bias.iter()) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }
}

/// (weight element count, bias element count) for one layer.
pub(crate) fn weight_element_counts(
    layer: &LayerDescriptor,
    input_shape: (usize, usize),
) -> (usize, usize) {
    let (len, ch) = input_shape;
    match &layer.kind {
        LayerKind::Dense { units, use_bias } => {
            (len * ch * units, if *use_bias { *units } else { 0 })
        }
        LayerKind::Conv1D {
            filters,
            kernel_size,
            use_bias,
            ..
        } => (
            kernel_size * ch * filters,
            if *use_bias { *filters } else { 0 },
        ),
        _ => (0, 0),
    }
}

#[derive(Serialize, Deserialize)]
struct WeightsHeader {
    format: u32,
    count: usize,
}

/// Writes a weight file: one JSON header line, then the raw f32 payload.
pub fn write_weights_file(payload: &[u8]) -> Vec<u8> {
    let header = WeightsHeader {
        format: WEIGHTS_FORMAT,
        count: payload.len() / 4,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(payload);
    out
}

/// Strips and checks the header line, returning the raw f32 payload.
pub fn read_weights_file(bytes: &[u8]) -> Result<&[u8], NnError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| NnError::Parse("weight file has no header line".into()))?;
    let header: WeightsHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| NnError::Parse(format!("bad weight file header: {e}")))?;
    if header.format != WEIGHTS_FORMAT {
        return Err(NnError::Parse(format!(
            "unsupported weight file format {}",
            header.format
        )));
    }
    let payload = &bytes[newline + 1..];
    if payload.len() != header.count * 4 {
        return Err(NnError::SizeMismatch {
            expected: header.count * 4,
            actual: payload.len(),
        });
    }
    Ok(payload)
}

fn layer(name: &str, kind: LayerKind, input: &str) -> LayerDescriptor {
    LayerDescriptor {
        name: name.into(),
        kind,
        inputs: vec![input.into()],
    }
}

fn conv(name: &str, filters: usize, kernel: usize, input: &str) -> LayerDescriptor {
    layer(
        name,
        LayerKind::Conv1D {
            filters,
            kernel_size: kernel,
            padding: super::descriptor::PadMode::Same,
            use_bias: true,
        },
        input,
    )
}

/// Reference MLP: 260 inputs, Dense 128 + ReLU, Dense 520 + Sigmoid.
pub fn reference_mlp() -> ModelDescriptor {
    let layers = vec![
        layer(
            "dense1",
            LayerKind::Dense {
                units: 128,
                use_bias: true,
            },
            INPUT_NODE,
        ),
        layer("relu1", LayerKind::ReLU, "dense1"),
        layer(
            "dense2",
            LayerKind::Dense {
                units: 520,
                use_bias: true,
            },
            "relu1",
        ),
        layer("sigmoid", LayerKind::Sigmoid, "dense2"),
        layer("flatten", LayerKind::Flatten, "sigmoid"),
    ];
    ModelDescriptor::new("mlp-reference", (crate::FRAME_LEN, 1), layers, None)
        .expect("reference MLP is valid")
}

/// Reference two-level encoder/decoder with skip connections:
/// conv 16 / pool / conv 32 / pool / conv 64, then upsample + concatenate
/// back through conv 32 and conv 16, a 2-filter 1x1 head with sigmoid, and a
/// flatten interleaving the (MI, RR) pair per monitor.
pub fn reference_unet() -> ModelDescriptor {
    let layers = vec![
        conv("enc1_conv", 16, 3, INPUT_NODE),
        layer("enc1_relu", LayerKind::ReLU, "enc1_conv"),
        layer("enc1_pool", LayerKind::MaxPool1D { factor: 2 }, "enc1_relu"),
        conv("enc2_conv", 32, 3, "enc1_pool"),
        layer("enc2_relu", LayerKind::ReLU, "enc2_conv"),
        layer("enc2_pool", LayerKind::MaxPool1D { factor: 2 }, "enc2_relu"),
        conv("bottleneck_conv", 64, 3, "enc2_pool"),
        layer("bottleneck_relu", LayerKind::ReLU, "bottleneck_conv"),
        layer(
            "dec1_up",
            LayerKind::UpSample1D { factor: 2 },
            "bottleneck_relu",
        ),
        layer(
            "dec1_concat",
            LayerKind::Concatenate {
                with: "enc2_relu".into(),
            },
            "dec1_up",
        ),
        conv("dec1_conv", 32, 3, "dec1_concat"),
        layer("dec1_relu", LayerKind::ReLU, "dec1_conv"),
        layer("dec2_up", LayerKind::UpSample1D { factor: 2 }, "dec1_relu"),
        layer(
            "dec2_concat",
            LayerKind::Concatenate {
                with: "enc1_relu".into(),
            },
            "dec2_up",
        ),
        conv("dec2_conv", 16, 3, "dec2_concat"),
        layer("dec2_relu", LayerKind::ReLU, "dec2_conv"),
        conv("head_conv", 2, 1, "dec2_relu"),
        layer("head_sigmoid", LayerKind::Sigmoid, "head_conv"),
        layer("flatten", LayerKind::Flatten, "head_sigmoid"),
    ];
    ModelDescriptor::new("unet-reference", (crate::FRAME_LEN, 1), layers, None)
        .expect("reference U-Net is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_weights_checks_length() {
        let d = reference_mlp();
        let ok = vec![0u8; d.parameters * 4];
        assert!(Model::load_weights(&ok, &d).is_ok());
        let short = vec![0u8; d.parameters * 4 - 4];
        match Model::load_weights(&short, &d) {
            Err(NnError::SizeMismatch { expected, actual }) => {
                assert_eq!(expected, d.parameters * 4);
                assert_eq!(actual, d.parameters * 4 - 4);
            }
            other => panic!("expected size mismatch, got {other:?}"),
        }
    }

    #[test]
    fn weight_order_is_per_layer_weights_then_bias() {
        let d = ModelDescriptor::new(
            "tiny",
            (2, 1),
            vec![layer(
                "d",
                LayerKind::Dense {
                    units: 2,
                    use_bias: true,
                },
                INPUT_NODE,
            )],
            None,
        )
        .unwrap();
        let vals: Vec<f32> = vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0];
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        let m = Model::load_weights(&bytes, &d).unwrap();
        assert_eq!(m.layer_weights[0].weights, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.layer_weights[0].bias, vec![10.0, 20.0]);
        assert_eq!(m.to_weight_bytes(), bytes);
    }

    #[test]
    fn weight_file_header_round_trip() {
        let payload: Vec<u8> = (0..16).collect();
        let file = write_weights_file(&payload);
        assert_eq!(read_weights_file(&file).unwrap(), payload.as_slice());
        assert!(read_weights_file(&file[..8]).is_err());
    }
}

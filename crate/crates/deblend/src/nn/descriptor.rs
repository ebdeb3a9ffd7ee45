//! Model descriptors: the layer graph, its JSON form, shape propagation, and
//! parameter accounting.
//!
//! A descriptor is an ordered layer list forming a DAG: every layer names its
//! upstream producers, which must appear earlier in the list (the reserved
//! name `"input"` denotes the model input). `Concatenate` additionally names
//! a skip-source layer. The JSON document carries a `"format": 1` header.

use serde::{Deserialize, Serialize};

use super::NnError;

pub const DESCRIPTOR_FORMAT: u32 = 1;

/// Reserved upstream name for the model input tensor.
pub const INPUT_NODE: &str = "input";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PadMode {
    #[serde(rename = "same")]
    Same,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum LayerKind {
    /// Fully connected layer over the flattened input vector.
    Dense {
        units: usize,
        use_bias: bool,
    },
    Conv1D {
        filters: usize,
        kernel_size: usize,
        padding: PadMode,
        use_bias: bool,
    },
    MaxPool1D {
        factor: usize,
    },
    UpSample1D {
        factor: usize,
    },
    /// Joins this layer's main input with the named skip source along the
    /// channel dimension; both must have equal length.
    Concatenate {
        with: String,
    },
    ReLU,
    Sigmoid,
    Flatten,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "Dense",
            LayerKind::Conv1D { .. } => "Conv1D",
            LayerKind::MaxPool1D { .. } => "MaxPool1D",
            LayerKind::UpSample1D { .. } => "UpSample1D",
            LayerKind::Concatenate { .. } => "Concatenate",
            LayerKind::ReLU => "ReLU",
            LayerKind::Sigmoid => "Sigmoid",
            LayerKind::Flatten => "Flatten",
        }
    }

    /// True for layers that multiply values (and so carry weights).
    pub fn has_parameters(&self) -> bool {
        matches!(self, LayerKind::Dense { .. } | LayerKind::Conv1D { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    pub inputs: Vec<String>,
}

/// Tensor shape as (length, channels).
pub type Shape = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DescriptorDoc {
    format: u32,
    name: String,
    input_shape: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    parameters: Option<usize>,
    layers: Vec<LayerDescriptor>,
}

/// A validated layer graph with propagated shapes and parameter counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDescriptor {
    pub name: String,
    pub input_shape: Shape,
    pub layers: Vec<LayerDescriptor>,
    /// Output shape of each layer, in layer order.
    pub shapes: Vec<Shape>,
    /// Total parameter count computed from layer shapes.
    pub parameters: usize,
}

impl ModelDescriptor {
    /// Builds and validates a descriptor. `declared_parameters`, when given,
    /// must match the count computed from layer shapes.
    pub fn new(
        name: impl Into<String>,
        input_shape: Shape,
        layers: Vec<LayerDescriptor>,
        declared_parameters: Option<usize>,
    ) -> Result<Self, NnError> {
        let name = name.into();
        validate_wiring(&layers)?;
        let shapes = propagate_shapes(input_shape, &layers)?;
        let parameters: usize = (0..layers.len())
            .map(|i| {
                layer_parameter_count(
                    &layers[i],
                    input_shape_of(&layers[i], input_shape, &layers, &shapes),
                )
            })
            .sum();
        if let Some(declared) = declared_parameters {
            if declared != parameters {
                return Err(NnError::Parse(format!(
                    "declared parameter count {declared} does not match computed {parameters}"
                )));
            }
        }
        Ok(Self {
            name,
            input_shape,
            layers,
            shapes,
            parameters,
        })
    }

    /// Parses the JSON descriptor document.
    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let doc: DescriptorDoc =
            serde_json::from_str(text).map_err(|e| NnError::Parse(e.to_string()))?;
        if doc.format != DESCRIPTOR_FORMAT {
            return Err(NnError::Parse(format!(
                "unsupported descriptor format {}",
                doc.format
            )));
        }
        ModelDescriptor::new(
            doc.name,
            (doc.input_shape[0], doc.input_shape[1]),
            doc.layers,
            doc.parameters,
        )
    }

    pub fn to_json(&self) -> String {
        let doc = DescriptorDoc {
            format: DESCRIPTOR_FORMAT,
            name: self.name.clone(),
            input_shape: [self.input_shape.0, self.input_shape.1],
            parameters: Some(self.parameters),
            layers: self.layers.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("descriptor serializes")
    }

    pub fn layer(&self, name: &str) -> Option<(&LayerDescriptor, Shape)> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .map(|i| (&self.layers[i], self.shapes[i]))
    }

    /// Shape feeding the given layer index (flattened over all inputs for
    /// the concatenate case this is the main input's shape).
    pub fn input_shape_of(&self, index: usize) -> Shape {
        input_shape_of(
            &self.layers[index],
            self.input_shape,
            &self.layers,
            &self.shapes,
        )
    }

    /// The terminal layer: the unique layer no other layer consumes.
    pub fn output_layer(&self) -> &LayerDescriptor {
        // validated during construction
        self.layers
            .iter()
            .find(|l| !self.layers.iter().any(|o| consumes(o, &l.name)))
            .expect("validated descriptor has a terminal layer")
    }

    /// Flattened output element count of the terminal layer.
    pub fn output_len(&self) -> usize {
        let (len, ch) = self.shapes[self
            .layers
            .iter()
            .position(|l| l.name == self.output_layer().name)
            .unwrap()];
        len * ch
    }

    /// The first layer fed directly by the model input.
    pub fn entry_layer(&self) -> &LayerDescriptor {
        self.layers
            .iter()
            .find(|l| l.inputs.iter().any(|i| i == INPUT_NODE))
            .expect("validated descriptor has an entry layer")
    }

    /// Parameter count of one layer.
    pub fn parameters_of(&self, index: usize) -> usize {
        layer_parameter_count(&self.layers[index], self.input_shape_of(index))
    }

    /// Checks the frame-processing contract: input (260, 1), output 520.
    pub fn check_frame_io(&self) -> Result<(), NnError> {
        if self.input_shape != (crate::FRAME_LEN, 1) {
            return Err(NnError::Shape {
                layer: INPUT_NODE.to_string(),
                message: format!(
                    "frame pipeline requires input shape ({}, 1), descriptor has {:?}",
                    crate::FRAME_LEN,
                    self.input_shape
                ),
            });
        }
        if self.output_len() != crate::OUTPUT_LEN {
            return Err(NnError::Shape {
                layer: self.output_layer().name.clone(),
                message: format!(
                    "frame pipeline requires {} output values, descriptor yields {}",
                    crate::OUTPUT_LEN,
                    self.output_len()
                ),
            });
        }
        Ok(())
    }
}

fn consumes(layer: &LayerDescriptor, name: &str) -> bool {
    layer.inputs.iter().any(|i| i == name)
        || matches!(&layer.kind, LayerKind::Concatenate { with } if with == name)
}

fn validate_wiring(layers: &[LayerDescriptor]) -> Result<(), NnError> {
    if layers.is_empty() {
        return Err(NnError::Parse("descriptor has no layers".into()));
    }
    let mut seen: Vec<&str> = Vec::with_capacity(layers.len());
    for layer in layers {
        if layer.name.is_empty() || layer.name == INPUT_NODE {
            return Err(NnError::Parse(format!(
                "invalid layer name {:?}",
                layer.name
            )));
        }
        if seen.contains(&layer.name.as_str()) {
            return Err(NnError::Parse(format!(
                "duplicate layer name {:?}",
                layer.name
            )));
        }
        if layer.inputs.len() != 1 {
            return Err(NnError::Parse(format!(
                "layer {:?} must name exactly one upstream input",
                layer.name
            )));
        }
        // Upstream references must precede the layer, which also rules out
        // cycles given the ordered list.
        let upstream_ok = |n: &str| n == INPUT_NODE || seen.contains(&n);
        if !upstream_ok(&layer.inputs[0]) {
            return Err(NnError::Parse(format!(
                "layer {:?} references unknown or later input {:?}",
                layer.name, layer.inputs[0]
            )));
        }
        if let LayerKind::Concatenate { with } = &layer.kind {
            if !seen.contains(&with.as_str()) {
                return Err(NnError::Parse(format!(
                    "concatenate layer {:?} references unknown or later skip source {:?}",
                    layer.name, with
                )));
            }
        }
        match layer.kind {
            LayerKind::Dense { units: 0, .. } => {
                return Err(NnError::Parse(format!(
                    "layer {:?} has zero units",
                    layer.name
                )))
            }
            LayerKind::Conv1D { filters: 0, .. } | LayerKind::Conv1D { kernel_size: 0, .. } => {
                return Err(NnError::Parse(format!(
                    "layer {:?} has a zero conv dimension",
                    layer.name
                )))
            }
            LayerKind::MaxPool1D { factor: 0 } | LayerKind::UpSample1D { factor: 0 } => {
                return Err(NnError::Parse(format!(
                    "layer {:?} has zero factor",
                    layer.name
                )))
            }
            _ => {}
        }
        seen.push(&layer.name);
    }
    let consumed_by_someone = |name: &str| layers.iter().any(|l| consumes(l, name));
    let terminals: Vec<&str> = layers
        .iter()
        .map(|l| l.name.as_str())
        .filter(|n| !consumed_by_someone(n))
        .collect();
    if terminals.len() != 1 {
        return Err(NnError::Parse(format!(
            "descriptor must have exactly one terminal layer, found {terminals:?}"
        )));
    }
    let entries = layers
        .iter()
        .filter(|l| l.inputs.iter().any(|i| i == INPUT_NODE))
        .count();
    if entries == 0 {
        return Err(NnError::Parse("no layer reads the model input".into()));
    }
    Ok(())
}

fn shape_of(name: &str, input_shape: Shape, layers: &[LayerDescriptor], shapes: &[Shape]) -> Shape {
    if name == INPUT_NODE {
        input_shape
    } else {
        let idx = layers
            .iter()
            .position(|l| l.name == name)
            .expect("validated ref");
        shapes[idx]
    }
}

fn input_shape_of(
    layer: &LayerDescriptor,
    input_shape: Shape,
    layers: &[LayerDescriptor],
    shapes: &[Shape],
) -> Shape {
    shape_of(&layer.inputs[0], input_shape, layers, shapes)
}

fn propagate_shapes(input_shape: Shape, layers: &[LayerDescriptor]) -> Result<Vec<Shape>, NnError> {
    let mut shapes: Vec<Shape> = Vec::with_capacity(layers.len());
    for layer in layers {
        let (len, ch) = shape_of(&layer.inputs[0], input_shape, layers, &shapes);
        let out = match &layer.kind {
            LayerKind::Dense { units, .. } => (*units, 1),
            LayerKind::Conv1D { filters, .. } => (len, *filters),
            // Odd trailing elements are truncated; the reference graphs never
            // pool an odd length.
            LayerKind::MaxPool1D { factor } => {
                let out_len = len / factor;
                if out_len == 0 {
                    return Err(NnError::Shape {
                        layer: layer.name.clone(),
                        message: format!("pool factor {factor} exceeds input length {len}"),
                    });
                }
                (out_len, ch)
            }
            LayerKind::UpSample1D { factor } => (len * factor, ch),
            LayerKind::Concatenate { with } => {
                let (skip_len, skip_ch) = shape_of(with, input_shape, layers, &shapes);
                if skip_len != len {
                    return Err(NnError::Shape {
                        layer: layer.name.clone(),
                        message: format!(
                            "cannot concatenate length {len} with length {skip_len} from {with:?}"
                        ),
                    });
                }
                (len, ch + skip_ch)
            }
            LayerKind::ReLU | LayerKind::Sigmoid => (len, ch),
            LayerKind::Flatten => (len * ch, 1),
        };
        shapes.push(out);
    }
    Ok(shapes)
}

fn layer_parameter_count(layer: &LayerDescriptor, input_shape: Shape) -> usize {
    let (len, ch) = input_shape;
    match &layer.kind {
        LayerKind::Dense { units, use_bias } => {
            len * ch * units + if *use_bias { *units } else { 0 }
        }
        LayerKind::Conv1D {
            filters,
            kernel_size,
            use_bias,
            ..
        } => kernel_size * ch * filters + if *use_bias { *filters } else { 0 },
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(name: &str, kind: LayerKind, input: &str) -> LayerDescriptor {
        LayerDescriptor {
            name: name.into(),
            kind,
            inputs: vec![input.into()],
        }
    }

    #[test]
    fn mlp_reference_parameter_count() {
        let d = super::super::reference_mlp();
        // 260*128 + 128 + 128*520 + 520
        assert_eq!(d.parameters, 100_488);
        assert_eq!(d.output_len(), 520);
        assert_eq!(d.input_shape, (260, 1));
    }

    #[test]
    fn unet_reference_shapes() {
        let d = super::super::reference_unet();
        assert_eq!(d.output_len(), 520);
        // Pool/upsample level lengths: 260 -> 130 -> 65 -> 130 -> 260.
        let lengths: Vec<usize> = ["enc1_pool", "enc2_pool", "dec1_up", "dec2_up"]
            .iter()
            .map(|n| d.layer(n).unwrap().1 .0)
            .collect();
        assert_eq!(lengths, vec![130, 65, 130, 260]);
        assert_eq!(d.layer("bottleneck_conv").unwrap().1, (65, 64));
        assert_eq!(d.layer("dec1_concat").unwrap().1, (130, 96));
        assert_eq!(d.layer("dec2_concat").unwrap().1, (260, 48));
        assert_eq!(d.parameters, 19_442);
    }

    #[test]
    fn concatenate_length_mismatch_is_shape_error() {
        let layers = vec![
            layer("a", LayerKind::MaxPool1D { factor: 2 }, INPUT_NODE),
            layer("b", LayerKind::MaxPool1D { factor: 2 }, "a"),
            layer("join", LayerKind::Concatenate { with: "a".into() }, "b"),
        ];
        let err = ModelDescriptor::new("bad", (260, 1), layers, None).unwrap_err();
        match err {
            NnError::Shape { layer, .. } => assert_eq!(layer, "join"),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn declared_parameter_mismatch_rejected() {
        let layers = vec![layer(
            "d",
            LayerKind::Dense {
                units: 4,
                use_bias: true,
            },
            INPUT_NODE,
        )];
        let err = ModelDescriptor::new("bad", (8, 1), layers, Some(99)).unwrap_err();
        assert!(matches!(err, NnError::Parse(_)));
    }

    #[test]
    fn forward_references_rejected() {
        let layers = vec![
            layer("a", LayerKind::ReLU, "b"),
            layer("b", LayerKind::ReLU, INPUT_NODE),
        ];
        assert!(ModelDescriptor::new("bad", (4, 1), layers, None).is_err());
    }

    #[test]
    fn multiple_terminals_rejected() {
        let layers = vec![
            layer("a", LayerKind::ReLU, INPUT_NODE),
            layer("b", LayerKind::Sigmoid, INPUT_NODE),
        ];
        assert!(ModelDescriptor::new("bad", (4, 1), layers, None).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = super::super::reference_unet();
        let text = d.to_json();
        let back = ModelDescriptor::from_json(&text).unwrap();
        assert_eq!(back, d);
        assert!(text.contains("\"format\": 1"));
    }

    #[test]
    fn json_rejects_unknown_format() {
        let text = r#"{"format": 2, "name": "x", "input_shape": [4,1], "layers": []}"#;
        assert!(ModelDescriptor::from_json(text).is_err());
    }

    #[test]
    fn odd_length_pool_truncates() {
        let layers = vec![layer("p", LayerKind::MaxPool1D { factor: 2 }, INPUT_NODE)];
        let d = ModelDescriptor::new("odd", (65, 1), layers, None).unwrap();
        assert_eq!(d.shapes[0], (32, 1));
    }
}

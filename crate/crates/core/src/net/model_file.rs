//! Versioned JSON model files.
//!
//! Floats are written in shortest round-trip form, so `load(save(net))`
//! reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Conv1d, Dense, Layer, Network};
use crate::attribution::{FourierKind, InverseFourier};
use crate::error::{Error, Result};
use crate::spectral::WindowSpec;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum LayerRecord {
    Dense {
        in_features: usize,
        out_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    Flatten,
    InverseDft {
        length: usize,
    },
    InverseStdft {
        length: usize,
        window: WindowSpec,
    },
}

#[derive(Deserialize)]
struct Header {
    format_version: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    input_length: usize,
    num_classes: usize,
    layers: Vec<LayerRecord>,
}

impl From<&Layer> for LayerRecord {
    fn from(layer: &Layer) -> Self {
        match layer {
            Layer::Dense(d) => LayerRecord::Dense {
                in_features: d.in_features,
                out_features: d.out_features,
                weights: d.weights.clone(),
                bias: d.bias.clone(),
            },
            Layer::Conv1d(c) => LayerRecord::Conv1d {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel_size: c.kernel_size,
                stride: c.stride,
                weights: c.weights.clone(),
                bias: c.bias.clone(),
            },
            Layer::Relu => LayerRecord::Relu,
            Layer::Flatten => LayerRecord::Flatten,
            Layer::InverseFourier(f) => match f.kind() {
                FourierKind::Dft => LayerRecord::InverseDft { length: f.output_len() },
                FourierKind::Stdft(window) => LayerRecord::InverseStdft {
                    length: f.output_len(),
                    window,
                },
            },
        }
    }
}

fn layer_from_record(index: usize, record: LayerRecord) -> Result<Layer> {
    let ctx = |e: Error| Error::parse(format!("layers[{index}]"), e);
    Ok(match record {
        LayerRecord::Dense {
            in_features,
            out_features,
            weights,
            bias,
        } => Layer::Dense(Dense::new(in_features, out_features, weights, bias).map_err(ctx)?),
        LayerRecord::Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            weights,
            bias,
        } => Layer::Conv1d(
            Conv1d::new(in_channels, out_channels, kernel_size, stride, weights, bias).map_err(ctx)?,
        ),
        LayerRecord::Relu => Layer::Relu,
        LayerRecord::Flatten => Layer::Flatten,
        LayerRecord::InverseDft { length } => {
            Layer::InverseFourier(InverseFourier::new(FourierKind::Dft, length).map_err(ctx)?)
        }
        LayerRecord::InverseStdft { length, window } => {
            Layer::InverseFourier(InverseFourier::new(FourierKind::Stdft(window), length).map_err(ctx)?)
        }
    })
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(format!("line {}, column {}", e.line(), e.column()), e)
}

impl Network {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            input_length: self.input_length,
            num_classes: self.num_classes,
            layers: self.layers.iter().map(LayerRecord::from).collect(),
        };
        serde_json::to_string(&file).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Header = serde_json::from_str(text).map_err(json_error)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text).map_err(json_error)?;
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, r)| layer_from_record(i, r))
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(layers, file.input_length).map_err(|e| Error::parse("layer chain", e))?;
        if net.num_classes != file.num_classes {
            return Err(Error::parse(
                "num_classes",
                format!("header says {}, layers produce {}", file.num_classes, net.num_classes),
            ));
        }
        Ok(net)
    }
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), net.to_json().as_bytes())
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    Network::from_json(&std::fs::read_to_string(path)?)
}

//! `.vnn` model files.
//!
//! ```text
//! "VNN1"                      4 bytes
//! header length               u32 little-endian
//! header                      UTF-8 JSON: name, class_labels, normalization, layers
//! weight blob                 f32 little-endian, layer order, weights then bias
//! ```
//!
//! Residual blocks list their inner layers in the header and store their
//! parameters inline, in inner-layer order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Conv2d, Dense, DepthwiseConv2d, Layer, Model, NnError, Normalization};

pub const MAGIC: &[u8; 4] = b"VNN1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    name: String,
    class_labels: Vec<String>,
    normalization: Normalization,
    layers: Vec<LayerHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerHeader {
    Conv2d {
        kernel: [usize; 2],
        stride: usize,
        padding: usize,
        in_channels: usize,
        out_channels: usize,
        bias: bool,
    },
    DepthwiseConv2d {
        kernel: [usize; 2],
        stride: usize,
        padding: usize,
        channels: usize,
        bias: bool,
    },
    Relu,
    #[serde(rename = "maxpool2d")]
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    Softmax,
    ResidualBlock {
        layers: Vec<LayerHeader>,
    },
}

fn describe(layer: &Layer) -> LayerHeader {
    match layer {
        Layer::Conv2d(c) => LayerHeader::Conv2d {
            kernel: [c.kernel_h, c.kernel_w],
            stride: c.stride,
            padding: c.padding,
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            bias: c.bias.is_some(),
        },
        Layer::DepthwiseConv2d(d) => LayerHeader::DepthwiseConv2d {
            kernel: [d.kernel_h, d.kernel_w],
            stride: d.stride,
            padding: d.padding,
            channels: d.channels,
            bias: d.bias.is_some(),
        },
        Layer::Relu => LayerHeader::Relu,
        Layer::MaxPool2d { kernel, stride } => LayerHeader::MaxPool2d {
            kernel: *kernel,
            stride: *stride,
        },
        Layer::GlobalAvgPool => LayerHeader::GlobalAvgPool,
        Layer::Dense(d) => LayerHeader::Dense {
            in_features: d.in_features,
            out_features: d.out_features,
            bias: d.bias.is_some(),
        },
        Layer::Softmax => LayerHeader::Softmax,
        Layer::ResidualBlock(inner) => LayerHeader::ResidualBlock {
            layers: inner.iter().map(describe).collect(),
        },
    }
}

/// Sequential reader over the weight blob.
struct Blob<'a> {
    bytes: &'a [u8],
    taken: usize,
}

impl Blob<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<Vec<f32>, NnError> {
        let need = n
            .checked_mul(4)
            .ok_or_else(|| NnError::Schema(format!("{what}: parameter count overflows")))?;
        if self.bytes.len() < need {
            return Err(NnError::Schema(format!(
                "weight blob ends early: {what} needs {n} floats, {} left (after {} read)",
                self.bytes.len() / 4,
                self.taken
            )));
        }
        let (head, rest) = self.bytes.split_at(need);
        self.bytes = rest;
        self.taken += n;
        Ok(head
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn bias(&mut self, present: bool, n: usize, what: &str) -> Result<Option<Vec<f32>>, NnError> {
        if present {
            self.take(n, what).map(Some)
        } else {
            Ok(None)
        }
    }
}

fn build(h: LayerHeader, blob: &mut Blob<'_>) -> Result<Layer, NnError> {
    Ok(match h {
        LayerHeader::Conv2d {
            kernel: [kh, kw],
            stride,
            padding,
            in_channels,
            out_channels,
            bias,
        } => {
            let n = kh
                .checked_mul(kw)
                .and_then(|v| v.checked_mul(in_channels))
                .and_then(|v| v.checked_mul(out_channels))
                .ok_or_else(|| NnError::Schema("conv2d shape overflows".into()))?;
            Layer::Conv2d(Conv2d {
                kernel_h: kh,
                kernel_w: kw,
                stride,
                padding,
                in_channels,
                out_channels,
                weights: blob.take(n, "conv2d weights")?,
                bias: blob.bias(bias, out_channels, "conv2d bias")?,
            })
        }
        LayerHeader::DepthwiseConv2d {
            kernel: [kh, kw],
            stride,
            padding,
            channels,
            bias,
        } => {
            let n = kh
                .checked_mul(kw)
                .and_then(|v| v.checked_mul(channels))
                .ok_or_else(|| NnError::Schema("depthwise_conv2d shape overflows".into()))?;
            Layer::DepthwiseConv2d(DepthwiseConv2d {
                kernel_h: kh,
                kernel_w: kw,
                stride,
                padding,
                channels,
                weights: blob.take(n, "depthwise_conv2d weights")?,
                bias: blob.bias(bias, channels, "depthwise_conv2d bias")?,
            })
        }
        LayerHeader::Relu => Layer::Relu,
        LayerHeader::MaxPool2d { kernel, stride } => Layer::MaxPool2d { kernel, stride },
        LayerHeader::GlobalAvgPool => Layer::GlobalAvgPool,
        LayerHeader::Dense {
            in_features,
            out_features,
            bias,
        } => {
            let n = in_features
                .checked_mul(out_features)
                .ok_or_else(|| NnError::Schema("dense shape overflows".into()))?;
            Layer::Dense(Dense {
                in_features,
                out_features,
                weights: blob.take(n, "dense weights")?,
                bias: blob.bias(bias, out_features, "dense bias")?,
            })
        }
        LayerHeader::Softmax => Layer::Softmax,
        LayerHeader::ResidualBlock { layers } => {
            Layer::ResidualBlock(layers.into_iter().map(|l| build(l, blob)).collect::<Result<_, _>>()?)
        }
    })
}

/// Decode and validate a model file held in memory.
pub fn decode_model(bytes: &[u8]) -> Result<Model, NnError> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let header_len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let header_bytes = bytes
        .get(8..8 + header_len)
        .ok_or_else(|| NnError::Schema(format!("header length {header_len} exceeds file size")))?;
    let header_text =
        std::str::from_utf8(header_bytes).map_err(|e| NnError::Schema(format!("header is not UTF-8: {e}")))?;
    let header: Header = serde_json::from_str(header_text).map_err(|e| NnError::Schema(format!("header: {e}")))?;
    let mut blob = Blob {
        bytes: &bytes[8 + header_len..],
        taken: 0,
    };
    let layers = header
        .layers
        .into_iter()
        .map(|l| build(l, &mut blob))
        .collect::<Result<Vec<_>, _>>()?;
    if !blob.bytes.is_empty() {
        return Err(NnError::Schema(format!(
            "{} trailing bytes after the weight blob",
            blob.bytes.len()
        )));
    }
    Model::new(header.name, header.class_labels, header.normalization, layers)
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let header = Header {
        name: model.name().to_owned(),
        class_labels: model.class_labels().to_vec(),
        normalization: *model.normalization(),
        layers: model.layers().iter().map(describe).collect(),
    };
    let text = serde_json::to_string(&header).expect("header serialises");
    let mut out = Vec::with_capacity(8 + text.len() + model.blob_len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for l in model.layers() {
        l.for_each_param_slice(&mut |s| {
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
    }
    out
}

/// Read and validate a `.vnn` file. This is the only I/O a model performs.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model, NnError> {
    decode_model(&fs::read(path)?)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), NnError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

/// Float count of the weight blob, read from the file size and header alone.
pub fn blob_float_count(bytes: &[u8]) -> Result<usize, NnError> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let header_len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let rest = bytes
        .len()
        .checked_sub(8 + header_len)
        .ok_or_else(|| NnError::Schema("header length exceeds file size".into()))?;
    Ok(rest / 4)
}

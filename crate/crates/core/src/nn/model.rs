use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::tensor::{Shape, Tensor3};
use crate::vision::{ImageTensor, IMAGE_CHANNELS, IMAGE_SIDE};

use super::{forward, shape_chain, Layer, NnError};

/// Shape every model must accept.
pub const INPUT_SHAPE: Shape = Shape::new(IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            mean: [0.5; 3],
            std: [0.5; 3],
        }
    }
}

/// A validated inference graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    name: String,
    class_labels: Vec<String>,
    normalization: Normalization,
    layers: Vec<Layer>,
}

/// Softmax output aligned with a model's class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores(Vec<f64>);

impl ClassScores {
    pub fn new(scores: Vec<f64>) -> Self {
        ClassScores(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the highest score, lowest index on ties. `None` when empty.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in self.0.iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }
}

impl Index<usize> for ClassScores {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-layer accounting row, see [`Model::layer_reports`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    /// Nesting depth: 0 for top-level layers, 1 inside a residual block.
    pub depth: usize,
    pub kind: &'static str,
    pub description: String,
    pub input: Shape,
    pub output: Shape,
    pub params: u64,
    pub flops: u64,
}

impl Model {
    /// Build and validate.
    pub fn new(
        name: impl Into<String>,
        class_labels: Vec<String>,
        normalization: Normalization,
        layers: Vec<Layer>,
    ) -> Result<Self, NnError> {
        let model = Model {
            name: name.into(),
            class_labels,
            normalization,
            layers,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), NnError> {
        for l in &self.layers {
            l.check_weights()?;
        }
        if self.class_labels.is_empty() {
            return Err(NnError::Schema("model declares no class labels".into()));
        }
        if let Some(c) = self.normalization.std.iter().position(|s| *s == 0.0 || !s.is_finite()) {
            return Err(NnError::Schema(format!(
                "normalisation std[{c}] must be finite and non-zero"
            )));
        }
        if !self.normalization.mean.iter().all(|m| m.is_finite()) {
            return Err(NnError::Schema("normalisation mean must be finite".into()));
        }
        let n = self.layers.len();
        if n < 2 || !matches!(self.layers[n - 1], Layer::Softmax) {
            return Err(NnError::Shape("last layer must be softmax preceded by dense".into()));
        }
        let Layer::Dense(head) = &self.layers[n - 2] else {
            return Err(NnError::Shape("layer before softmax must be dense".into()));
        };
        if head.out_features != self.class_labels.len() {
            return Err(NnError::Shape(format!(
                "dense head has {} outputs but {} class labels",
                head.out_features,
                self.class_labels.len()
            )));
        }
        shape_chain(&self.layers, INPUT_SHAPE)?;
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Softmax scores for one normalised image.
    pub fn forward(&self, input: &ImageTensor) -> Result<ClassScores, NnError> {
        if input.shape() != INPUT_SHAPE {
            return Err(NnError::Shape(format!(
                "model input must be {INPUT_SHAPE}, got {}",
                input.shape()
            )));
        }
        let out = forward::run_layers(&self.layers, input.clone())?;
        Ok(ClassScores(out.into_vec()))
    }

    /// Run on an arbitrary tensor, skipping the input-shape check.
    pub fn forward_tensor(&self, input: Tensor3) -> Result<Tensor3, NnError> {
        forward::run_layers(&self.layers, input)
    }

    /// Label and index of the top score.
    pub fn argmax_class<'a>(&'a self, scores: &ClassScores) -> Option<(&'a str, usize)> {
        let i = scores.argmax()?;
        self.class_labels.get(i).map(|l| (l.as_str(), i))
    }

    pub fn param_count(&self) -> u64 {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Total FLOPs for one 3x224x224 forward pass.
    pub fn flops_total(&self) -> u64 {
        self.layer_reports()
            .iter()
            .filter(|r| r.depth == 0)
            .map(|r| r.flops)
            .sum()
    }

    /// Share of all FLOPs spent in the dense head before the softmax, in percent.
    pub fn last_layer_complexity(&self) -> f64 {
        let reports = self.layer_reports();
        let top: Vec<&LayerReport> = reports.iter().filter(|r| r.depth == 0).collect();
        let head = top[top.len() - 2].flops;
        let total: u64 = top.iter().map(|r| r.flops).sum();
        if total == 0 {
            0.0
        } else {
            100.0 * head as f64 / total as f64
        }
    }

    /// One row per layer; residual blocks are followed by rows for their
    /// inner layers at depth 1.
    pub fn layer_reports(&self) -> Vec<LayerReport> {
        fn walk(layers: &[Layer], mut shape: Shape, depth: usize, out: &mut Vec<LayerReport>) {
            for l in layers {
                // validated at construction
                let next = l.output_shape(shape).expect("validated model");
                out.push(LayerReport {
                    depth,
                    kind: l.kind(),
                    description: l.to_string(),
                    input: shape,
                    output: next,
                    params: l.param_count(),
                    flops: l.flops(shape).expect("validated model"),
                });
                if let Layer::ResidualBlock(inner) = l {
                    walk(inner, shape, depth + 1, out);
                }
                shape = next;
            }
        }
        let mut out = Vec::new();
        walk(&self.layers, INPUT_SHAPE, 0, &mut out);
        out
    }

    /// Number of `f32` values in the weight blob, in layer order.
    pub fn blob_len(&self) -> usize {
        let mut n = 0;
        for l in &self.layers {
            l.for_each_param_slice(&mut |s| n += s.len());
        }
        n
    }
}

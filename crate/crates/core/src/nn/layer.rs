use std::fmt;

use crate::tensor::Shape;

use super::NnError;

/// Standard 2-D convolution. Weights are laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

/// Per-channel spatial convolution. Weights are laid out `[c][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv2d {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub channels: usize,
    pub weights: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

/// Fully connected layer over the flattened input. Weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weights: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    DepthwiseConv2d(DepthwiseConv2d),
    Relu,
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense(Dense),
    Softmax,
    /// `inner(x) + x`.
    ResidualBlock(Vec<Layer>),
}

fn conv_out(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::DepthwiseConv2d(_) => "depthwise_conv2d",
            Layer::Relu => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::GlobalAvgPool => "global_avg_pool",
            Layer::Dense(_) => "dense",
            Layer::Softmax => "softmax",
            Layer::ResidualBlock(_) => "residual_block",
        }
    }

    /// Check the stored weight and bias lengths against the declared shape.
    pub fn check_weights(&self) -> Result<(), NnError> {
        let check = |what: &str, declared: usize, weights: &[f32], bias: &Option<Vec<f32>>, outs: usize| {
            if weights.len() != declared {
                return Err(NnError::Schema(format!(
                    "{what}: expected {declared} weights, found {}",
                    weights.len()
                )));
            }
            if let Some(b) = bias {
                if b.len() != outs {
                    return Err(NnError::Schema(format!(
                        "{what}: expected {outs} biases, found {}",
                        b.len()
                    )));
                }
            }
            Ok(())
        };
        match self {
            Layer::Conv2d(c) => check(
                "conv2d",
                c.kernel_h * c.kernel_w * c.in_channels * c.out_channels,
                &c.weights,
                &c.bias,
                c.out_channels,
            ),
            Layer::DepthwiseConv2d(d) => check(
                "depthwise_conv2d",
                d.kernel_h * d.kernel_w * d.channels,
                &d.weights,
                &d.bias,
                d.channels,
            ),
            Layer::Dense(d) => check(
                "dense",
                d.in_features * d.out_features,
                &d.weights,
                &d.bias,
                d.out_features,
            ),
            Layer::ResidualBlock(inner) => inner.iter().try_for_each(Layer::check_weights),
            _ => Ok(()),
        }
    }

    /// Output shape for `input`, or a `Shape` error if the layer cannot
    /// consume it.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        let bad = |msg: String| Err(NnError::Shape(format!("{}: {msg}", self.kind())));
        match self {
            Layer::Conv2d(c) => {
                if input.c != c.in_channels {
                    return bad(format!("expects {} input channels, got {input}", c.in_channels));
                }
                match (
                    conv_out(input.h, c.kernel_h, c.stride, c.padding),
                    conv_out(input.w, c.kernel_w, c.stride, c.padding),
                ) {
                    (Some(h), Some(w)) => Ok(Shape::new(c.out_channels, h, w)),
                    _ => bad(format!("kernel {}x{} does not fit {input}", c.kernel_h, c.kernel_w)),
                }
            }
            Layer::DepthwiseConv2d(d) => {
                if input.c != d.channels {
                    return bad(format!("expects {} channels, got {input}", d.channels));
                }
                match (
                    conv_out(input.h, d.kernel_h, d.stride, d.padding),
                    conv_out(input.w, d.kernel_w, d.stride, d.padding),
                ) {
                    (Some(h), Some(w)) => Ok(Shape::new(d.channels, h, w)),
                    _ => bad(format!("kernel {}x{} does not fit {input}", d.kernel_h, d.kernel_w)),
                }
            }
            Layer::MaxPool2d { kernel, stride } => {
                match (
                    conv_out(input.h, *kernel, *stride, 0),
                    conv_out(input.w, *kernel, *stride, 0),
                ) {
                    (Some(h), Some(w)) => Ok(Shape::new(input.c, h, w)),
                    _ => bad(format!("window {kernel} stride {stride} does not fit {input}")),
                }
            }
            Layer::GlobalAvgPool => Ok(Shape::new(input.c, 1, 1)),
            Layer::Dense(d) => {
                if input.len() != d.in_features {
                    return bad(format!("expects {} features, got {input}", d.in_features));
                }
                Ok(Shape::new(d.out_features, 1, 1))
            }
            Layer::Relu | Layer::Softmax => Ok(input),
            Layer::ResidualBlock(inner) => {
                let out = shape_chain(inner, input)?;
                if out != input {
                    return bad(format!("inner layers map {input} to {out}; skip needs equal shapes"));
                }
                Ok(input)
            }
        }
    }

    /// Weight and bias element count.
    pub fn param_count(&self) -> u64 {
        fn wb(w: &[f32], b: &Option<Vec<f32>>) -> u64 {
            (w.len() + b.as_ref().map_or(0, Vec::len)) as u64
        }
        match self {
            Layer::Conv2d(c) => wb(&c.weights, &c.bias),
            Layer::DepthwiseConv2d(d) => wb(&d.weights, &d.bias),
            Layer::Dense(d) => wb(&d.weights, &d.bias),
            Layer::ResidualBlock(inner) => inner.iter().map(Layer::param_count).sum(),
            _ => 0,
        }
    }

    /// Floating-point operations for one forward pass on `input`, counting a
    /// multiply-accumulate as 2 and ignoring biases, activations and pooling.
    pub fn flops(&self, input: Shape) -> Result<u64, NnError> {
        let out = self.output_shape(input)?;
        let n = match self {
            Layer::Conv2d(c) => 2 * c.kernel_h * c.kernel_w * c.in_channels * c.out_channels * out.h * out.w,
            Layer::DepthwiseConv2d(d) => 2 * d.kernel_h * d.kernel_w * d.channels * out.h * out.w,
            Layer::Dense(d) => 2 * d.in_features * d.out_features,
            Layer::ResidualBlock(inner) => {
                let mut shape = input;
                let mut total = 0u64;
                for l in inner {
                    total += l.flops(shape)?;
                    shape = l.output_shape(shape)?;
                }
                return Ok(total);
            }
            _ => 0,
        };
        Ok(n as u64)
    }

    /// Visit weights then bias, recursing into residual blocks in order.
    pub(crate) fn for_each_param_slice<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        let mut wb = |w: &'a [f32], b: &'a Option<Vec<f32>>| {
            f(w);
            if let Some(b) = b {
                f(b);
            }
        };
        match self {
            Layer::Conv2d(c) => wb(&c.weights, &c.bias),
            Layer::DepthwiseConv2d(d) => wb(&d.weights, &d.bias),
            Layer::Dense(d) => wb(&d.weights, &d.bias),
            Layer::ResidualBlock(inner) => inner.iter().for_each(|l| l.for_each_param_slice(f)),
            _ => {}
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bias = |b: &Option<Vec<f32>>| if b.is_some() { "" } else { ", no bias" };
        match self {
            Layer::Conv2d(c) => write!(
                f,
                "conv2d {}x{} {}->{} stride {} pad {}{}",
                c.kernel_h,
                c.kernel_w,
                c.in_channels,
                c.out_channels,
                c.stride,
                c.padding,
                bias(&c.bias)
            ),
            Layer::DepthwiseConv2d(d) => write!(
                f,
                "depthwise_conv2d {}x{} c={} stride {} pad {}{}",
                d.kernel_h,
                d.kernel_w,
                d.channels,
                d.stride,
                d.padding,
                bias(&d.bias)
            ),
            Layer::MaxPool2d { kernel, stride } => write!(f, "maxpool2d {kernel}x{kernel} stride {stride}"),
            Layer::Dense(d) => write!(f, "dense {}->{}{}", d.in_features, d.out_features, bias(&d.bias)),
            Layer::ResidualBlock(inner) => write!(f, "residual_block ({} inner layers)", inner.len()),
            other => f.write_str(other.kind()),
        }
    }
}

/// Propagate `input` through `layers`.
pub fn shape_chain(layers: &[Layer], input: Shape) -> Result<Shape, NnError> {
    layers.iter().try_fold(input, |s, l| l.output_shape(s))
}

//! Forward pass. Weights are `f32`; every accumulation runs in `f64`.

use crate::tensor::{Shape, Tensor3};

use super::{Conv2d, Dense, DepthwiseConv2d, Layer, NnError};

/// Apply `layers` in order.
pub fn run_layers(layers: &[Layer], input: Tensor3) -> Result<Tensor3, NnError> {
    layers.iter().try_fold(input, |x, l| apply(l, x))
}

/// Apply one layer.
pub fn apply(layer: &Layer, input: Tensor3) -> Result<Tensor3, NnError> {
    let out_shape = layer.output_shape(input.shape())?;
    Ok(match layer {
        Layer::Conv2d(c) => conv2d(c, &input, out_shape),
        Layer::DepthwiseConv2d(d) => depthwise(d, &input, out_shape),
        Layer::Relu => {
            let mut x = input;
            x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            x
        }
        Layer::MaxPool2d { kernel, stride } => maxpool(&input, *kernel, *stride, out_shape),
        Layer::GlobalAvgPool => {
            let s = input.shape();
            let n = (s.h * s.w) as f64;
            let data = (0..s.c).map(|c| input.channel(c).iter().sum::<f64>() / n).collect();
            Tensor3::from_vec(out_shape, data)
        }
        Layer::Dense(d) => dense(d, &input, out_shape),
        Layer::Softmax => {
            let s = input.shape();
            Tensor3::from_vec(s, softmax(input.data()))
        }
        Layer::ResidualBlock(inner) => {
            let mut y = run_layers(inner, input.clone())?;
            y.data_mut().iter_mut().zip(input.data()).for_each(|(a, b)| *a += b);
            y
        }
    })
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn conv2d(c: &Conv2d, input: &Tensor3, out_shape: Shape) -> Tensor3 {
    let in_shape = input.shape();
    let (ih, iw) = (in_shape.h as isize, in_shape.w as isize);
    let (oh, ow) = (out_shape.h, out_shape.w);
    let plane = oh * ow;
    let mut out = vec![0.0f64; out_shape.len()];
    for o in 0..c.out_channels {
        let acc = &mut out[o * plane..(o + 1) * plane];
        if let Some(b) = &c.bias {
            acc.fill(f64::from(b[o]));
        }
        for i in 0..c.in_channels {
            let src = input.channel(i);
            for ky in 0..c.kernel_h {
                for kx in 0..c.kernel_w {
                    let w = f64::from(c.weights[((o * c.in_channels + i) * c.kernel_h + ky) * c.kernel_w + kx]);
                    accumulate_tap(
                        acc,
                        src,
                        w,
                        (ky as isize, kx as isize),
                        (ih, iw),
                        (oh, ow),
                        c.stride,
                        c.padding,
                    );
                }
            }
        }
    }
    Tensor3::from_vec(out_shape, out)
}

fn depthwise(d: &DepthwiseConv2d, input: &Tensor3, out_shape: Shape) -> Tensor3 {
    let in_shape = input.shape();
    let (ih, iw) = (in_shape.h as isize, in_shape.w as isize);
    let (oh, ow) = (out_shape.h, out_shape.w);
    let plane = oh * ow;
    let mut out = vec![0.0f64; out_shape.len()];
    for ch in 0..d.channels {
        let acc = &mut out[ch * plane..(ch + 1) * plane];
        if let Some(b) = &d.bias {
            acc.fill(f64::from(b[ch]));
        }
        let src = input.channel(ch);
        for ky in 0..d.kernel_h {
            for kx in 0..d.kernel_w {
                let w = f64::from(d.weights[(ch * d.kernel_h + ky) * d.kernel_w + kx]);
                accumulate_tap(
                    acc,
                    src,
                    w,
                    (ky as isize, kx as isize),
                    (ih, iw),
                    (oh, ow),
                    d.stride,
                    d.padding,
                );
            }
        }
    }
    Tensor3::from_vec(out_shape, out)
}

/// Add `w * src[y*s - p + ky][x*s - p + kx]` to every output cell whose tap
/// lands inside the input; out-of-range taps read zero padding.
#[allow(clippy::too_many_arguments)]
#[inline]
fn accumulate_tap(
    acc: &mut [f64],
    src: &[f64],
    w: f64,
    (ky, kx): (isize, isize),
    (ih, iw): (isize, isize),
    (oh, ow): (usize, usize),
    stride: usize,
    padding: usize,
) {
    if w == 0.0 {
        return;
    }
    let s = stride as isize;
    let p = padding as isize;
    for oy in 0..oh {
        let iy = oy as isize * s - p + ky;
        if iy < 0 || iy >= ih {
            continue;
        }
        let src_row = &src[(iy * iw) as usize..((iy + 1) * iw) as usize];
        let dst_row = &mut acc[oy * ow..(oy + 1) * ow];
        for (ox, d) in dst_row.iter_mut().enumerate() {
            let ix = ox as isize * s - p + kx;
            if ix >= 0 && ix < iw {
                *d += w * src_row[ix as usize];
            }
        }
    }
}

fn maxpool(input: &Tensor3, kernel: usize, stride: usize, out_shape: Shape) -> Tensor3 {
    let mut out = Vec::with_capacity(out_shape.len());
    for c in 0..out_shape.c {
        for oy in 0..out_shape.h {
            for ox in 0..out_shape.w {
                let mut m = f64::NEG_INFINITY;
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        m = m.max(input.get(c, oy * stride + ky, ox * stride + kx));
                    }
                }
                out.push(m);
            }
        }
    }
    Tensor3::from_vec(out_shape, out)
}

fn dense(d: &Dense, input: &Tensor3, out_shape: Shape) -> Tensor3 {
    let x = input.data();
    let out = (0..d.out_features)
        .map(|o| {
            let row = &d.weights[o * d.in_features..(o + 1) * d.in_features];
            let dot: f64 = row.iter().zip(x).map(|(w, v)| f64::from(*w) * v).sum();
            dot + d.bias.as_ref().map_or(0.0, |b| f64::from(b[o]))
        })
        .collect();
    Tensor3::from_vec(out_shape, out)
}

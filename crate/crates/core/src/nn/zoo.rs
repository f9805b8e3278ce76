//! Toy reference models with fixed-seed random weights.
//!
//! Three structurally distinct families at desk scale:
//!
//! * `tiny-squeeze`: stem conv, then a fire-style 1x1 squeeze and 3x3 expand.
//! * `tiny-mobile`: stem conv, then two depthwise-separable blocks.
//! * `tiny-res`: stem conv, then one residual block of two 3x3 convs.
//!
//! All end in global average pooling, a dense head over the seven traffic
//! classes, and softmax. The committed `fixtures/*.vnn` files are the output
//! of [`build`]; regenerate them with `cargo run --example build_fixtures`.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Conv2d, Dense, DepthwiseConv2d, Layer, Model, Normalization};
use crate::classify::TrafficClass;

pub const TINY_SQUEEZE: &str = "tiny-squeeze";
pub const TINY_MOBILE: &str = "tiny-mobile";
pub const TINY_RES: &str = "tiny-res";

pub const NAMES: [&str; 3] = [TINY_SQUEEZE, TINY_MOBILE, TINY_RES];

const SEEDS: [u64; 3] = [0x5157_0001, 0x4d0b_0002, 0x7265_0003];

struct Init(ChaCha8Rng);

impl Init {
    /// Uniform in `[-bound, bound)` from 24 random bits; no dependence on the
    /// float sampling of any particular `rand` release.
    fn uniform(&mut self, n: usize, bound: f32) -> Vec<f32> {
        (0..n)
            .map(|_| {
                let u = (self.0.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
                (2.0 * u - 1.0) * bound
            })
            .collect()
    }

    fn conv(&mut self, k: usize, cin: usize, cout: usize, stride: usize, padding: usize) -> Layer {
        let bound = (6.0 / (k * k * cin) as f32).sqrt();
        Layer::Conv2d(Conv2d {
            kernel_h: k,
            kernel_w: k,
            stride,
            padding,
            in_channels: cin,
            out_channels: cout,
            weights: self.uniform(k * k * cin * cout, bound),
            bias: Some(self.uniform(cout, 0.05)),
        })
    }

    fn depthwise(&mut self, k: usize, channels: usize, stride: usize, padding: usize) -> Layer {
        let bound = (6.0 / (k * k) as f32).sqrt();
        Layer::DepthwiseConv2d(DepthwiseConv2d {
            kernel_h: k,
            kernel_w: k,
            stride,
            padding,
            channels,
            weights: self.uniform(k * k * channels, bound),
            bias: Some(self.uniform(channels, 0.05)),
        })
    }

    fn dense(&mut self, inp: usize, out: usize) -> Layer {
        let bound = (6.0 / inp as f32).sqrt();
        Layer::Dense(Dense {
            in_features: inp,
            out_features: out,
            weights: self.uniform(inp * out, bound),
            bias: Some(self.uniform(out, 0.05)),
        })
    }
}

fn labels() -> Vec<String> {
    TrafficClass::ALL.iter().map(|c| c.as_str().to_owned()).collect()
}

pub fn tiny_squeeze() -> Model {
    let mut r = Init(ChaCha8Rng::seed_from_u64(SEEDS[0]));
    let layers = vec![
        r.conv(3, 3, 8, 2, 1), // 8x112x112
        Layer::Relu,
        Layer::MaxPool2d { kernel: 2, stride: 2 }, // 8x56x56
        r.conv(1, 8, 4, 1, 0),                     // squeeze
        Layer::Relu,
        r.conv(3, 4, 16, 1, 1), // expand
        Layer::Relu,
        Layer::MaxPool2d { kernel: 2, stride: 2 }, // 16x28x28
        Layer::GlobalAvgPool,
        r.dense(16, 7),
        Layer::Softmax,
    ];
    Model::new(TINY_SQUEEZE, labels(), Normalization::default(), layers).expect("valid toy model")
}

pub fn tiny_mobile() -> Model {
    let mut r = Init(ChaCha8Rng::seed_from_u64(SEEDS[1]));
    let layers = vec![
        r.conv(3, 3, 8, 2, 1), // 8x112x112
        Layer::Relu,
        r.depthwise(3, 8, 2, 1), // 8x56x56
        Layer::Relu,
        r.conv(1, 8, 16, 1, 0), // pointwise
        Layer::Relu,
        r.depthwise(3, 16, 2, 1), // 16x28x28
        Layer::Relu,
        r.conv(1, 16, 32, 1, 0),
        Layer::Relu,
        Layer::GlobalAvgPool,
        r.dense(32, 7),
        Layer::Softmax,
    ];
    Model::new(TINY_MOBILE, labels(), Normalization::default(), layers).expect("valid toy model")
}

pub fn tiny_res() -> Model {
    let mut r = Init(ChaCha8Rng::seed_from_u64(SEEDS[2]));
    let stem = r.conv(3, 3, 8, 2, 1);
    let block = Layer::ResidualBlock(vec![r.conv(3, 8, 8, 1, 1), Layer::Relu, r.conv(3, 8, 8, 1, 1)]);
    let layers = vec![
        stem, // 8x112x112
        Layer::Relu,
        Layer::MaxPool2d { kernel: 2, stride: 2 }, // 8x56x56
        block,
        Layer::Relu,
        Layer::GlobalAvgPool,
        r.dense(8, 7),
        Layer::Softmax,
    ];
    Model::new(TINY_RES, labels(), Normalization::default(), layers).expect("valid toy model")
}

/// Build a toy model by name.
pub fn build(name: &str) -> Option<Model> {
    match name {
        TINY_SQUEEZE => Some(tiny_squeeze()),
        TINY_MOBILE => Some(tiny_mobile()),
        TINY_RES => Some(tiny_res()),
        _ => None,
    }
}

/// Path of a committed fixture inside this crate.
pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.vnn"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_are_deterministic() {
        for name in NAMES {
            assert_eq!(build(name), build(name));
        }
        assert!(build("resnet-18").is_none());
    }

    #[test]
    fn families_are_distinct() {
        let has = |m: &Model, kind: &str| m.layer_reports().iter().any(|r| r.kind == kind);
        assert!(has(&tiny_mobile(), "depthwise_conv2d"));
        assert!(has(&tiny_res(), "residual_block"));
        assert!(!has(&tiny_squeeze(), "residual_block"));
        assert!(!has(&tiny_squeeze(), "depthwise_conv2d"));
    }
}

//! Packet bytes to fixed-size images.
//!
//! The transform of record: take the first `224*224` bytes of the frame
//! (header and payload), lay them row-major into the smallest `s x s` square
//! that holds them (zero padded), then nearest-neighbour resize to 224x224
//! with source index `floor(target * s / 224)`. The grey level is
//! replicated into three channels.
//!
//! Images are written as binary PPM (`P6`) or PGM (`P5`).

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Shape, Tensor3};

pub const IMAGE_SIDE: usize = 224;
pub const IMAGE_CHANNELS: usize = 3;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const IMAGE_BYTES: usize = IMAGE_PIXELS * IMAGE_CHANNELS;

/// Normalised inference input, shape `3 x 224 x 224`.
pub type ImageTensor = Tensor3;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("EmptyPacket: cannot build an image from zero bytes")]
    EmptyPacket,
    #[error("ZeroStd: normalisation std is zero for channel {0}")]
    ZeroStd(usize),
    #[error("not a 224x224 P5/P6 image: {0}")]
    BadImage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Bytes beyond this prefix are ignored. Never more than `224*224`.
    pub max_bytes: usize,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            max_bytes: IMAGE_PIXELS,
        }
    }
}

/// 224x224 RGB image, row-major, channel-interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct PacketImage {
    pixels: Vec<u8>,
}

impl std::fmt::Debug for PacketImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PacketImage")
            .field("bytes", &self.pixels.len())
            .finish()
    }
}

impl PacketImage {
    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self, VisionError> {
        if pixels.len() != IMAGE_BYTES {
            return Err(VisionError::BadImage(format!("{} bytes", pixels.len())));
        }
        Ok(PacketImage { pixels })
    }

    pub fn filled(value: u8) -> Self {
        PacketImage {
            pixels: vec![value; IMAGE_BYTES],
        }
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize, c: usize) -> u8 {
        self.pixels[(y * IMAGE_SIDE + x) * IMAGE_CHANNELS + c]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn channels_equal(&self) -> bool {
        self.pixels.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }
}

fn ceil_sqrt(n: usize) -> usize {
    let mut s = (n as f64).sqrt() as usize;
    while s * s < n {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= n {
        s -= 1;
    }
    s
}

pub fn packet_to_image(bytes: &[u8], cfg: &TransformConfig) -> Result<PacketImage, VisionError> {
    if bytes.is_empty() {
        return Err(VisionError::EmptyPacket);
    }
    let len = bytes.len().min(cfg.max_bytes.clamp(1, IMAGE_PIXELS));
    let used = &bytes[..len];
    let side = ceil_sqrt(len);
    // Source column for each target column; rows use the same table.
    let src: Vec<usize> = (0..IMAGE_SIDE).map(|t| t * side / IMAGE_SIDE).collect();
    let mut pixels = vec![0u8; IMAGE_BYTES];
    for (y, &sy) in src.iter().enumerate() {
        let row = &mut pixels[y * IMAGE_SIDE * 3..(y + 1) * IMAGE_SIDE * 3];
        for (x, &sx) in src.iter().enumerate() {
            let v = used.get(sy * side + sx).copied().unwrap_or(0);
            row[x * 3..x * 3 + 3].fill(v);
        }
    }
    Ok(PacketImage { pixels })
}

/// `(pixel / 255 - mean[c]) / std[c]`, laid out CHW.
pub fn normalize(img: &PacketImage, mean: [f64; 3], std: [f64; 3]) -> Result<ImageTensor, VisionError> {
    if let Some(c) = std.iter().position(|&s| s == 0.0) {
        return Err(VisionError::ZeroStd(c));
    }
    let mut out = Tensor3::zeros(Shape::new(IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE));
    let data = out.data_mut();
    for c in 0..IMAGE_CHANNELS {
        // 256-entry lookup keeps the per-pixel arithmetic identical everywhere
        let lut: Vec<f64> = (0..=255u8).map(|p| (f64::from(p) / 255.0 - mean[c]) / std[c]).collect();
        let plane = &mut data[c * IMAGE_PIXELS..(c + 1) * IMAGE_PIXELS];
        for (i, v) in plane.iter_mut().enumerate() {
            *v = lut[usize::from(img.pixels[i * 3 + c])];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Ppm,
    Pgm,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Pgm => "pgm",
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ppm" => Ok(ImageFormat::Ppm),
            "pgm" => Ok(ImageFormat::Pgm),
            other => Err(format!("unknown image format {other:?} (expected ppm or pgm)")),
        }
    }
}

pub fn encode_image(img: &PacketImage, format: ImageFormat) -> Vec<u8> {
    match format {
        ImageFormat::Ppm => {
            let mut out = format!("P6\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n").into_bytes();
            out.extend_from_slice(&img.pixels);
            out
        }
        ImageFormat::Pgm => {
            let mut out = format!("P5\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n").into_bytes();
            out.extend(img.pixels.iter().step_by(3));
            out
        }
    }
}

pub fn write_image(img: &PacketImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<(), VisionError> {
    fs::write(path, encode_image(img, format))?;
    Ok(())
}

/// Parse an image produced by [`encode_image`]. PGM input is replicated to
/// three channels.
pub fn decode_image(bytes: &[u8]) -> Result<PacketImage, VisionError> {
    let (channels, header) = if bytes.starts_with(b"P6\n") {
        (3, "P6\n224 224\n255\n")
    } else if bytes.starts_with(b"P5\n") {
        (1, "P5\n224 224\n255\n")
    } else {
        return Err(VisionError::BadImage("unknown magic".into()));
    };
    let body = bytes
        .strip_prefix(header.as_bytes())
        .ok_or_else(|| VisionError::BadImage("unexpected header".into()))?;
    if body.len() != IMAGE_PIXELS * channels {
        return Err(VisionError::BadImage(format!("{} body bytes", body.len())));
    }
    let pixels = if channels == 3 {
        body.to_vec()
    } else {
        body.iter().flat_map(|&v| [v, v, v]).collect()
    };
    Ok(PacketImage { pixels })
}

pub fn read_image(path: impl AsRef<Path>) -> Result<PacketImage, VisionError> {
    decode_image(&fs::read(path)?)
}

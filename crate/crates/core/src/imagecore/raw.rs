//! Band-sequential RAW buffers with a `key: value` sidecar descriptor.
//!
//! ```text
//! width: 512
//! height: 512
//! bands: 10
//! bit_depth: 16
//! byte_order: little_endian
//! layout: band_sequential
//! band_labels: b001,b002,...        (optional)
//! ```

use super::{BitDepth, ImageError, RasterImage, SpectralCube};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByteOrder {
    #[default]
    LittleEndian,
    BigEndian,
}

impl ByteOrder {
    fn as_str(self) -> &'static str {
        match self {
            ByteOrder::LittleEndian => "little_endian",
            ByteOrder::BigEndian => "big_endian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDescriptor {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bit_depth: BitDepth,
    pub byte_order: ByteOrder,
    pub band_labels: Option<Vec<String>>,
}

impl RawDescriptor {
    /// Exact buffer length this descriptor describes.
    pub fn byte_len(&self) -> Option<usize> {
        self.width
            .checked_mul(self.height)?
            .checked_mul(self.bands)?
            .checked_mul(self.bit_depth.bytes_per_sample())
    }

    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "width: {}", self.width);
        let _ = writeln!(out, "height: {}", self.height);
        let _ = writeln!(out, "bands: {}", self.bands);
        let _ = writeln!(out, "bit_depth: {}", self.bit_depth.bits());
        let _ = writeln!(out, "byte_order: {}", self.byte_order.as_str());
        let _ = writeln!(out, "layout: band_sequential");
        if let Some(labels) = &self.band_labels {
            let _ = writeln!(out, "band_labels: {}", labels.join(","));
        }
        out
    }
}

impl FromStr for RawDescriptor {
    type Err = ImageError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| ImageError::Descriptor(msg);
        let (mut width, mut height, mut bands, mut depth) = (None, None, None, None);
        let mut byte_order = ByteOrder::default();
        let mut band_labels = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| bad(format!("line {}: expected `key: value`", lineno + 1)))?;
            let value = value.trim();
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("line {}: `{v}` is not an integer", lineno + 1)))
            };
            match key.trim() {
                "width" => width = Some(int(value)?),
                "height" => height = Some(int(value)?),
                "bands" => bands = Some(int(value)?),
                "bit_depth" => depth = Some(BitDepth::from_bits(int(value)? as u32)?),
                "byte_order" => {
                    byte_order = match value {
                        "little_endian" | "little" | "le" => ByteOrder::LittleEndian,
                        "big_endian" | "big" | "be" => ByteOrder::BigEndian,
                        other => return Err(bad(format!("unknown byte_order `{other}`"))),
                    }
                }
                "layout" => {
                    if value != "band_sequential" && value != "bsq" {
                        return Err(bad(format!("unsupported layout `{value}`")));
                    }
                }
                "band_labels" => {
                    band_labels = Some(value.split(',').map(|s| s.trim().to_string()).collect())
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let desc = RawDescriptor {
            width: width.ok_or_else(|| bad("missing width".into()))?,
            height: height.ok_or_else(|| bad("missing height".into()))?,
            bands: bands.ok_or_else(|| bad("missing bands".into()))?,
            bit_depth: depth.ok_or_else(|| bad("missing bit_depth".into()))?,
            byte_order,
            band_labels,
        };
        if desc.width == 0 || desc.height == 0 || desc.bands == 0 {
            return Err(bad("width, height and bands must be positive".into()));
        }
        if let Some(labels) = &desc.band_labels {
            if labels.len() != desc.bands {
                return Err(ImageError::LabelCount {
                    labels: labels.len(),
                    bands: desc.bands,
                });
            }
        }
        Ok(desc)
    }
}

/// Decodes a band-sequential buffer into a cube.
pub fn raw_io(bytes: &[u8], descriptor: &RawDescriptor) -> Result<SpectralCube, ImageError> {
    let expected = descriptor.byte_len().ok_or(ImageError::InvalidDimensions {
        width: descriptor.width,
        height: descriptor.height,
    })?;
    if bytes.len() != expected {
        return Err(ImageError::SizeMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let band_len = expected / descriptor.bands;
    let bands = bytes
        .chunks_exact(band_len)
        .map(|chunk| {
            let samples = match descriptor.bit_depth {
                BitDepth::Eight => chunk.iter().map(|&b| u16::from(b)).collect(),
                BitDepth::Sixteen => chunk
                    .chunks_exact(2)
                    .map(|c| match descriptor.byte_order {
                        ByteOrder::LittleEndian => u16::from_le_bytes([c[0], c[1]]),
                        ByteOrder::BigEndian => u16::from_be_bytes([c[0], c[1]]),
                    })
                    .collect(),
            };
            RasterImage::new(descriptor.width, descriptor.height, descriptor.bit_depth, samples)
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpectralCube::new(bands, descriptor.band_labels.clone())
}

/// Encodes a cube as little-endian band-sequential RAW plus its descriptor.
pub fn cube_to_raw(cube: &SpectralCube) -> (Vec<u8>, RawDescriptor) {
    let descriptor = RawDescriptor {
        width: cube.width(),
        height: cube.height(),
        bands: cube.band_count(),
        bit_depth: cube.bit_depth(),
        byte_order: ByteOrder::LittleEndian,
        band_labels: cube.band_labels().map(<[String]>::to_vec),
    };
    let mut bytes = Vec::with_capacity(descriptor.byte_len().unwrap_or(0));
    for band in cube.bands() {
        match cube.bit_depth() {
            BitDepth::Eight => bytes.extend(band.samples().iter().map(|&s| s as u8)),
            BitDepth::Sixteen => {
                for &s in band.samples() {
                    bytes.extend_from_slice(&s.to_le_bytes());
                }
            }
        }
    }
    (bytes, descriptor)
}

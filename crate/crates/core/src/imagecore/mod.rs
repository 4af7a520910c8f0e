//! Raster and spectral-cube data model, file I/O and size accounting.
//!
//! Every coder and metric in the crate works on [`RasterImage`], a
//! single-channel row-major raster of 8- or 16-bit samples. Multichannel
//! data is a [`SpectralCube`] of equally shaped bands.

mod container;
mod pgm;
mod raw;

pub use container::{BackendId, CompressedBlob, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use pgm::{load_pgm, store_pgm};
pub use raw::{cube_to_raw, raw_io, ByteOrder, RawDescriptor};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("unsupported bit depth {0}")]
    UnsupportedBitDepth(u32),
    #[error("expected {expected} samples, got {actual}")]
    SampleCount { expected: usize, actual: usize },
    #[error("sample {value} at index {index} exceeds {max} for the bit depth")]
    SampleOutOfRange { index: usize, value: u32, max: u32 },
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("size mismatch: descriptor needs {expected} bytes, buffer has {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("band {index} is {found}, cube bands are {expected}")]
    BandShape {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("a cube needs at least one band")]
    EmptyCube,
    #[error("{labels} band labels for {bands} bands")]
    LabelCount { labels: usize, bands: usize },
    #[error("invalid RAW descriptor: {0}")]
    Descriptor(String),
    #[error("corrupt container: {0}")]
    Container(String),
    #[error("compressed blob is {blob} but image is {image}")]
    BlobMismatch { blob: String, image: String },
    #[error("compressed blob is empty")]
    EmptyPayload,
}

/// Sample precision of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        self.bits() as usize / 8
    }

    /// Largest representable sample, `2^bits - 1`.
    pub fn max_value(self) -> u32 {
        (1u32 << self.bits()) - 1
    }

    pub fn from_bits(bits: u32) -> Result<Self, ImageError> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(ImageError::UnsupportedBitDepth(other)),
        }
    }
}

impl TryFrom<u32> for BitDepth {
    type Error = ImageError;

    fn try_from(bits: u32) -> Result<Self, Self::Error> {
        BitDepth::from_bits(bits)
    }
}

impl From<BitDepth> for u32 {
    fn from(depth: BitDepth) -> u32 {
        depth.bits()
    }
}

impl fmt::Display for BitDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-bit", self.bits())
    }
}

/// Single-channel raster, row-major.
///
/// Immutable once built; the constructor enforces the sample count and the
/// per-sample range for the bit depth.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    bit_depth: BitDepth,
    samples: Vec<u16>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        samples: Vec<u16>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or(ImageError::InvalidDimensions { width, height })?;
        if samples.len() != expected {
            return Err(ImageError::SampleCount {
                expected,
                actual: samples.len(),
            });
        }
        let max = bit_depth.max_value();
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, &s)| u32::from(s) > max)
        {
            return Err(ImageError::SampleOutOfRange {
                index,
                value: value.into(),
                max,
            });
        }
        Ok(RasterImage {
            width,
            height,
            bit_depth,
            samples,
        })
    }

    /// Image with every sample set to `value` (clamped to the bit depth).
    pub fn filled(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        value: u16,
    ) -> Result<Self, ImageError> {
        let value = u32::from(value).min(bit_depth.max_value()) as u16;
        RasterImage::new(width, height, bit_depth, vec![value; width * height])
    }

    /// Builds an image from real values, rounding and clamping each one.
    pub fn from_f64(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        values: &[f64],
    ) -> Result<Self, ImageError> {
        let max = f64::from(bit_depth.max_value());
        let samples = values
            .iter()
            .map(|v| v.round().clamp(0.0, max) as u16)
            .collect();
        RasterImage::new(width, height, bit_depth, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u16> {
        self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.samples[y * self.width + x]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Size of the samples alone, without any file header.
    pub fn raw_byte_len(&self) -> usize {
        self.pixel_count() * self.bit_depth.bytes_per_sample()
    }

    pub fn max_sample(&self) -> u16 {
        self.samples.iter().copied().max().unwrap_or(0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bit_depth == other.bit_depth
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{} {}", self.width, self.height, self.bit_depth)
    }
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bit_depth", &self.bit_depth)
            .finish_non_exhaustive()
    }
}

/// Ordered stack of equally shaped bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    bands: Vec<RasterImage>,
    band_labels: Option<Vec<String>>,
}

impl SpectralCube {
    pub fn new(
        bands: Vec<RasterImage>,
        band_labels: Option<Vec<String>>,
    ) -> Result<Self, ImageError> {
        let first = bands.first().ok_or(ImageError::EmptyCube)?;
        for (index, band) in bands.iter().enumerate().skip(1) {
            if !band.same_shape(first) {
                return Err(ImageError::BandShape {
                    index,
                    expected: first.shape_string(),
                    found: band.shape_string(),
                });
            }
        }
        if let Some(labels) = &band_labels {
            if labels.len() != bands.len() {
                return Err(ImageError::LabelCount {
                    labels: labels.len(),
                    bands: bands.len(),
                });
            }
        }
        Ok(SpectralCube { bands, band_labels })
    }

    pub fn bands(&self) -> &[RasterImage] {
        &self.bands
    }

    pub fn band_labels(&self) -> Option<&[String]> {
        self.band_labels.as_deref()
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bands[0].bit_depth()
    }
}

fn check_blob(image: &RasterImage, blob: &CompressedBlob) -> Result<(), ImageError> {
    if blob.width != image.width() || blob.height != image.height() || blob.bit_depth != image.bit_depth() {
        return Err(ImageError::BlobMismatch {
            blob: format!("{}x{} {}", blob.width, blob.height, blob.bit_depth),
            image: image.shape_string(),
        });
    }
    Ok(())
}

/// Uncompressed sample bytes over stored container bytes.
///
/// The denominator is the full serialized container (header included), i.e.
/// what the blob occupies on disk.
pub fn compression_ratio(image: &RasterImage, blob: &CompressedBlob) -> Result<f64, ImageError> {
    check_blob(image, blob)?;
    if blob.payload.is_empty() {
        return Err(ImageError::EmptyPayload);
    }
    Ok(image.raw_byte_len() as f64 / blob.stored_len() as f64)
}

/// Stored container bits per pixel. `bits_per_pixel * compression_ratio`
/// equals the bit depth.
pub fn bits_per_pixel(image: &RasterImage, blob: &CompressedBlob) -> Result<f64, ImageError> {
    check_blob(image, blob)?;
    Ok(8.0 * blob.stored_len() as f64 / image.pixel_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{ControlParameter, ParamKind};

    fn blob_with_stored_len(width: usize, height: usize, stored: usize) -> CompressedBlob {
        let mut blob = CompressedBlob {
            codec_id: "test".into(),
            param: ControlParameter::new(ParamKind::QuantizationStep, 1.0).unwrap(),
            width,
            height,
            bit_depth: BitDepth::Eight,
            backend: BackendId::Opaque,
            payload: Vec::new(),
        };
        let header = blob.header_len();
        blob.payload = vec![0; stored - header];
        blob
    }

    #[test]
    fn rejects_bad_sample_count_and_range() {
        assert!(matches!(
            RasterImage::new(2, 2, BitDepth::Eight, vec![0; 3]),
            Err(ImageError::SampleCount { .. })
        ));
        assert!(matches!(
            RasterImage::new(1, 1, BitDepth::Eight, vec![256]),
            Err(ImageError::SampleOutOfRange { .. })
        ));
        assert!(RasterImage::new(1, 1, BitDepth::Sixteen, vec![65535]).is_ok());
        assert!(RasterImage::new(0, 1, BitDepth::Eight, vec![]).is_err());
    }

    #[test]
    fn cube_rejects_mixed_shapes_at_construction() {
        let a = RasterImage::filled(4, 4, BitDepth::Eight, 1).unwrap();
        let b = RasterImage::filled(4, 3, BitDepth::Eight, 1).unwrap();
        let c = RasterImage::filled(4, 4, BitDepth::Sixteen, 1).unwrap();
        assert!(matches!(
            SpectralCube::new(vec![a.clone(), b], None),
            Err(ImageError::BandShape { index: 1, .. })
        ));
        assert!(SpectralCube::new(vec![a.clone(), c], None).is_err());
        assert_eq!(SpectralCube::new(vec![], None), Err(ImageError::EmptyCube));
        assert!(SpectralCube::new(vec![a], Some(vec!["x".into(), "y".into()])).is_err());
    }

    #[test]
    fn compression_ratio_arithmetic() {
        let image = RasterImage::filled(512, 512, BitDepth::Eight, 0).unwrap();
        let blob = blob_with_stored_len(512, 512, 26214);
        let cr = compression_ratio(&image, &blob).unwrap();
        assert!((cr - 262144.0 / 26214.0).abs() < 1e-12);
        assert!((cr - 10.0002).abs() < 1e-4);

        let blob = blob_with_stored_len(512, 512, 262144);
        assert_eq!(compression_ratio(&image, &blob).unwrap(), 1.0);
        assert_eq!(bits_per_pixel(&image, &blob).unwrap(), 8.0);

        // magnitude of the AVIRIS sub-band example
        let blob = blob_with_stored_len(512, 512, 20739);
        let cr = compression_ratio(&image, &blob).unwrap();
        assert!((cr - 12.64).abs() < 0.005, "{cr}");

        let blob = blob_with_stored_len(512, 512, 32768);
        assert_eq!(bits_per_pixel(&image, &blob).unwrap(), 1.0);
    }

    #[test]
    fn cr_rejects_mismatched_or_empty_blob() {
        let image = RasterImage::filled(8, 8, BitDepth::Eight, 0).unwrap();
        let blob = blob_with_stored_len(8, 4, 100);
        assert!(matches!(
            compression_ratio(&image, &blob),
            Err(ImageError::BlobMismatch { .. })
        ));
        let mut blob = blob_with_stored_len(8, 8, 100);
        blob.payload.clear();
        assert_eq!(compression_ratio(&image, &blob), Err(ImageError::EmptyPayload));
    }

    proptest::proptest! {
        #[test]
        fn bpp_times_cr_is_bit_depth(
            w in 1usize..600,
            h in 1usize..600,
            extra in 1usize..100_000,
            sixteen in proptest::bool::ANY,
        ) {
            let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
            let image = RasterImage::filled(w, h, depth, 0).unwrap();
            let mut blob = blob_with_stored_len(w, h, 64);
            blob.bit_depth = depth;
            blob.payload = vec![1; extra];
            let cr = compression_ratio(&image, &blob).unwrap();
            let bpp = bits_per_pixel(&image, &blob).unwrap();
            let bits = f64::from(depth.bits());
            proptest::prop_assert!(cr > 0.0 && bpp > 0.0);
            proptest::prop_assert!(((bpp * cr) - bits).abs() <= 1e-12 * bits);
        }
    }
}

//! Built-in block-DCT coder.
//!
//! Samples are level-shifted, padded to a block multiple by edge
//! replication, transformed with an orthonormal 2-D DCT and quantized with a
//! uniform mid-tread quantizer `q = round(c / (step · w))`. The step is the
//! control parameter expressed on the 8-bit scale, i.e. multiplied by
//! `2^(bit_depth - 8)` for deeper images. `w` is 1 for the plain coder and
//! the CSF table for the weighted one.
//!
//! Payload: one byte `log2(block_size)` followed by the entropy-coded
//! coefficient stream.

use super::{check_blob_codec, check_kind, csf_weight_table, entropy, Codec, CodecDescriptor, CodecError};
use super::{ControlParameter, ParamKind, ParameterRange, QualityDirection};
use crate::imagecore::{BackendId, BitDepth, CompressedBlob, RasterImage};
use crate::transform::{zigzag_order, BlockDct};

pub const DEFAULT_BLOCK_SIZE: usize = 16;

const MAX_STEP: f64 = 1.0e6;

#[derive(Debug, Clone)]
pub struct DctCodec {
    descriptor: CodecDescriptor,
    block_size: usize,
    weighted: bool,
    backend: BackendId,
}

struct Plan {
    n: usize,
    dct: BlockDct,
    zigzag: Vec<usize>,
    weights: Vec<f64>,
}

impl DctCodec {
    pub fn plain(block_size: usize) -> Result<Self, CodecError> {
        DctCodec::new("dct", block_size, false)
    }

    /// Coder that coarsens high spatial frequencies following the CSF.
    pub fn csf_weighted(block_size: usize) -> Result<Self, CodecError> {
        DctCodec::new("dct-csf", block_size, true)
    }

    fn new(id: &str, block_size: usize, weighted: bool) -> Result<Self, CodecError> {
        // validates the size for both variants
        csf_weight_table(block_size)?;
        Ok(DctCodec {
            descriptor: CodecDescriptor {
                codec_id: id.to_string(),
                param_kind: ParamKind::QuantizationStep,
                default_range: ParameterRange::new(ParamKind::QuantizationStep, 1.0, 64.0)?,
                quality_direction: QualityDirection::MetricDecreasesWithParam,
            },
            block_size,
            weighted,
            backend: BackendId::Range,
        })
    }

    /// Selects the lossless backend used for new blobs.
    pub fn with_backend(mut self, backend: BackendId) -> Self {
        assert!(backend != BackendId::Opaque, "the DCT coder needs a coefficient backend");
        self.backend = backend;
        self
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    fn plan(&self, n: usize) -> Result<Plan, CodecError> {
        let weights = if self.weighted {
            csf_weight_table(n)?
        } else {
            vec![1.0; n * n]
        };
        Ok(Plan {
            n,
            dct: BlockDct::new(n),
            zigzag: zigzag_order(n),
            weights,
        })
    }
}

fn depth_scale(depth: BitDepth) -> f64 {
    f64::from(1u32 << (depth.bits() - 8))
}

fn blocks_along(len: usize, n: usize) -> usize {
    len.div_ceil(n)
}

impl Codec for DctCodec {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.descriptor
    }

    fn compress(&self, image: &RasterImage, param: ControlParameter) -> Result<CompressedBlob, CodecError> {
        check_kind(self, param)?;
        if param.value() > MAX_STEP {
            return Err(CodecError::ParamOutOfDomain {
                value: param.value(),
                domain: format!("(0, {MAX_STEP}]"),
            });
        }
        let plan = self.plan(self.block_size)?;
        let n = plan.n;
        let (w, h) = (image.width(), image.height());
        let (bx, by) = (blocks_along(w, n), blocks_along(h, n));
        let step = param.value() * depth_scale(image.bit_depth());
        let offset = f64::from(1u32 << (image.bit_depth().bits() - 1));
        let samples = image.samples();

        let mut block = vec![0.0; n * n];
        let mut coeffs = vec![0.0; n * n];
        let mut scratch = vec![0.0; n * n];
        let mut levels = Vec::with_capacity(bx * by * n * n);
        for byi in 0..by {
            for bxi in 0..bx {
                for y in 0..n {
                    let sy = (byi * n + y).min(h - 1);
                    for x in 0..n {
                        let sx = (bxi * n + x).min(w - 1);
                        block[y * n + x] = f64::from(samples[sy * w + sx]) - offset;
                    }
                }
                plan.dct.forward(&block, &mut coeffs, &mut scratch);
                levels.extend(
                    plan.zigzag
                        .iter()
                        .map(|&k| (coeffs[k] / (step * plan.weights[k])).round() as i32),
                );
            }
        }

        let mut payload = vec![n.trailing_zeros() as u8];
        payload.extend(entropy::encode(&levels, n * n, self.backend));
        Ok(CompressedBlob {
            codec_id: self.descriptor.codec_id.clone(),
            param,
            width: w,
            height: h,
            bit_depth: image.bit_depth(),
            backend: self.backend,
            payload,
        })
    }

    fn decompress(&self, blob: &CompressedBlob) -> Result<RasterImage, CodecError> {
        check_blob_codec(self, blob)?;
        let (&log2n, stream) = blob
            .payload
            .split_first()
            .ok_or_else(|| CodecError::CorruptPayload("empty payload".into()))?;
        let n = 1usize
            .checked_shl(u32::from(log2n))
            .filter(|n| super::SUPPORTED_BLOCK_SIZES.contains(n))
            .ok_or_else(|| CodecError::CorruptPayload(format!("bad block size code {log2n}")))?;
        let plan = self.plan(n)?;
        let (w, h) = (blob.width, blob.height);
        let (bx, by) = (blocks_along(w, n), blocks_along(h, n));
        let levels = entropy::decode(stream, bx * by, n * n, blob.backend)
            .map_err(|e| CodecError::CorruptPayload(e.0))?;

        let step = blob.param.value() * depth_scale(blob.bit_depth);
        let offset = f64::from(1u32 << (blob.bit_depth.bits() - 1));
        let max = f64::from(blob.bit_depth.max_value());
        let mut out = vec![0u16; w * h];
        let mut coeffs = vec![0.0; n * n];
        let mut block = vec![0.0; n * n];
        let mut scratch = vec![0.0; n * n];
        for (bi, chunk) in levels.chunks_exact(n * n).enumerate() {
            let (bxi, byi) = (bi % bx, bi / bx);
            for (&k, &q) in plan.zigzag.iter().zip(chunk) {
                coeffs[k] = f64::from(q) * step * plan.weights[k];
            }
            plan.dct.inverse(&coeffs, &mut block, &mut scratch);
            for y in 0..n {
                let sy = byi * n + y;
                if sy >= h {
                    break;
                }
                for x in 0..n {
                    let sx = bxi * n + x;
                    if sx >= w {
                        break;
                    }
                    out[sy * w + sx] = (block[y * n + x] + offset).round().clamp(0.0, max) as u16;
                }
            }
        }
        Ok(RasterImage::new(w, h, blob.bit_depth, out)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::BitDepth;
    use crate::metrics::psnr;
    use crate::synthetic;

    fn qs(v: f64) -> ControlParameter {
        ControlParameter::new(ParamKind::QuantizationStep, v).unwrap()
    }

    #[test]
    fn constant_image_is_exact() {
        let img = RasterImage::filled(37, 21, BitDepth::Eight, 128).unwrap();
        for codec in [DctCodec::plain(16).unwrap(), DctCodec::csf_weighted(16).unwrap()] {
            for step in [1.0, 7.5, 64.0] {
                let blob = codec.compress(&img, qs(step)).unwrap();
                assert_eq!(codec.decompress(&blob).unwrap(), img);
            }
        }
    }

    #[test]
    fn deterministic_and_header_preserving() {
        let img = synthetic::textured(45, 70, BitDepth::Eight, 3);
        let codec = DctCodec::plain(16).unwrap();
        let a = codec.compress(&img, qs(9.0)).unwrap();
        let b = codec.compress(&img, qs(9.0)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let out = codec.decompress(&a).unwrap();
        assert_eq!((out.width(), out.height(), out.bit_depth()), (45, 70, BitDepth::Eight));
    }

    #[test]
    fn fine_step_is_near_lossless() {
        let img = synthetic::textured(128, 96, BitDepth::Eight, 11);
        let codec = DctCodec::plain(16).unwrap();
        let out = codec.decompress(&codec.compress(&img, qs(1.0)).unwrap()).unwrap();
        assert!(psnr(&img, &out).unwrap() >= 50.0);
    }

    #[test]
    fn sixteen_bit_round_trip() {
        let img = synthetic::textured(64, 64, BitDepth::Sixteen, 5);
        let codec = DctCodec::plain(16).unwrap();
        let out = codec.decompress(&codec.compress(&img, qs(1.0)).unwrap()).unwrap();
        assert_eq!(out.bit_depth(), BitDepth::Sixteen);
        assert!(psnr(&img, &out).unwrap() > 50.0);
    }

    #[test]
    fn errors_never_panic() {
        let img = synthetic::textured(40, 40, BitDepth::Eight, 2);
        let codec = DctCodec::plain(16).unwrap();
        let blob = codec.compress(&img, qs(4.0)).unwrap();
        for cut in [0, 1, blob.payload.len() / 2, blob.payload.len() - 1] {
            let mut broken = blob.clone();
            broken.payload.truncate(cut);
            assert!(matches!(codec.decompress(&broken), Err(CodecError::CorruptPayload(_))));
        }
        let mut other = blob.clone();
        other.codec_id = "dct-csf".into();
        assert!(matches!(codec.decompress(&other), Err(CodecError::CodecMismatch { .. })));
        let bpp = ControlParameter::new(ParamKind::BitsPerPixel, 1.0).unwrap();
        assert!(matches!(codec.compress(&img, bpp), Err(CodecError::ParamKindMismatch { .. })));
        assert!(matches!(codec.compress(&img, qs(2e6)), Err(CodecError::ParamOutOfDomain { .. })));
    }

    #[test]
    fn decodes_other_block_sizes_and_backends() {
        let img = synthetic::textured(50, 33, BitDepth::Eight, 8);
        let small = DctCodec::plain(8).unwrap().with_backend(BackendId::Deflate);
        let blob = small.compress(&img, qs(3.0)).unwrap();
        assert_eq!(blob.backend, BackendId::Deflate);
        // a 16x16 instance reads the block size and backend from the blob
        let reader = DctCodec::plain(16).unwrap();
        assert_eq!(reader.decompress(&blob).unwrap(), small.decompress(&blob).unwrap());
    }

    #[test]
    fn scaling_factor_is_a_synonym() {
        let img = synthetic::textured(32, 32, BitDepth::Eight, 4);
        let codec = DctCodec::plain(16).unwrap();
        let sf = ControlParameter::new(ParamKind::ScalingFactor, 6.0).unwrap();
        let a = codec.compress(&img, sf).unwrap();
        let b = codec.compress(&img, qs(6.0)).unwrap();
        assert_eq!(a.payload, b.payload);
    }
}

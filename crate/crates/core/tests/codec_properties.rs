mod common;

use proptest::prelude::*;
use qpress::codecs::{resolve, Codec, ControlParameter, DctCodec, ParamKind};
use qpress::imagecore::{BitDepth, CompressedBlob, RasterImage};
use qpress::metrics;
use qpress::synthetic;

const GRID: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

fn qs(v: f64) -> ControlParameter {
    ControlParameter::new(ParamKind::QuantizationStep, v).unwrap()
}

fn round_trip(codec: &dyn Codec, image: &RasterImage, step: f64) -> RasterImage {
    codec.decompress(&codec.compress(image, qs(step)).unwrap()).unwrap()
}

#[test]
fn psnr_is_nonincreasing_over_the_qs_grid() {
    for codec_id in ["dct", "dct-csf", "dct@8"] {
        let codec = resolve(codec_id).unwrap();
        for (name, image) in common::natural() {
            let values: Vec<f64> = GRID
                .iter()
                .map(|&s| metrics::psnr(&image, &round_trip(codec.as_ref(), &image, s)).unwrap())
                .collect();
            for w in values.windows(2) {
                assert!(w[1] <= w[0] + 0.2, "{codec_id} {name}: {values:?}");
            }
        }
    }
}

#[test]
fn max_error_is_bounded_by_step_times_block() {
    let codec = DctCodec::plain(16).unwrap();
    for (name, image) in common::corpus() {
        for &s in &GRID {
            let err = metrics::max_abs_error(&image, &round_trip(&codec, &image, s)).unwrap();
            assert!(f64::from(err) <= s * 16.0, "{name} qs {s}: max error {err}");
        }
    }
}

#[test]
fn endpoints_on_a_natural_image() {
    let codec = DctCodec::plain(16).unwrap();
    let camera = common::load("camera.pgm");
    assert!(metrics::psnr(&camera, &round_trip(&codec, &camera, 1.0)).unwrap() >= 50.0);
    assert!(metrics::psnr(&camera, &round_trip(&codec, &camera, 64.0)).unwrap() <= 35.0);
}

#[test]
fn csf_table_shape() {
    for n in qpress::codecs::SUPPORTED_BLOCK_SIZES {
        let w = qpress::codecs::csf_weight_table(n).unwrap();
        assert_eq!(w[0], 1.0);
        for k in 0..n {
            for l in 0..n {
                assert!(w[k * n + l] >= 1.0);
                if l + 1 < n {
                    assert!(w[k * n + l + 1] >= w[k * n + l]);
                }
                if k + 1 < n {
                    assert!(w[(k + 1) * n + l] >= w[k * n + l]);
                }
            }
        }
    }
    assert!(qpress::codecs::csf_weight_table(12).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn header_and_determinism(
        w in 1usize..70,
        h in 1usize..70,
        sixteen in any::<bool>(),
        seed in 0u64..1000,
        step in 0.5f64..64.0,
        csf in any::<bool>(),
    ) {
        let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
        let image = synthetic::textured(w, h, depth, seed);
        let codec = if csf { DctCodec::csf_weighted(8).unwrap() } else { DctCodec::plain(8).unwrap() };
        let a = codec.compress(&image, qs(step)).unwrap();
        let b = codec.compress(&image, qs(step)).unwrap();
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
        let parsed = CompressedBlob::from_bytes(&a.to_bytes()).unwrap();
        let decoded = codec.decompress(&parsed).unwrap();
        prop_assert_eq!((decoded.width(), decoded.height(), decoded.bit_depth()), (w, h, depth));
    }

    #[test]
    fn constant_images_stay_constant(level in 0u16..=255, step in 1.0f64..64.0) {
        let codec = DctCodec::plain(16).unwrap();
        let mid = RasterImage::filled(40, 24, BitDepth::Eight, 128).unwrap();
        prop_assert_eq!(round_trip(&codec, &mid, step), mid);
        let image = RasterImage::filled(40, 24, BitDepth::Eight, level).unwrap();
        let out = round_trip(&codec, &image, step);
        let first = out.samples()[0];
        prop_assert!(out.samples().iter().all(|&s| s == first));
        // only the DC term survives; its error is at most half a step over n
        prop_assert!(f64::from(first.abs_diff(level)) <= step / 32.0 + 0.5);
    }

    #[test]
    fn truncated_blobs_error_without_panicking(cut in 0usize..400, seed in 0u64..50) {
        let image = synthetic::textured(32, 32, BitDepth::Eight, seed);
        let codec = DctCodec::plain(16).unwrap();
        let bytes = codec.compress(&image, qs(4.0)).unwrap().to_bytes();
        let cut = cut.min(bytes.len() - 1);
        match CompressedBlob::from_bytes(&bytes[..cut]) {
            Err(_) => {}
            Ok(blob) => prop_assert!(codec.decompress(&blob).is_err()),
        }
    }
}

use super::*;
use crate::codecs::{DctCodec, ParamKind};
use crate::metrics::{metric_registry, psnr, MetricDescriptor, MetricId};
use crate::search::{ReportStatus, SearchStatus};
use crate::synthetic;

fn psnr_target(value: f64) -> QualityTarget {
    QualityTarget::new(&MetricDescriptor::builtin(MetricId::Psnr), value, Some(0.1)).unwrap()
}

fn qs_range() -> ParameterRange {
    ParameterRange::new(ParamKind::QuantizationStep, 1.0, 64.0).unwrap()
}

/// Step of the inverse map around `x`, halved, plus the final rounding.
fn round_trip_bound(t: &HomomorphicTransform, x: f64) -> f64 {
    0.5 * (x + 1.0) / t.scale * (0.5 / t.scale).exp() + 0.5
}

#[test]
fn zero_is_fixed_and_max_hits_full_scale() {
    let t = HomomorphicTransform::new(65535.0, BitDepth::Sixteen).unwrap();
    assert_eq!(t.forward_sample(0.0), 0.0);
    assert_eq!(t.inverse_sample(0.0), 0.0);
    assert_eq!(t.forward_sample(65535.0), 65535.0);
    assert_eq!(t.inverse_sample(65535.0), 65535.0);
    assert!((t.scale - 65535.0 / 65536f64.ln()).abs() < 1e-9);
}

#[test]
fn fit_uses_band_maximum() {
    let band = RasterImage::new(2, 2, BitDepth::Sixteen, vec![0, 10, 400, 1000]).unwrap();
    let t = HomomorphicTransform::fit(&band);
    assert_eq!(t.input_max, 1000.0);
    let y = t.forward(&band).unwrap();
    assert_eq!(y.max_sample(), 65535);
    let zeros = RasterImage::filled(2, 2, BitDepth::Eight, 0).unwrap();
    assert_eq!(HomomorphicTransform::fit(&zeros).input_max, 1.0);
}

#[test]
fn forward_rejects_samples_above_input_max() {
    let t = HomomorphicTransform::new(100.0, BitDepth::Sixteen).unwrap();
    let band = RasterImage::new(2, 1, BitDepth::Sixteen, vec![5, 101]).unwrap();
    assert!(matches!(t.forward(&band), Err(SearchError::Domain(_))));
    assert!(HomomorphicTransform::new(0.5, BitDepth::Eight).is_err());
    assert!(HomomorphicTransform::new(300.0, BitDepth::Eight).is_err());
}

#[test]
fn round_trip_error_follows_local_step_16bit() {
    let t = HomomorphicTransform::new(65535.0, BitDepth::Sixteen).unwrap();
    for x in 0..=65535u32 {
        let x = f64::from(x);
        let back = t.inverse_sample(t.forward_sample(x));
        assert!((back - x).abs() <= round_trip_bound(&t, x), "x={x} back={back}");
    }
    // exact wherever the forward map expands (slope >= 1)
    for x in 0..(t.scale as u32 - 1) {
        let x = f64::from(x);
        assert_eq!(t.inverse_sample(t.forward_sample(x)), x);
    }
}

#[test]
fn round_trip_error_follows_local_step_8bit() {
    let t = HomomorphicTransform::new(255.0, BitDepth::Eight).unwrap();
    for x in 0..=255u32 {
        let x = f64::from(x);
        let back = t.inverse_sample(t.forward_sample(x));
        assert!((back - x).abs() <= round_trip_bound(&t, x), "x={x} back={back}");
    }
}

#[test]
fn transform_serializes() {
    let t = HomomorphicTransform::new(1234.0, BitDepth::Sixteen).unwrap();
    let json = serde_json::to_string(&t).unwrap();
    assert!(json.contains("log1p_scaled"));
    assert_eq!(serde_json::from_str::<HomomorphicTransform>(&json).unwrap(), t);
}

#[test]
fn single_band_cube_matches_plain_search() {
    let cube = synthetic::spectral_cube(1, 64, 64, 3);
    let codec = DctCodec::plain(16).unwrap();
    let metric = metric_registry("psnr").unwrap();
    let out = compress_cube(&cube, &codec, metric.as_ref(), &psnr_target(40.0), qs_range(), &CubeSettings::default())
        .unwrap();
    let plain = Search::new(&codec, metric.as_ref(), psnr_target(40.0), qs_range())
        .run(&cube.bands()[0])
        .unwrap();
    let band = &out.per_band[0];
    assert_eq!(band.result.history, plain.history);
    assert_eq!(band.result.blob, plain.blob);
    assert_eq!(band.result.decoded, plain.decoded);
    assert_eq!(band.label, "band00");
}

#[test]
fn bands_are_independent_and_ordered() {
    let cube = synthetic::spectral_cube(4, 48, 48, 9);
    let mut reversed: Vec<RasterImage> = cube.bands().to_vec();
    reversed.reverse();
    let reversed = SpectralCube::new(reversed, None).unwrap();
    let codec = DctCodec::plain(16).unwrap();
    let metric = metric_registry("psnr").unwrap();
    let settings = CubeSettings::default();
    let a = compress_cube(&cube, &codec, metric.as_ref(), &psnr_target(40.0), qs_range(), &settings).unwrap();
    let b = compress_cube(&reversed, &codec, metric.as_ref(), &psnr_target(40.0), qs_range(), &settings).unwrap();
    for (i, band) in a.per_band.iter().enumerate() {
        let other = &b.per_band[3 - i];
        assert_eq!(band.index, i);
        assert_eq!(band.result.blob, other.result.blob);
        assert_eq!(band.result.history, other.result.history);
    }
    assert_eq!(a.total_iterations, b.total_iterations);
    assert!((a.aggregate_cr - b.aggregate_cr).abs() < 1e-12);
}

#[test]
fn aggregate_cr_is_recomputable_from_blobs() {
    let cube = synthetic::spectral_cube(3, 48, 48, 5);
    let codec = DctCodec::plain(16).unwrap();
    let metric = metric_registry("psnr").unwrap();
    let out = compress_cube(&cube, &codec, metric.as_ref(), &psnr_target(42.0), qs_range(), &CubeSettings::default())
        .unwrap();
    let raw: usize = cube.bands().iter().map(|b| b.raw_byte_len()).sum();
    let stored: usize = out.per_band.iter().map(|b| b.result.blob.to_bytes().len()).sum();
    assert_eq!(out.aggregate_cr, raw as f64 / stored as f64);
    let manifest = out.manifest();
    assert!(manifest.complete);
    assert_eq!((manifest.raw_bytes, manifest.stored_bytes), (raw, stored));
    assert_eq!(CubeManifest::from_json(&manifest.to_json()).unwrap(), manifest);
}

#[test]
fn homomorphic_quality_is_measured_in_original_domain() {
    let cube = synthetic::spectral_cube(3, 64, 64, 11);
    let codec = DctCodec::plain(16).unwrap();
    let metric = metric_registry("psnr").unwrap();
    let settings = CubeSettings {
        homomorphic: true,
        ..CubeSettings::default()
    };
    let range = ParameterRange::new(ParamKind::QuantizationStep, 0.05, 64.0).unwrap();
    let out = compress_cube(&cube, &codec, metric.as_ref(), &psnr_target(40.0), range, &settings).unwrap();
    for (band, original) in out.per_band.iter().zip(cube.bands()) {
        let t = band.transform.expect("homomorphic run records its transform");
        let decoded = decode_band(&codec, &band.result.blob, Some(&t)).unwrap();
        assert_eq!(decoded, band.result.decoded);
        let measured = psnr(original, &decoded).unwrap();
        assert_eq!(measured, band.result.achieved_value.value);
        assert_eq!(band.result.status, SearchStatus::Converged);
        assert!((measured - 40.0).abs() <= 0.1);
    }
}

#[test]
fn failing_band_aborts_with_partials() {
    let mut bands = synthetic::spectral_cube(3, 48, 48, 2).bands().to_vec();
    bands[1] = RasterImage::filled(48, 48, BitDepth::Sixteen, 7000).unwrap();
    let cube = SpectralCube::new(bands, None).unwrap();
    let codec = DctCodec::plain(16).unwrap();
    let metric = metric_registry("psnr").unwrap();
    let err = compress_cube(&cube, &codec, metric.as_ref(), &psnr_target(40.0), qs_range(), &CubeSettings::default())
        .unwrap_err();
    assert_eq!(err.band_count, 3);
    assert_eq!(err.completed.iter().map(|b| b.index).collect::<Vec<_>>(), vec![0, 2]);
    assert_eq!(err.failed.len(), 1);
    assert_eq!(err.failed[0].index, 1);
    assert!(matches!(err.failed[0].error, SearchError::Infeasible { .. }));
    assert!(err.to_string().contains("band 1"), "{err}");
    let manifest = err.manifest();
    assert!(!manifest.complete);
    assert_eq!(manifest.aggregate_cr, None);
    assert_eq!(manifest.bands[1].blob_file, None);
    assert_eq!(manifest.bands[1].report.status, ReportStatus::Infeasible);
    assert_eq!(manifest.bands[2].blob_file.as_deref(), Some("band_002.qprs"));
}

#[test]
fn clamping_keeps_flat_band_in_the_cube() {
    let mut bands = synthetic::spectral_cube(2, 48, 48, 2).bands().to_vec();
    bands[0] = RasterImage::filled(48, 48, BitDepth::Sixteen, 7000).unwrap();
    let cube = SpectralCube::new(bands, None).unwrap();
    let codec = DctCodec::plain(16).unwrap();
    let metric = metric_registry("psnr").unwrap();
    let settings = CubeSettings {
        clamp: true,
        ..CubeSettings::default()
    };
    let out = compress_cube(&cube, &codec, metric.as_ref(), &psnr_target(40.0), qs_range(), &settings).unwrap();
    assert_eq!(out.per_band.len(), 2);
    assert_eq!(out.per_band[1].result.status, SearchStatus::Converged);
}

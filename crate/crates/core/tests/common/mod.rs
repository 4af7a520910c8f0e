#![allow(dead_code)]

use qpress::codecs::{ParamKind, ParameterRange};
use qpress::imagecore::{load_pgm, BitDepth, RasterImage};
use qpress::metrics::{self, MetricDescriptor, MetricId};
use qpress::synthetic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn load(name: &str) -> RasterImage {
    let path = data_path(name);
    let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_pgm(&bytes).unwrap()
}

pub const NATURAL: [&str; 3] = ["camera", "moon", "astronaut"];

pub fn natural() -> Vec<(String, RasterImage)> {
    NATURAL.iter().map(|n| (n.to_string(), load(&format!("{n}.pgm")))).collect()
}

/// Three 512×512 natural images plus two seeded synthetic ones.
pub fn corpus() -> Vec<(String, RasterImage)> {
    let mut all = natural();
    all.push(("synthetic_textured".into(), synthetic::textured(384, 384, BitDepth::Eight, 17)));
    all.push(("synthetic_gradient".into(), synthetic::gradient(320, 256, BitDepth::Eight, 3.0, 5)));
    all
}

/// QS range wide enough that every corpus image reaches 30 dB PSNR.
pub fn wide_range() -> ParameterRange {
    ParameterRange::new(ParamKind::QuantizationStep, 1.0, 512.0).unwrap()
}

pub type ReferenceRow = (&'static str, &'static str, [(MetricId, f64); 5]);

/// Frozen values from the reference implementations (see tests/oracle).
pub const REFERENCE_VALUES: [ReferenceRow; 3] = [
    (
        "camera.pgm",
        "camera_noise5.pgm",
        [
            (MetricId::Ssim, 0.832598173484),
            (MetricId::Msssim, 0.974105272166),
            (MetricId::Wsnr, 42.424376394332),
            (MetricId::PsnrHvs, 34.186461864414),
            (MetricId::PsnrHvsM, 37.896437890350),
        ],
    ),
    (
        "moon.pgm",
        "moon_blur3.pgm",
        [
            (MetricId::Ssim, 0.965312761238),
            (MetricId::Msssim, 0.990888070428),
            (MetricId::Wsnr, 45.542538019598),
            (MetricId::PsnrHvs, 39.282512605465),
            (MetricId::PsnrHvsM, 42.256277929440),
        ],
    ),
    (
        "astronaut.pgm",
        "astronaut_jpeg25.pgm",
        [
            (MetricId::Ssim, 0.922787905199),
            (MetricId::Msssim, 0.988008257176),
            (MetricId::Wsnr, 38.687074115859),
            (MetricId::PsnrHvs, 32.105544855028),
            (MetricId::PsnrHvsM, 37.483324182662),
        ],
    ),
];

/// Textbook PSNR from a plain per-pixel loop.
pub fn brute_force_psnr(a: &RasterImage, b: &RasterImage) -> f64 {
    let peak = f64::from(a.bit_depth().max_value());
    let mut sse = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let d = f64::from(a.get(x, y)) - f64::from(b.get(x, y));
            sse += d * d;
        }
    }
    if sse == 0.0 {
        return 100.0;
    }
    let mse = sse / (a.width() * a.height()) as f64;
    (10.0 * (peak * peak / mse).log10()).clamp(0.0, 100.0)
}

/// Largest |psnr - brute force| over `pairs` random pairs.
pub fn psnr_oracle_max_error(pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let (w, h) = (rng.gen_range(1..64), rng.gen_range(1..64));
        let depth = if rng.gen_bool(0.5) { BitDepth::Eight } else { BitDepth::Sixteen };
        let max = depth.max_value() as u16;
        let a: Vec<u16> = (0..w * h).map(|_| rng.gen_range(0..=max)).collect();
        let sigma = f64::from(max) * rng.gen_range(0.0001..0.2);
        let a = RasterImage::new(w, h, depth, a).unwrap();
        let b = synthetic::add_noise(&a, sigma, seed + i as u64);
        let got = metrics::psnr(&a, &b).unwrap();
        worst = worst.max((got - brute_force_psnr(&a, &b)).abs());
    }
    worst
}

/// Every metric must report its best value on identical inputs.
pub fn identity_failures() -> Vec<String> {
    let mut out = Vec::new();
    for image in [load("camera.pgm"), synthetic::textured(80, 72, BitDepth::Sixteen, 3)] {
        for id in MetricId::ALL {
            let best = MetricDescriptor::builtin(id).best_value();
            let got = metrics::evaluate(id, &image, &image.clone()).unwrap();
            if got != best {
                out.push(format!("identity {}: {got} != {best}", id.as_str()));
            }
        }
    }
    out
}

/// Each metric must decrease strictly as the noise variance grows through
/// 1, 4, 16, 64, 256.
pub fn noise_monotonicity_failures() -> Vec<String> {
    let image = load("camera.pgm");
    let noisy: Vec<RasterImage> = [1.0f64, 4.0, 16.0, 64.0, 256.0]
        .iter()
        .map(|v| synthetic::add_noise(&image, v.sqrt(), 77))
        .collect();
    let mut out = Vec::new();
    for id in MetricId::ALL {
        let values: Vec<f64> = noisy.iter().map(|d| metrics::evaluate(id, &image, d).unwrap()).collect();
        if values.windows(2).any(|w| w[1] >= w[0]) {
            out.push(format!("{} not strictly decreasing: {values:?}", id.as_str()));
        }
    }
    out
}

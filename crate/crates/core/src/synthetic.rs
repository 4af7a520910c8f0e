//! Seeded synthetic test images and cubes.
//!
//! Everything here is a pure function of its arguments, so tests and
//! benchmarks can regenerate identical inputs anywhere.

use crate::imagecore::{BitDepth, RasterImage, SpectralCube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn full_scale(depth: BitDepth) -> f64 {
    f64::from(depth.max_value())
}

/// Natural-ish content on a `[0, 1]` scale: gradient, two oriented
/// gratings, a few hard-edged discs and mild grain.
fn textured_unit(w: usize, h: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let (fx, fy) = (r.gen_range(40.0..110.0), r.gen_range(30.0..90.0));
    let (gx, gy) = (r.gen_range(5.0..15.0), r.gen_range(4.0..12.0));
    let tilt = r.gen_range(-0.3..0.3);
    let discs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                r.gen_range(0.0..w as f64),
                r.gen_range(0.0..h as f64),
                r.gen_range(0.05..0.25) * w.min(h) as f64,
                r.gen_range(-0.25..0.25),
            )
        })
        .collect();
    let grain = Normal::new(0.0, 0.02).expect("valid sigma");
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = 0.5 + tilt * (xf / w as f64 - 0.5);
            v += 0.18 * (2.0 * PI * xf / fx).sin() * (2.0 * PI * yf / fy).cos();
            v += 0.06 * (2.0 * PI * (xf + yf) / gx).sin() * (2.0 * PI * (xf - yf) / gy).cos();
            for &(cx, cy, rad, amp) in &discs {
                if (xf - cx).hypot(yf - cy) < rad {
                    v += amp;
                }
            }
            v += grain.sample(&mut r);
            out.push(v);
        }
    }
    out
}

/// Textured test image spanning most of the sample range.
pub fn textured(w: usize, h: usize, depth: BitDepth, seed: u64) -> RasterImage {
    let max = full_scale(depth);
    let values: Vec<f64> = textured_unit(w, h, seed).iter().map(|v| v * max).collect();
    RasterImage::from_f64(w, h, depth, &values).expect("dimensions are non-zero")
}

/// Adds zero-mean Gaussian noise of `sigma` sample levels (rounded, clamped).
pub fn add_noise(image: &RasterImage, sigma: f64, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let values: Vec<f64> = image
        .samples()
        .iter()
        .map(|&s| f64::from(s) + normal.sample(&mut r))
        .collect();
    RasterImage::from_f64(image.width(), image.height(), image.bit_depth(), &values)
        .expect("same shape as the input")
}

/// [`textured`] plus Gaussian noise.
pub fn noisy(w: usize, h: usize, depth: BitDepth, sigma: f64, seed: u64) -> RasterImage {
    add_noise(&textured(w, h, depth, seed), sigma, seed.wrapping_add(0x9E37_79B9))
}

/// Smooth horizontal/vertical gradient with additive noise.
pub fn gradient(w: usize, h: usize, depth: BitDepth, sigma: f64, seed: u64) -> RasterImage {
    let max = full_scale(depth);
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let t = 0.6 * x as f64 / w as f64 + 0.3 * y as f64 / h as f64;
            values.push((0.05 + t) * max);
        }
    }
    let base = RasterImage::from_f64(w, h, depth, &values).expect("dimensions are non-zero");
    add_noise(&base, sigma, seed)
}

/// 16-bit cube whose bands have very different dynamic ranges: band `b`
/// peaks somewhere between ~12% and ~60% of full scale, with gradient,
/// texture and sensor-like noise proportional to the band's level.
pub fn spectral_cube(bands: usize, w: usize, h: usize, seed: u64) -> SpectralCube {
    let full = full_scale(BitDepth::Sixteen);
    let mut r = rng(seed);
    let images = (0..bands)
        .map(|b| {
            let level = r.gen_range(0.12..0.6) * full;
            let band_seed = seed.wrapping_mul(31).wrapping_add(b as u64);
            let unit = textured_unit(w, h, band_seed);
            let mut br = rng(band_seed ^ 0xC0FF_EE00);
            let noise = Normal::new(0.0, 0.01 * level).expect("valid sigma");
            let values: Vec<f64> = unit
                .iter()
                .map(|v| v * level + noise.sample(&mut br))
                .collect();
            RasterImage::from_f64(w, h, BitDepth::Sixteen, &values).expect("dimensions are non-zero")
        })
        .collect();
    let labels = (0..bands).map(|b| format!("band{b:02}")).collect();
    SpectralCube::new(images, Some(labels)).expect("bands share one shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(textured(30, 20, BitDepth::Eight, 5), textured(30, 20, BitDepth::Eight, 5));
        assert_ne!(textured(30, 20, BitDepth::Eight, 5), textured(30, 20, BitDepth::Eight, 6));
        assert_eq!(spectral_cube(3, 16, 16, 1), spectral_cube(3, 16, 16, 1));
    }

    #[test]
    fn cube_bands_differ_in_range() {
        let cube = spectral_cube(10, 64, 64, 7);
        let maxima: Vec<u16> = cube.bands().iter().map(|b| b.max_sample()).collect();
        let lo = *maxima.iter().min().unwrap();
        let hi = *maxima.iter().max().unwrap();
        assert!(f64::from(hi) > 1.8 * f64::from(lo), "{maxima:?}");
    }
}

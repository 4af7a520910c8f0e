//! Single-scale SSIM and five-scale MS-SSIM.
//!
//! SSIM uses an 11×11 Gaussian window (σ = 1.5) over the 'valid' region,
//! `K = (0.01, 0.03)` and dynamic range `2^bit_depth - 1`. MS-SSIM computes
//! contrast-structure means at five dyadic scales (2×2 mean filter with
//! symmetric edge handling, then decimation) and the full SSIM at the
//! coarsest scale.

use super::{check_pair, peak, MetricError};
use crate::imagecore::RasterImage;

pub const SSIM_WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_image(img: &RasterImage) -> Self {
        Plane {
            w: img.width(),
            h: img.height(),
            data: img.to_f64(),
        }
    }

    /// 2×2 mean with the missing row/column mirrored, keeping every other sample.
    fn downsample(&self) -> Plane {
        let (w, h) = (self.w, self.h);
        let at = |x: usize, y: usize| self.data[y.min(h - 1) * w + x.min(w - 1)];
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        let mut data = Vec::with_capacity(nw * nh);
        for y in (0..h).step_by(2) {
            for x in (0..w).step_by(2) {
                data.push((at(x, y) + at(x + 1, y) + at(x, y + 1) + at(x + 1, y + 1)) / 4.0);
            }
        }
        Plane { w: nw, h: nh, data }
    }
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW as f64 - 1.0) / 2.0;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-(x * x) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable 'valid' correlation with the Gaussian window.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, kv) in k.iter().enumerate() {
            let src_row = &rows[(y + i) * ow..(y + i + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term.
fn ssim_terms(a: &Plane, b: &Plane, dynamic_range: f64) -> (f64, f64) {
    let k = gaussian_kernel();
    let (w, h) = (a.w, a.h);
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() };
    let mu1 = filter_valid(&a.data, w, h, &k);
    let mu2 = filter_valid(&b.data, w, h, &k);
    let s11 = filter_valid(&prod(|x, _| x * x), w, h, &k);
    let s22 = filter_valid(&prod(|_, y| y * y), w, h, &k);
    let s12 = filter_valid(&prod(|x, y| x * y), w, h, &k);
    let c1 = (K1 * dynamic_range).powi(2);
    let c2 = (K2 * dynamic_range).powi(2);
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu1.len() {
        let (m1, m2) = (mu1[i], mu2[i]);
        let (m1s, m2s, m12) = (m1 * m1, m2 * m2, m1 * m2);
        let v1 = s11[i] - m1s;
        let v2 = s22[i] - m2s;
        let cov = s12[i] - m12;
        let cs = (2.0 * cov + c2) / (v1 + v2 + c2);
        ssim_sum += ((2.0 * m12 + c1) * (2.0 * cov + c2)) / ((m1s + m2s + c1) * (v1 + v2 + c2));
        cs_sum += cs;
    }
    let n = mu1.len() as f64;
    (ssim_sum / n, cs_sum / n)
}

fn too_small(w: usize, h: usize) -> MetricError {
    MetricError::TooSmall(format!("{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"))
}

pub fn ssim(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    check_pair(reference, distorted)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(too_small(w, h));
    }
    if reference == distorted {
        return Ok(1.0);
    }
    let a = Plane::from_image(reference);
    let b = Plane::from_image(distorted);
    Ok(ssim_terms(&a, &b, peak(reference)).0)
}

/// Number of scales that keep every level at least one window wide.
fn scale_count(w: usize, h: usize) -> usize {
    let mut n = w.min(h);
    let mut s = 0;
    while s < MSSSIM_WEIGHTS.len() && n >= SSIM_WINDOW {
        s += 1;
        n = n.div_ceil(2);
    }
    s
}

/// Multi-scale SSIM. Images too small for five scales use as many as fit,
/// with the leading exponents renormalized to sum to one.
pub fn msssim(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    check_pair(reference, distorted)?;
    let (w, h) = (reference.width(), reference.height());
    let scales = scale_count(w, h);
    if scales == 0 {
        return Err(too_small(w, h));
    }
    if reference == distorted {
        return Ok(1.0);
    }
    let weights = &MSSSIM_WEIGHTS[..scales];
    let norm: f64 = weights.iter().sum();
    let range = peak(reference);
    let mut a = Plane::from_image(reference);
    let mut b = Plane::from_image(distorted);
    let mut value = 1.0;
    for (s, &wt) in weights.iter().enumerate() {
        let (mssim, mcs) = ssim_terms(&a, &b, range);
        // negative terms only arise on adversarial pairs; clamp to keep the power real
        let term = if s + 1 == scales { mssim } else { mcs };
        value *= term.max(0.0).powf(wt / norm);
        if s + 1 < scales {
            a = a.downsample();
            b = b.downsample();
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::BitDepth;
    use crate::synthetic;

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(k[i], k[SSIM_WINDOW - 1 - i]);
        }
    }

    #[test]
    fn constant_pair_closed_form() {
        let a = RasterImage::filled(32, 32, BitDepth::Eight, 0).unwrap();
        let b = RasterImage::filled(32, 32, BitDepth::Eight, 255).unwrap();
        let c1 = (0.01f64 * 255.0).powi(2);
        let expected = c1 / (255.0f64.powi(2) + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.0e-4).abs() < 1e-6);
    }

    #[test]
    fn symmetric() {
        let a = synthetic::textured(48, 40, BitDepth::Eight, 1);
        let b = synthetic::noisy(48, 40, BitDepth::Eight, 20.0, 2);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        assert!((msssim(&a, &b).unwrap() - msssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn window_size_limits() {
        let small = RasterImage::filled(10, 30, BitDepth::Eight, 4).unwrap();
        assert!(matches!(ssim(&small, &small), Err(MetricError::TooSmall(_))));
        assert!(matches!(msssim(&small, &small), Err(MetricError::TooSmall(_))));
        assert_eq!(scale_count(512, 512), 5);
        assert_eq!(scale_count(176, 200), 5);
        assert_eq!(scale_count(40, 100), 2);
        assert_eq!(scale_count(44, 100), 3);
        assert_eq!(scale_count(11, 11), 1);
    }

    #[test]
    fn downsample_mirrors_odd_edges() {
        let p = Plane {
            w: 3,
            h: 1,
            data: vec![1.0, 3.0, 5.0],
        };
        let d = p.downsample();
        assert_eq!((d.w, d.h), (2, 1));
        assert_eq!(d.data, vec![2.0, 5.0]);
    }
}

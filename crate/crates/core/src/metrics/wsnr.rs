//! Weighted signal-to-noise ratio.
//!
//! The error spectrum (centred 2-D DFT) is weighted by a radial contrast
//! sensitivity function with angular modulation, evaluated on a grid that
//! spans ±60 cycles across the image width, and compared against the total
//! energy of the reference spectrum.

use super::{check_pair, db_from_mse, MetricError, DB_CAP};
use crate::imagecore::RasterImage;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const NFREQ: f64 = 60.0;
const ANGULAR_W: f64 = 0.7;
const LOW_FREQ_CUTOFF: f64 = 7.8909;
const LOW_FREQ_VALUE: f64 = 0.9809;

/// CSF in centred (fft-shifted) order, row-major `height × width`.
fn csf_grid(w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        let yp = r as f64 - h as f64 / 2.0 + 0.5;
        for c in 0..w {
            let xp = c as f64 - w as f64 / 2.0 + 0.5;
            let (re, im) = (xp / w as f64 * 2.0 * NFREQ, yp / w as f64 * 2.0 * NFREQ);
            let angle = im.atan2(re);
            let s = (1.0 - ANGULAR_W) / 2.0 * (4.0 * angle).cos() + (1.0 + ANGULAR_W) / 2.0;
            let f = re.hypot(im) / s;
            out.push(if f < LOW_FREQ_CUTOFF {
                LOW_FREQ_VALUE
            } else {
                2.6 * (0.0192 + 0.114 * f) * (-(0.114 * f).powf(1.1)).exp()
            });
        }
    }
    out
}

fn fft2(data: &mut [Complex<f64>], w: usize, h: usize) {
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(w);
    for line in data.chunks_exact_mut(w) {
        row.process(line);
    }
    let col = planner.plan_fft_forward(h);
    let mut column = vec![Complex::default(); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

pub fn wsnr(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    check_pair(reference, distorted)?;
    if reference == distorted {
        return Ok(DB_CAP);
    }
    let (w, h) = (reference.width(), reference.height());
    let r = reference.samples();
    let mut err: Vec<Complex<f64>> = r
        .iter()
        .zip(distorted.samples())
        .map(|(&a, &b)| Complex::new(f64::from(a) - f64::from(b), 0.0))
        .collect();
    fft2(&mut err, w, h);
    let csf = csf_grid(w, h);
    // shifted index i holds unshifted frequency (i + ceil(n/2)) mod n
    let (sx, sy) = (w.div_ceil(2), h.div_ceil(2));
    let mut weighted = 0.0;
    for y in 0..h {
        let oy = (y + sy) % h;
        for x in 0..w {
            let ox = (x + sx) % w;
            weighted += err[oy * w + ox].norm_sqr() * csf[y * w + x].powi(2);
        }
    }
    // Parseval: the reference spectrum energy is N times the sample energy
    let signal = (w * h) as f64 * r.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>();
    // 10·log10(signal / weighted) written through the shared clamp
    Ok(db_from_mse(signal.sqrt(), weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::BitDepth;
    use crate::synthetic;

    #[test]
    fn csf_is_flat_at_low_frequency() {
        let g = csf_grid(64, 64);
        // centre of the grid is DC
        assert_eq!(g[32 * 64 + 32], LOW_FREQ_VALUE);
        assert!(g[0] < 0.1);
    }

    #[test]
    fn fft_matches_naive_dft() {
        let (w, h) = (5, 3);
        let vals: Vec<f64> = (0..w * h).map(|i| ((i * 7) % 11) as f64).collect();
        let mut data: Vec<Complex<f64>> = vals.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft2(&mut data, w, h);
        for ky in 0..h {
            for kx in 0..w {
                let mut s = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ph = -2.0 * std::f64::consts::PI
                            * (kx as f64 * x as f64 / w as f64 + ky as f64 * y as f64 / h as f64);
                        s += Complex::from_polar(vals[y * w + x], ph);
                    }
                }
                assert!((s - data[ky * w + kx]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn extreme_frequency_noise_is_weighted_down() {
        let img = synthetic::textured(64, 64, BitDepth::Eight, 3);
        let n = 64;
        // same-energy sinusoidal errors: one at Nyquist, one at about 14 cycles/width
        let with = |fx: f64| {
            let s: Vec<u16> = img
                .samples()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let x = (i % n) as f64;
                    let y = (i / n) as f64;
                    let e = 6.0 * (2.0 * std::f64::consts::PI * fx * (x + y) / n as f64).cos();
                    (f64::from(v) + e).round().clamp(0.0, 255.0) as u16
                })
                .collect();
            RasterImage::new(n, n, BitDepth::Eight, s).unwrap()
        };
        let high = wsnr(&img, &with(32.0)).unwrap();
        let mid = wsnr(&img, &with(5.0)).unwrap();
        assert!(high > mid, "{high} vs {mid}");
    }
}

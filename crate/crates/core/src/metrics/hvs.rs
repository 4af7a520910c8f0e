//! PSNR-HVS and PSNR-HVS-M.
//!
//! Both images are cut into non-overlapping 8×8 blocks (trailing partial
//! blocks are skipped) and transformed with the orthonormal DCT. Coefficient
//! differences are weighted by a contrast sensitivity table. PSNR-HVS-M first
//! subtracts a masking allowance from every AC difference; the allowance
//! grows with the block's weighted AC energy and is scaled down for blocks
//! whose energy is concentrated in one quadrant.

use super::{check_pair, db_from_mse, peak, MetricError, DB_CAP};
use crate::imagecore::RasterImage;
use crate::transform::BlockDct;

/// Contrast sensitivity per 8×8 DCT frequency, from the psnrhvsm.m
/// reference implementation.
pub const CSF_COEFFICIENTS: [[f64; 8]; 8] = [
    [1.608443, 2.339554, 2.573509, 1.608443, 1.072295, 0.643377, 0.504610, 0.421887],
    [2.144591, 2.144591, 1.838221, 1.354478, 0.989811, 0.443708, 0.428918, 0.467911],
    [1.838221, 1.979622, 1.608443, 1.072295, 0.643377, 0.451493, 0.372972, 0.459555],
    [1.838221, 1.513829, 1.169777, 0.887417, 0.504610, 0.295806, 0.321689, 0.415082],
    [1.429727, 1.169777, 0.695543, 0.459555, 0.378457, 0.236102, 0.249855, 0.334222],
    [1.072295, 0.735288, 0.467911, 0.402111, 0.317717, 0.247453, 0.227744, 0.279729],
    [0.525206, 0.402111, 0.329937, 0.295806, 0.249855, 0.212687, 0.214459, 0.254803],
    [0.357432, 0.279729, 0.270896, 0.262603, 0.229778, 0.257351, 0.249855, 0.259950],
];

/// Masking weights per 8×8 DCT frequency (close to the squared CSF over
/// its maximum), from the same reference implementation.
pub const MASK_COEFFICIENTS: [[f64; 8]; 8] = [
    [0.390625, 0.826446, 1.000000, 0.390625, 0.173611, 0.062500, 0.038447, 0.026874],
    [0.694444, 0.694444, 0.510204, 0.277008, 0.147929, 0.029727, 0.027778, 0.033058],
    [0.510204, 0.591716, 0.390625, 0.173611, 0.062500, 0.030779, 0.021004, 0.031888],
    [0.510204, 0.346021, 0.206612, 0.118906, 0.038447, 0.013212, 0.015625, 0.026015],
    [0.308642, 0.206612, 0.073046, 0.031888, 0.021626, 0.008417, 0.009426, 0.016866],
    [0.173611, 0.081633, 0.033058, 0.024414, 0.015242, 0.009246, 0.007831, 0.011891],
    [0.041649, 0.024414, 0.016437, 0.013212, 0.009426, 0.006830, 0.006944, 0.009803],
    [0.019290, 0.011891, 0.011009, 0.010412, 0.007972, 0.010000, 0.009426, 0.010203],
];

const B: usize = 8;

/// Unbiased variance times the sample count, over the `n × n` window of
/// the 8×8 block starting at `(r0, c0)`.
fn scaled_var(block: &[f64], r0: usize, c0: usize, n: usize) -> f64 {
    let it = || (r0..r0 + n).flat_map(move |r| (c0..c0 + n).map(move |c| block[r * B + c]));
    let count = (n * n) as f64;
    let mean = it().sum::<f64>() / count;
    let ss: f64 = it().map(|v| (v - mean).powi(2)).sum();
    ss / (count - 1.0) * count
}

fn mask_effect(block: &[f64], dct: &[f64]) -> f64 {
    let mut m = 0.0;
    for k in 0..B {
        for l in 0..B {
            if k != 0 || l != 0 {
                m += dct[k * B + l].powi(2) * MASK_COEFFICIENTS[k][l];
            }
        }
    }
    let mut pop = scaled_var(block, 0, 0, B);
    if pop != 0.0 {
        pop = (scaled_var(block, 0, 0, 4)
            + scaled_var(block, 0, 4, 4)
            + scaled_var(block, 4, 4, 4)
            + scaled_var(block, 4, 0, 4))
            / pop;
    }
    (m * pop).sqrt() / 32.0
}

/// `(psnr_hvs, psnr_hvs_m)` in one pass.
pub fn psnr_hvs_both(reference: &RasterImage, distorted: &RasterImage) -> Result<(f64, f64), MetricError> {
    check_pair(reference, distorted)?;
    let (w, h) = (reference.width(), reference.height());
    if w < B || h < B {
        return Err(MetricError::TooSmall(format!("{w}x{h} is smaller than one 8x8 block")));
    }
    if reference == distorted {
        return Ok((DB_CAP, DB_CAP));
    }
    let dct = BlockDct::new(B);
    let (ra, rb) = (reference.samples(), distorted.samples());
    let mut a = [0.0; B * B];
    let mut b = [0.0; B * B];
    let mut ad = [0.0; B * B];
    let mut bd = [0.0; B * B];
    let mut scratch = [0.0; B * B];
    let (mut s_hvs, mut s_hvsm) = (0.0, 0.0);
    let mut num = 0usize;
    for y0 in (0..=h - B).step_by(B) {
        for x0 in (0..=w - B).step_by(B) {
            for r in 0..B {
                for c in 0..B {
                    let i = (y0 + r) * w + x0 + c;
                    a[r * B + c] = f64::from(ra[i]);
                    b[r * B + c] = f64::from(rb[i]);
                }
            }
            dct.forward(&a, &mut ad, &mut scratch);
            dct.forward(&b, &mut bd, &mut scratch);
            let mask = mask_effect(&a, &ad).max(mask_effect(&b, &bd));
            for k in 0..B {
                for l in 0..B {
                    let mut u = (ad[k * B + l] - bd[k * B + l]).abs();
                    let csf = CSF_COEFFICIENTS[k][l];
                    s_hvs += (u * csf).powi(2);
                    if k != 0 || l != 0 {
                        u = (u - mask / MASK_COEFFICIENTS[k][l]).max(0.0);
                    }
                    s_hvsm += (u * csf).powi(2);
                    num += 1;
                }
            }
        }
    }
    let p = peak(reference);
    Ok((
        db_from_mse(p, s_hvs / num as f64),
        db_from_mse(p, s_hvsm / num as f64),
    ))
}

pub fn psnr_hvs(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    Ok(psnr_hvs_both(reference, distorted)?.0)
}

pub fn psnr_hvs_m(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    Ok(psnr_hvs_both(reference, distorted)?.1)
}

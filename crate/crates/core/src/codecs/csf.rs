//! Per-frequency quantization multipliers for the CSF-weighted coder.
//!
//! The multipliers come from the 8×8 contrast sensitivity table used by the
//! PSNR-HVS metrics: a coefficient whose visual weight is `c` relative to the
//! DC weight `c₀` is quantized `c₀ / c` times more coarsely. Larger blocks
//! sample the same table at the matching spatial frequency (bilinear
//! interpolation). Values are floored at 1 and made monotone along both axes
//! so that no frequency is quantized finer than a lower one.

use super::CodecError;
use crate::metrics::CSF_COEFFICIENTS;

pub const SUPPORTED_BLOCK_SIZES: [usize; 3] = [8, 16, 32];

/// Row-major `block_size × block_size` table of multipliers ≥ 1, with
/// `w[0][0] == 1`.
pub fn csf_weight_table(block_size: usize) -> Result<Vec<f64>, CodecError> {
    if !SUPPORTED_BLOCK_SIZES.contains(&block_size) {
        return Err(CodecError::UnsupportedBlockSize(block_size));
    }
    let dc = CSF_COEFFICIENTS[0][0];
    let ratio = |r: usize, c: usize| dc / CSF_COEFFICIENTS[r][c];
    let scale = 8.0 / block_size as f64;
    let n = block_size;
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let fi = (i as f64 * scale).min(7.0);
            let fj = (j as f64 * scale).min(7.0);
            let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
            let (i1, j1) = ((i0 + 1).min(7), (j0 + 1).min(7));
            let (ti, tj) = (fi - i0 as f64, fj - j0 as f64);
            let v = ratio(i0, j0) * (1.0 - ti) * (1.0 - tj)
                + ratio(i1, j0) * ti * (1.0 - tj)
                + ratio(i0, j1) * (1.0 - ti) * tj
                + ratio(i1, j1) * ti * tj;
            let mut v = v.max(1.0);
            if i > 0 {
                v = v.max(w[(i - 1) * n + j]);
            }
            if j > 0 {
                v = v.max(w[i * n + j - 1]);
            }
            w[i * n + j] = v;
        }
    }
    Ok(w)
}

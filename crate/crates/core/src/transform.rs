//! Orthonormal 2-D DCT-II on square blocks, and zig-zag scan order.

/// Separable orthonormal DCT for `n × n` blocks.
#[derive(Debug, Clone)]
pub struct BlockDct {
    n: usize,
    // basis[k * n + x] = a_k cos(pi (2x + 1) k / 2n)
    basis: Vec<f64>,
}

impl BlockDct {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let mut basis = vec![0.0; n * n];
        let nf = n as f64;
        for k in 0..n {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for x in 0..n {
                basis[k * n + x] =
                    scale * (std::f64::consts::PI * (2 * x + 1) as f64 * k as f64 / (2.0 * nf)).cos();
            }
        }
        BlockDct { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `coeffs = C · block · Cᵀ`, both row-major `n × n`.
    pub fn forward(&self, block: &[f64], coeffs: &mut [f64], scratch: &mut [f64]) {
        let n = self.n;
        debug_assert!(block.len() == n * n && coeffs.len() == n * n && scratch.len() == n * n);
        // rows: scratch[y][k] = sum_x block[y][x] C[k][x]
        for y in 0..n {
            let row = &block[y * n..(y + 1) * n];
            for k in 0..n {
                let b = &self.basis[k * n..(k + 1) * n];
                scratch[y * n + k] = row.iter().zip(b).map(|(v, c)| v * c).sum();
            }
        }
        // columns: coeffs[v][k] = sum_y C[v][y] scratch[y][k]
        for v in 0..n {
            let b = &self.basis[v * n..(v + 1) * n];
            for k in 0..n {
                let mut acc = 0.0;
                for y in 0..n {
                    acc += b[y] * scratch[y * n + k];
                }
                coeffs[v * n + k] = acc;
            }
        }
    }

    /// `block = Cᵀ · coeffs · C`.
    pub fn inverse(&self, coeffs: &[f64], block: &mut [f64], scratch: &mut [f64]) {
        let n = self.n;
        debug_assert!(block.len() == n * n && coeffs.len() == n * n && scratch.len() == n * n);
        // scratch[y][k] = sum_v C[v][y] coeffs[v][k]
        for y in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for v in 0..n {
                    acc += self.basis[v * n + y] * coeffs[v * n + k];
                }
                scratch[y * n + k] = acc;
            }
        }
        // block[y][x] = sum_k scratch[y][k] C[k][x]
        for y in 0..n {
            for x in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += scratch[y * n + k] * self.basis[k * n + x];
                }
                block[y * n + x] = acc;
            }
        }
    }
}

/// JPEG-style zig-zag scan: `order[i]` is the row-major index of the i-th
/// coefficient visited.
pub fn zigzag_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n * n);
    for s in 0..(2 * n - 1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 1 {
            for row in lo..=hi {
                order.push(row * n + (s - row));
            }
        } else {
            for row in (lo..=hi).rev() {
                order.push(row * n + (s - row));
            }
        }
    }
    order
}

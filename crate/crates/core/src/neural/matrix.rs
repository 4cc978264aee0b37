use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: transpose(&self.data, self.rows, self.cols),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    const T: usize = 32;
    for r0 in (0..rows).step_by(T) {
        for c0 in (0..cols).step_by(T) {
            for r in r0..(r0 + T).min(rows) {
                for c in c0..(c0 + T).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
    out
}

const MR: usize = 4;
const NR: usize = 4;

/// Packs rows `j0..j0+NR` of `b` (n x k) so that for each `kk` the NR values
/// are contiguous; missing rows are zero.
fn pack_panel(b: &[f64], n: usize, k: usize, j0: usize, out: &mut [f64]) {
    for c in 0..NR {
        let j = j0 + c;
        if j < n {
            let row = &b[j * k..(j + 1) * k];
            for (kk, &v) in row.iter().enumerate() {
                out[kk * NR + c] = v;
            }
        } else {
            for kk in 0..k {
                out[kk * NR + c] = 0.0;
            }
        }
    }
}

/// `c = a * b^T` with `a` (m x k) and `b` (n x k), both row-major; `c` is m x n.
///
/// Every entry is a single sum over `k` in increasing order, so the result
/// does not depend on how rows are split across threads.
pub(crate) fn matmul_nt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let panels = n.div_ceil(NR);
    let mut packed = vec![0.0; panels * k * NR];
    for p in 0..panels {
        pack_panel(b, n, k, p * NR, &mut packed[p * k * NR..(p + 1) * k * NR]);
    }

    let block_rows = MR * 8;
    let work = m * n * k;
    let body = |(blk, c_blk): (usize, &mut [f64])| {
        let i_base = blk * block_rows;
        let rows_here = c_blk.len() / n;
        let mut i = 0;
        while i < rows_here {
            let mr = MR.min(rows_here - i);
            for p in 0..panels {
                let panel = &packed[p * k * NR..(p + 1) * k * NR];
                let mut acc = [[0.0f64; NR]; MR];
                if mr == MR {
                    let a0 = &a[(i_base + i) * k..(i_base + i + 1) * k];
                    let a1 = &a[(i_base + i + 1) * k..(i_base + i + 2) * k];
                    let a2 = &a[(i_base + i + 2) * k..(i_base + i + 3) * k];
                    let a3 = &a[(i_base + i + 3) * k..(i_base + i + 4) * k];
                    for (kk, bv) in panel.chunks_exact(NR).enumerate() {
                        let av = [a0[kk], a1[kk], a2[kk], a3[kk]];
                        for r in 0..MR {
                            for cc in 0..NR {
                                acc[r][cc] += av[r] * bv[cc];
                            }
                        }
                    }
                } else {
                    for r in 0..mr {
                        let ar = &a[(i_base + i + r) * k..(i_base + i + r + 1) * k];
                        for (kk, bv) in panel.chunks_exact(NR).enumerate() {
                            for cc in 0..NR {
                                acc[r][cc] += ar[kk] * bv[cc];
                            }
                        }
                    }
                }
                let j0 = p * NR;
                let nr = NR.min(n - j0);
                for r in 0..mr {
                    let dst = &mut c_blk[(i + r) * n + j0..(i + r) * n + j0 + nr];
                    dst.copy_from_slice(&acc[r][..nr]);
                }
            }
            i += mr;
        }
    };
    if work < 1 << 16 {
        c.chunks_mut(block_rows * n).enumerate().for_each(body);
    } else {
        c.par_chunks_mut(block_rows * n).enumerate().for_each(body);
    }
}

//! Dense row-major 2-D float tensors.
//!
//! Everything in the learning stack is a matrix: vectors are `[1, n]`
//! rows, batches are `[batch, dim]`, sequences are `[len, dim]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Above this work size (m*k*n), matmuls split rows across threads.
const PAR_FLOPS: usize = 1 << 22;

/// Row-major matrix of `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Self { rows, cols, data }
    }

    pub fn row_vec(data: Vec<f32>) -> Self {
        Self { rows: 1, cols: data.len(), data }
    }

    pub fn scalar(v: f32) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f32 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm squared.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

/// `out = a @ b` (optionally `b` transposed). Shared by the tape and the
/// tapeless inference path so both produce bit-identical results.
pub fn matmul_into(a: &Tensor, b: &Tensor, trans_b: bool, out: &mut Tensor) {
    let (m, k) = (a.rows, a.cols);
    let n = if trans_b { b.rows } else { b.cols };
    if trans_b {
        assert_eq!(b.cols, k, "matmul inner dim mismatch (b transposed)");
    } else {
        assert_eq!(b.rows, k, "matmul inner dim mismatch");
    }
    assert_eq!(out.rows, m);
    assert_eq!(out.cols, n);
    out.data.fill(0.0);
    if m * k * n >= PAR_FLOPS && m >= 8 {
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, or)| {
                let ar = &a.data[i * k..(i + 1) * k];
                if trans_b {
                    for (j, o) in or.iter_mut().enumerate() {
                        let br = &b.data[j * k..(j + 1) * k];
                        let mut acc = 0.0f32;
                        for p in 0..k {
                            acc += ar[p] * br[p];
                        }
                        *o = acc;
                    }
                } else {
                    for (p, &av) in ar.iter().enumerate() {
                        let br = &b.data[p * n..(p + 1) * n];
                        for (o, &bv) in or.iter_mut().zip(br) {
                            *o += av * bv;
                        }
                    }
                }
            });
        return;
    }
    if trans_b {
        // out[i,j] = sum_k a[i,k] * b[j,k] — both operands scanned row-wise.
        for i in 0..m {
            let ar = &a.data[i * k..(i + 1) * k];
            let or = &mut out.data[i * n..(i + 1) * n];
            for j in 0..n {
                let br = &b.data[j * k..(j + 1) * k];
                let mut acc = 0.0f32;
                for p in 0..k {
                    acc += ar[p] * br[p];
                }
                or[j] = acc;
            }
        }
    } else {
        // i-k-j order keeps the inner loop contiguous over b and out rows.
        for i in 0..m {
            let ar = &a.data[i * k..(i + 1) * k];
            let or = &mut out.data[i * n..(i + 1) * n];
            for (p, &av) in ar.iter().enumerate() {
                let br = &b.data[p * n..(p + 1) * n];
                for j in 0..n {
                    or[j] += av * br[j];
                }
            }
        }
    }
}

pub fn matmul(a: &Tensor, b: &Tensor, trans_b: bool) -> Tensor {
    let n = if trans_b { b.rows } else { b.cols };
    let mut out = Tensor::zeros(a.rows, n);
    matmul_into(a, b, trans_b, &mut out);
    out
}

/// `aᵀ @ b` without materializing the transpose (gradient path).
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.rows, b.rows, "matmul_tn row mismatch");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Tensor::zeros(k, n);
    for i in 0..m {
        let ar = &a.data[i * k..(i + 1) * k];
        let br = &b.data[i * n..(i + 1) * n];
        for (p, &av) in ar.iter().enumerate() {
            let or = &mut out.data[p * n..(p + 1) * n];
            for j in 0..n {
                or[j] += av * br[j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_by_hand() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b, false);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transposed_agrees_with_plain() {
        let a = Tensor::from_vec(2, 3, vec![1.0, -2.0, 0.5, 4.0, 5.0, -6.0]);
        let b = Tensor::from_vec(4, 3, (0..12).map(|i| i as f32 * 0.25 - 1.0).collect());
        let via_t = matmul(&a, &b, true);
        let plain = matmul(&a, &b.transpose(), false);
        assert_eq!(via_t.data, plain.data);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.transpose().transpose(), a);
    }
}

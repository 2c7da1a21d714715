//! Row-major dense products on top of faer's GEMM.
//!
//! Matrices are plain `&[f64]` slices in row-major order with explicit shapes.
//! All products run sequentially so results never depend on thread count.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};

fn view(data: &[f64], rows: usize, cols: usize) -> MatRef<'_, f64> {
    MatRef::from_row_major_slice(data, rows, cols)
}

/// `A (m x k) * B (k x n)`.
pub(crate) fn mul(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul(
        MatMut::from_row_major_slice_mut(&mut out, m, n),
        Accum::Replace,
        view(a, m, k),
        view(b, k, n),
        1.0,
        Par::Seq,
    );
    out
}

/// `A^T * B` for `A (k x m)` and `B (k x n)`.
pub(crate) fn mul_tn(a: &[f64], k: usize, m: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul(
        MatMut::from_row_major_slice_mut(&mut out, m, n),
        Accum::Replace,
        view(a, k, m).transpose(),
        view(b, k, n),
        1.0,
        Par::Seq,
    );
    out
}

/// `A * B^T` for `A (m x k)` and `B (n x k)`.
pub(crate) fn mul_nt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul(
        MatMut::from_row_major_slice_mut(&mut out, m, n),
        Accum::Replace,
        view(a, m, k),
        view(b, n, k).transpose(),
        1.0,
        Par::Seq,
    );
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

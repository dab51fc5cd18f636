//! Dense row-major matrix–vector kernels for the network right-hand sides.
//!
//! Weights are stored in single precision and accumulated in double
//! precision. Each output row is one sequential dot product, so the result
//! does not depend on how rows are distributed over threads.

use crate::par;

const LANES: usize = 8;
const ROW_BLOCK: usize = 16;

#[inline]
pub fn dot_mixed(row: &[f32], x: &[f64]) -> f64 {
    debug_assert_eq!(row.len(), x.len());
    let mut acc = [0.0f64; LANES];
    let mut rc = row.chunks_exact(LANES);
    let mut xc = x.chunks_exact(LANES);
    for (r, v) in (&mut rc).zip(&mut xc) {
        for k in 0..LANES {
            acc[k] += r[k] as f64 * v[k];
        }
    }
    let mut tail = 0.0;
    for (r, v) in rc.remainder().iter().zip(xc.remainder()) {
        tail += *r as f64 * v;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `Σ_j a_j (x_j − x_i)` with every term formed before summation, so the
/// result is exactly zero whenever all `x_j` equal `x_i`.
#[inline]
pub fn diffusive_dot(row: &[f32], x: &[f64], xi: f64) -> f64 {
    debug_assert_eq!(row.len(), x.len());
    let mut acc = [0.0f64; LANES];
    let mut rc = row.chunks_exact(LANES);
    let mut xc = x.chunks_exact(LANES);
    for (r, v) in (&mut rc).zip(&mut xc) {
        for k in 0..LANES {
            acc[k] += r[k] as f64 * (v[k] - xi);
        }
    }
    let mut tail = 0.0;
    for (r, v) in rc.remainder().iter().zip(xc.remainder()) {
        tail += *r as f64 * (v - xi);
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y = A x` for a row-major `A` with `x.len()` columns.
pub fn gemv(a: &[f32], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    assert_eq!(a.len(), n * y.len());
    par::for_each_chunk_mut(y, ROW_BLOCK, |block, ys| {
        let first = block * ROW_BLOCK;
        for (k, yi) in ys.iter_mut().enumerate() {
            let i = first + k;
            *yi = dot_mixed(&a[i * n..(i + 1) * n], x);
        }
    });
}

/// Single-threaded reference for [`gemv`].
pub fn gemv_sequential(a: &[f32], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    assert_eq!(a.len(), n * y.len());
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = dot_mixed(&a[i * n..(i + 1) * n], x);
    }
}

/// `y_i = Σ_j A_ij (x_j − x_i)` for a square `A`.
pub fn diffusive_gemv(a: &[f32], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    assert_eq!(a.len(), n * n);
    assert_eq!(y.len(), n);
    par::for_each_chunk_mut(y, ROW_BLOCK, |block, ys| {
        let first = block * ROW_BLOCK;
        for (k, yi) in ys.iter_mut().enumerate() {
            let i = first + k;
            *yi = diffusive_dot(&a[i * n..(i + 1) * n], x, x[i]);
        }
    });
}

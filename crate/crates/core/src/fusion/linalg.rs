// SPDX-License-Identifier: Apache-2.0

//! Row-major dense kernels. Inputs are often hashed text vectors with few
//! nonzeros, so the kernels that read an input vector skip its zeros.

use alloc::vec::Vec;

pub(crate) fn nonzeros(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `out = W x` for a `rows × cols` matrix.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    let nz = nonzeros(x);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o = nz.iter().map(|&j| row[j] * x[j]).sum();
    }
}

/// `G += δ xᵀ`.
pub(crate) fn outer_acc(g: &mut [f64], rows: usize, cols: usize, delta: &[f64], x: &[f64]) {
    let nz = nonzeros(x);
    for r in 0..rows {
        let d = delta[r];
        if d == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for &j in &nz {
            row[j] += d * x[j];
        }
    }
}

/// `out = Wᵀ δ`.
pub(crate) fn matvec_t(w: &[f64], rows: usize, cols: usize, delta: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..rows {
        let d = delta[r];
        if d == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += d * wv;
        }
    }
}

pub(crate) fn add_assign(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

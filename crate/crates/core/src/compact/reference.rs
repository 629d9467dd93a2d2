//! Scalar single-stage reference implementations of the batched kernels.
//!
//! These are plain loops over naive matrices with no blocking, tiling or lane
//! handling. They exist to check the compact kernels against.

use nalgebra::DMatrix;

use super::{Side, Trans};

fn op(a: &DMatrix<f64>, t: Trans) -> DMatrix<f64> {
    match t {
        Trans::No => a.clone(),
        Trans::Yes => a.transpose(),
    }
}

/// `alpha·op(A)·op(B) + beta·C`.
pub fn gemm(
    alpha: f64,
    a: &DMatrix<f64>,
    trans_a: Trans,
    b: &DMatrix<f64>,
    trans_b: Trans,
    beta: f64,
    c: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (a, b) = (op(a, trans_a), op(b, trans_b));
    let mut out = c.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = if beta == 0.0 { alpha * s } else { alpha * s + beta * c[(i, j)] };
        }
    }
    out
}

/// `alpha·op(A)·op(A)ᵀ + beta·C` on the lower triangle; the strict upper
/// triangle of `C` is returned unchanged.
pub fn syrk(alpha: f64, a: &DMatrix<f64>, trans: Trans, beta: f64, c: &DMatrix<f64>) -> DMatrix<f64> {
    let a = op(a, trans);
    let mut out = c.clone();
    for j in 0..out.ncols() {
        for i in j..out.nrows() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * a[(j, k)];
            }
            out[(i, j)] = if beta == 0.0 { alpha * s } else { alpha * s + beta * c[(i, j)] };
        }
    }
    out
}

/// Lower Cholesky factor (Cholesky–Banachiewicz order). `None` when a pivot
/// is not strictly positive.
pub fn potrf(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = c.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves the triangular system described by `side`/`trans` for lower `l`:
/// returns `X` with `op(L)·X = B` (left) or `X·op(L) = B` (right).
pub fn trsm(l: &DMatrix<f64>, side: Side, trans: Trans, b: &DMatrix<f64>) -> DMatrix<f64> {
    match side {
        Side::Left => {
            let t = op(l, trans);
            let mut x = DMatrix::zeros(b.nrows(), b.ncols());
            for c in 0..b.ncols() {
                solve_triangular(&t, trans == Trans::No, b.column(c).iter().copied(), |i, v| {
                    x[(i, c)] = v
                });
            }
            x
        }
        Side::Right => {
            // X·op(L) = B  ⇔  op(L)ᵀ·Xᵀ = Bᵀ
            let t = op(l, trans).transpose();
            let bt = b.transpose();
            let mut xt = DMatrix::zeros(bt.nrows(), bt.ncols());
            for c in 0..bt.ncols() {
                solve_triangular(&t, trans == Trans::Yes, bt.column(c).iter().copied(), |i, v| {
                    xt[(i, c)] = v
                });
            }
            xt.transpose()
        }
    }
}

/// Substitution on a triangular `t`, forward when `lower`.
fn solve_triangular(
    t: &DMatrix<f64>,
    lower: bool,
    rhs: impl Iterator<Item = f64>,
    mut store: impl FnMut(usize, f64),
) {
    let n = t.nrows();
    let rhs: Vec<f64> = rhs.collect();
    let mut x = vec![0.0; n];
    let order: Vec<usize> = if lower { (0..n).collect() } else { (0..n).rev().collect() };
    for &i in &order {
        let mut s = rhs[i];
        for k in 0..n {
            if k != i && ((lower && k < i) || (!lower && k > i)) {
                s -= t[(i, k)] * x[k];
            }
        }
        x[i] = s / t[(i, i)];
    }
    for (i, v) in x.into_iter().enumerate() {
        store(i, v);
    }
}

/// Inverse of a lower-triangular matrix, column by column.
pub fn trtri(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = DMatrix::zeros(n, n);
    for j in 0..n {
        let e = (0..n).map(|i| if i == j { 1.0 } else { 0.0 });
        solve_triangular(l, true, e, |i, v| x[(i, j)] = v);
    }
    x
}

//! Block-level kernels. Every function here works on one block of a compact
//! batch: each element is a tuple of `D` lanes, one lane per stage, and every
//! arithmetic operation is applied lane-wise.
//!
//! Mutable views are column-major with unit row stride. Read-only views carry
//! arbitrary strides, so a transposed operand is just a view with its strides
//! swapped.

use super::{KernelConfig, Side, Trans};

pub(crate) type Lanes<const D: usize> = [f64; D];

#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, const D: usize> {
    data: &'a [Lanes<D>],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, const D: usize> MatRef<'a, D> {
    pub(crate) fn new(data: &'a [Lanes<D>], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self { data, rows, cols, rs: 1, cs: rows }
    }

    #[inline(always)]
    pub(crate) fn at(&self, i: usize, l: usize) -> &Lanes<D> {
        &self.data[i * self.rs + l * self.cs]
    }

    pub(crate) fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    pub(crate) fn op(self, trans: Trans) -> Self {
        match trans {
            Trans::No => self,
            Trans::Yes => self.t(),
        }
    }

    pub(crate) fn sub(self, i0: usize, l0: usize, rows: usize, cols: usize) -> Self {
        debug_assert!(i0 + rows <= self.rows && l0 + cols <= self.cols);
        let start = if rows == 0 || cols == 0 { 0 } else { i0 * self.rs + l0 * self.cs };
        Self { data: &self.data[start..], rows, cols, rs: self.rs, cs: self.cs }
    }
}

pub(crate) struct MatMut<'a, const D: usize> {
    data: &'a mut [Lanes<D>],
    rows: usize,
    cols: usize,
    cs: usize,
}

impl<'a, const D: usize> MatMut<'a, D> {
    pub(crate) fn new(data: &'a mut [Lanes<D>], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self { data, rows, cols, cs: rows }
    }

    #[inline(always)]
    pub(crate) fn at(&mut self, i: usize, l: usize) -> &mut Lanes<D> {
        &mut self.data[i + l * self.cs]
    }

    #[inline(always)]
    pub(crate) fn get(&self, i: usize, l: usize) -> Lanes<D> {
        self.data[i + l * self.cs]
    }

    pub(crate) fn rb(&self) -> MatRef<'_, D> {
        MatRef { data: self.data, rows: self.rows, cols: self.cols, rs: 1, cs: self.cs }
    }

    /// Column `l` as a contiguous slice.
    #[inline(always)]
    fn col_mut(&mut self, l: usize) -> &mut [Lanes<D>] {
        let s = l * self.cs;
        &mut self.data[s..s + self.rows]
    }

    /// Columns `k` (shared) and `j > k` (mutable).
    #[inline(always)]
    fn col_pair(&mut self, k: usize, j: usize) -> (&[Lanes<D>], &mut [Lanes<D>]) {
        debug_assert!(k < j);
        let (lo, hi) = self.data.split_at_mut(j * self.cs);
        (&lo[k * self.cs..k * self.cs + self.rows], &mut hi[..self.rows])
    }
}

#[inline(always)]
fn splat<const D: usize>(v: f64) -> Lanes<D> {
    [v; D]
}

/// `y += a * x` lane-wise over two equally long columns.
#[inline(always)]
fn axpy<const D: usize>(y: &mut [Lanes<D>], a: &Lanes<D>, x: &[Lanes<D>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        for q in 0..D {
            yi[q] += a[q] * xi[q];
        }
    }
}

/// `y -= a * x` lane-wise.
#[inline(always)]
fn axmy<const D: usize>(y: &mut [Lanes<D>], a: &Lanes<D>, x: &[Lanes<D>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        for q in 0..D {
            yi[q] -= a[q] * xi[q];
        }
    }
}

/// Scales `c` by `beta` (writing exact zeros for `beta == 0`), optionally only
/// its lower triangle.
fn scale<const D: usize>(beta: f64, c: &mut MatMut<'_, D>, lower: bool) {
    if beta == 1.0 {
        return;
    }
    for l in 0..c.cols {
        let start = if lower { l.min(c.rows) } else { 0 };
        let col = c.col_mut(l);
        for v in &mut col[start..] {
            for q in 0..D {
                v[q] = if beta == 0.0 { 0.0 } else { beta * v[q] };
            }
        }
    }
}

/// Register tile: accumulates `MR × NR` lane tuples over `kb` steps.
///
/// Element `(r, p)` of the A panel lives at `a[a_off[r] + p * a_step]` and
/// element `(p, s)` of the B panel at `b[b_off[s] + p * b_step]`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro_tile<const MR: usize, const NR: usize, const D: usize>(
    kb: usize,
    a: &[Lanes<D>],
    a_off: &[usize; MR],
    a_step: usize,
    b: &[Lanes<D>],
    b_off: &[usize; NR],
    b_step: usize,
) -> [[Lanes<D>; NR]; MR] {
    let mut acc = [[[0.0; D]; NR]; MR];
    if kb == 0 {
        return acc;
    }
    // Bounds are established once here; the loop below stays in range.
    let a_max = a_off.iter().max().copied().unwrap_or(0) + (kb - 1) * a_step;
    let b_max = b_off.iter().max().copied().unwrap_or(0) + (kb - 1) * b_step;
    assert!(a_max < a.len() && b_max < b.len());
    for p in 0..kb {
        let mut av = [[0.0; D]; MR];
        let mut bv = [[0.0; D]; NR];
        for r in 0..MR {
            // SAFETY: a_off[r] + p * a_step <= a_max < a.len()
            av[r] = unsafe { *a.get_unchecked(a_off[r] + p * a_step) };
        }
        for s in 0..NR {
            // SAFETY: b_off[s] + p * b_step <= b_max < b.len()
            bv[s] = unsafe { *b.get_unchecked(b_off[s] + p * b_step) };
        }
        for r in 0..MR {
            for s in 0..NR {
                for q in 0..D {
                    acc[r][s][q] += av[r][q] * bv[s][q];
                }
            }
        }
    }
    acc
}

/// `C += alpha * A * B` over register tiles, optionally restricted to the lower
/// triangle of `C`. `C` must already hold `beta * C`.
fn tiled_update<const MR: usize, const NR: usize, const D: usize>(
    alpha: f64,
    a: MatRef<'_, D>,
    b: MatRef<'_, D>,
    c: &mut MatMut<'_, D>,
    cfg: &KernelConfig,
    lower: bool,
) {
    let (m, n, k) = (c.rows, c.cols, a.cols);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let alpha_v = splat::<D>(alpha);
    let mut pack_a: Vec<Lanes<D>> = Vec::new();
    let mut pack_b: Vec<Lanes<D>> = Vec::new();
    for pc in (0..k).step_by(cfg.block_k) {
        let kb = cfg.block_k.min(k - pc);
        for jc in (0..n).step_by(cfg.block_n) {
            let nb = cfg.block_n.min(n - jc);
            if cfg.packing {
                pack_b.clear();
                for l0 in (jc..jc + nb).step_by(NR) {
                    for p in pc..pc + kb {
                        for s in 0..NR {
                            pack_b.push(*b.at(p, (l0 + s).min(n - 1)));
                        }
                    }
                }
            }
            for ic in (0..m).step_by(cfg.block_m) {
                let mb = cfg.block_m.min(m - ic);
                if lower && ic + mb <= jc {
                    continue;
                }
                if cfg.packing {
                    pack_a.clear();
                    for i0 in (ic..ic + mb).step_by(MR) {
                        for p in pc..pc + kb {
                            for r in 0..MR {
                                pack_a.push(*a.at((i0 + r).min(m - 1), p));
                            }
                        }
                    }
                }
                for (pi, i0) in (ic..ic + mb).step_by(MR).enumerate() {
                    let mr = MR.min(ic + mb - i0);
                    for (pj, l0) in (jc..jc + nb).step_by(NR).enumerate() {
                        if lower && i0 + mr <= l0 {
                            continue;
                        }
                        let nr = NR.min(jc + nb - l0);
                        let acc = if cfg.packing {
                            let a_off: [usize; MR] = std::array::from_fn(|r| pi * MR * kb + r);
                            let b_off: [usize; NR] = std::array::from_fn(|s| pj * NR * kb + s);
                            micro_tile::<MR, NR, D>(kb, &pack_a, &a_off, MR, &pack_b, &b_off, NR)
                        } else {
                            let a_off: [usize; MR] =
                                std::array::from_fn(|r| (i0 + r).min(m - 1) * a.rs + pc * a.cs);
                            let b_off: [usize; NR] =
                                std::array::from_fn(|s| pc * b.rs + (l0 + s).min(n - 1) * b.cs);
                            micro_tile::<MR, NR, D>(kb, a.data, &a_off, a.cs, b.data, &b_off, b.rs)
                        };
                        for s in 0..nr {
                            for r in 0..mr {
                                let (i, l) = (i0 + r, l0 + s);
                                if lower && i < l {
                                    continue;
                                }
                                let v = &acc[r][s];
                                let dst = c.at(i, l);
                                for q in 0..D {
                                    dst[q] += alpha_v[q] * v[q];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn dispatch_tiled<const D: usize>(
    alpha: f64,
    a: MatRef<'_, D>,
    b: MatRef<'_, D>,
    c: &mut MatMut<'_, D>,
    cfg: &KernelConfig,
    lower: bool,
) {
    if cfg.micro_m == 5 {
        tiled_update::<5, 5, D>(alpha, a, b, c, cfg, lower)
    } else {
        tiled_update::<3, 3, D>(alpha, a, b, c, cfg, lower)
    }
}

/// `C ← alpha·A·B + beta·C` with `A`, `B` already in their operand form.
pub(crate) fn gemm<const D: usize>(
    alpha: f64,
    a: MatRef<'_, D>,
    b: MatRef<'_, D>,
    beta: f64,
    c: &mut MatMut<'_, D>,
    cfg: &KernelConfig,
) {
    debug_assert_eq!(a.rows, c.rows);
    debug_assert_eq!(b.cols, c.cols);
    debug_assert_eq!(a.cols, b.rows);
    scale(beta, c, false);
    if alpha == 0.0 {
        return;
    }
    if c.cols == 1 {
        gemv_acc(alpha, a, b, c);
        return;
    }
    dispatch_tiled(alpha, a, b, c, cfg, false);
}

/// `c += alpha·A·x` for a single column `x`.
fn gemv_acc<const D: usize>(alpha: f64, a: MatRef<'_, D>, x: MatRef<'_, D>, c: &mut MatMut<'_, D>) {
    let alpha_v = splat::<D>(alpha);
    let y = c.col_mut(0);
    if a.rs == 1 {
        // column-oriented: y += A(:, l) * x_l
        for l in 0..a.cols {
            let xl = x.at(l, 0);
            let mut s = [0.0; D];
            for q in 0..D {
                s[q] = alpha_v[q] * xl[q];
            }
            let col = &a.data[l * a.cs..l * a.cs + a.rows];
            axpy(y, &s, col);
        }
    } else {
        // row-oriented dot products
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = [0.0; D];
            for l in 0..a.cols {
                let av = a.at(i, l);
                let xv = x.at(l, 0);
                for q in 0..D {
                    acc[q] += av[q] * xv[q];
                }
            }
            for q in 0..D {
                yi[q] += alpha_v[q] * acc[q];
            }
        }
    }
}

/// `C ← alpha·A·Aᵀ + beta·C`, lower triangle only.
pub(crate) fn syrk<const D: usize>(
    alpha: f64,
    a: MatRef<'_, D>,
    beta: f64,
    c: &mut MatMut<'_, D>,
    cfg: &KernelConfig,
) {
    debug_assert_eq!(c.rows, c.cols);
    debug_assert_eq!(a.rows, c.rows);
    scale(beta, c, true);
    if alpha == 0.0 {
        return;
    }
    dispatch_tiled(alpha, a, a.t(), c, cfg, true);
}

/// In-place lower Cholesky factorization. Reads the lower triangle, writes `L`
/// there and zeroes the strict upper triangle.
///
/// Returns, per lane, the first row whose pivot was not strictly positive.
/// A failing lane continues with a unit pivot so that it cannot poison its
/// neighbours; its output is meaningless.
pub(crate) fn potrf<const D: usize>(c: &mut MatMut<'_, D>) -> [Option<usize>; D] {
    let n = c.rows;
    debug_assert_eq!(n, c.cols);
    let mut failed = [None; D];
    for k in 0..n {
        let mut piv = c.get(k, k);
        for q in 0..D {
            if !(piv[q] > 0.0 && piv[q].is_finite()) {
                failed[q].get_or_insert(k);
                piv[q] = 1.0;
            }
            piv[q] = piv[q].sqrt();
        }
        let mut inv = [0.0; D];
        for q in 0..D {
            inv[q] = 1.0 / piv[q];
        }
        {
            let col = c.col_mut(k);
            col[k] = piv;
            for v in &mut col[k + 1..] {
                for q in 0..D {
                    v[q] *= inv[q];
                }
            }
        }
        for j in k + 1..n {
            let (ck, cj) = c.col_pair(k, j);
            let ljk = ck[j];
            axmy(&mut cj[j..], &ljk, &ck[j..]);
        }
    }
    for l in 1..n {
        for v in &mut c.col_mut(l)[..l] {
            *v = [0.0; D];
        }
    }
    failed
}

/// Diagonal entry `k` of `l` with zero lanes replaced by one, so that lanes
/// with a singular factor stay finite and never disturb their neighbours.
#[inline(always)]
fn safe_diag<const D: usize>(l: &MatRef<'_, D>, k: usize) -> Lanes<D> {
    let mut d = *l.at(k, k);
    for v in &mut d {
        if *v == 0.0 {
            *v = 1.0;
        }
    }
    d
}

fn check_diag<const D: usize>(l: &MatRef<'_, D>) -> [Option<usize>; D] {
    let mut bad = [None; D];
    for k in 0..l.rows {
        let v = l.at(k, k);
        for q in 0..D {
            if v[q] == 0.0 {
                bad[q].get_or_insert(k);
            }
        }
    }
    bad
}

/// Triangular solve with a lower-triangular `l`, in place on `b`:
///
/// * `Left,  No`:  `B ← L⁻¹ B`
/// * `Left,  Yes`: `B ← L⁻ᵀ B`
/// * `Right, No`:  `B ← B L⁻¹`
/// * `Right, Yes`: `B ← B L⁻ᵀ`
///
/// Returns per lane the first zero diagonal row, if any; such lanes are left
/// with non-finite values.
pub(crate) fn trsm<const D: usize>(
    l: MatRef<'_, D>,
    side: Side,
    trans: Trans,
    b: &mut MatMut<'_, D>,
) -> [Option<usize>; D] {
    let n = l.rows;
    debug_assert_eq!(n, l.cols);
    let bad = check_diag(&l);
    match (side, trans) {
        (Side::Left, Trans::No) => {
            debug_assert_eq!(b.rows, n);
            for c in 0..b.cols {
                let col = b.col_mut(c);
                for k in 0..n {
                    let d = safe_diag(&l, k);
                    let mut xk = col[k];
                    for q in 0..D {
                        xk[q] /= d[q];
                    }
                    col[k] = xk;
                    for i in k + 1..n {
                        let lik = l.at(i, k);
                        for q in 0..D {
                            col[i][q] -= lik[q] * xk[q];
                        }
                    }
                }
            }
        }
        (Side::Left, Trans::Yes) => {
            debug_assert_eq!(b.rows, n);
            for c in 0..b.cols {
                let col = b.col_mut(c);
                for k in (0..n).rev() {
                    let mut s = col[k];
                    for i in k + 1..n {
                        let lik = l.at(i, k);
                        for q in 0..D {
                            s[q] -= lik[q] * col[i][q];
                        }
                    }
                    let d = safe_diag(&l, k);
                    for q in 0..D {
                        s[q] /= d[q];
                    }
                    col[k] = s;
                }
            }
        }
        (Side::Right, Trans::Yes) => {
            // X Lᵀ = B, column k of X depends on columns < k
            debug_assert_eq!(b.cols, n);
            for k in 0..n {
                let d = safe_diag(&l, k);
                for v in b.col_mut(k) {
                    for q in 0..D {
                        v[q] /= d[q];
                    }
                }
                for j in k + 1..n {
                    let ljk = *l.at(j, k);
                    let (xk, bj) = b.col_pair(k, j);
                    axmy(bj, &ljk, xk);
                }
            }
        }
        (Side::Right, Trans::No) => {
            // X L = B, column k of X depends on columns > k
            debug_assert_eq!(b.cols, n);
            for k in (0..n).rev() {
                for j in k + 1..n {
                    let ljk = *l.at(j, k);
                    let (bk, xj) = {
                        let (lo, hi) = b.data.split_at_mut(j * b.cs);
                        (&mut lo[k * b.cs..k * b.cs + b.rows], &hi[..b.rows])
                    };
                    axmy(bk, &ljk, xj);
                }
                let d = safe_diag(&l, k);
                for v in b.col_mut(k) {
                    for q in 0..D {
                        v[q] /= d[q];
                    }
                }
            }
        }
    }
    bad
}

/// Inverse of a lower-triangular `l` written to `out` (strict upper zeroed).
pub(crate) fn trtri<const D: usize>(l: MatRef<'_, D>, out: &mut MatMut<'_, D>) -> [Option<usize>; D] {
    let n = l.rows;
    debug_assert_eq!((out.rows, out.cols), (n, n));
    let bad = check_diag(&l);
    for j in 0..n {
        let col = out.col_mut(j);
        for v in &mut col[..j] {
            *v = [0.0; D];
        }
        let d = safe_diag(&l, j);
        let mut xjj = [0.0; D];
        for q in 0..D {
            xjj[q] = 1.0 / d[q];
        }
        col[j] = xjj;
        for i in j + 1..n {
            let mut s = [0.0; D];
            for k in j..i {
                let lik = l.at(i, k);
                for q in 0..D {
                    s[q] += lik[q] * col[k][q];
                }
            }
            let d = safe_diag(&l, i);
            for q in 0..D {
                col[i][q] = -s[q] / d[q];
            }
        }
    }
    bad
}

/// Copies `src` into `dst` (same shape).
pub(crate) fn copy<const D: usize>(src: MatRef<'_, D>, dst: &mut MatMut<'_, D>) {
    debug_assert_eq!((src.rows, src.cols), (dst.rows, dst.cols));
    for l in 0..dst.cols {
        for i in 0..dst.rows {
            *dst.at(i, l) = *src.at(i, l);
        }
    }
}

/// Mirrors the lower triangle into the upper one.
pub(crate) fn symmetrize_lower<const D: usize>(c: &mut MatMut<'_, D>) {
    for l in 0..c.cols {
        for i in 0..l {
            let v = c.get(l, i);
            *c.at(i, l) = v;
        }
    }
}

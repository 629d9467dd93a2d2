//! Batch-level entry points: validate shapes, then run the block kernel over
//! every block of the batch with the lane width resolved at compile time.

use super::kernels;
use super::{with_lanes, CompactBatch, KernelConfig, KernelError, Side, Trans};

fn op_shape(b: &CompactBatch, t: Trans) -> (usize, usize) {
    match t {
        Trans::No => (b.rows(), b.cols()),
        Trans::Yes => (b.cols(), b.rows()),
    }
}

fn check_layout(what: &str, a: &CompactBatch, c: &CompactBatch) -> Result<(), KernelError> {
    if a.same_layout(c) {
        Ok(())
    } else {
        Err(KernelError::ShapeMismatch(format!(
            "{what}: batches differ in lane width or block count ({}x{} vs {}x{})",
            a.lane_width(),
            a.nblocks(),
            c.lane_width(),
            c.nblocks()
        )))
    }
}

/// First failing stage among the filled stages of a batch.
fn first_failure<const D: usize>(
    b: usize,
    stages: usize,
    lanes: &[Option<usize>; D],
) -> Option<(usize, usize)> {
    lanes
        .iter()
        .enumerate()
        .filter_map(|(q, row)| row.map(|r| (b * D + q, r)))
        .find(|&(stage, _)| stage < stages)
}

/// Per lane `C_j ← alpha·op(A_j)·op(B_j) + beta·C_j`.
pub fn batch_gemm(
    alpha: f64,
    a: &CompactBatch,
    trans_a: Trans,
    b: &CompactBatch,
    trans_b: Trans,
    beta: f64,
    c: &mut CompactBatch,
) -> Result<(), KernelError> {
    let (m, k) = op_shape(a, trans_a);
    let cfg = KernelConfig::for_shape(m, op_shape(b, trans_b).1, k);
    batch_gemm_with(&cfg, alpha, a, trans_a, b, trans_b, beta, c)
}

/// [`batch_gemm`] with an explicit kernel configuration.
#[allow(clippy::too_many_arguments)]
pub fn batch_gemm_with(
    cfg: &KernelConfig,
    alpha: f64,
    a: &CompactBatch,
    trans_a: Trans,
    b: &CompactBatch,
    trans_b: Trans,
    beta: f64,
    c: &mut CompactBatch,
) -> Result<(), KernelError> {
    cfg.validate()?;
    check_layout("gemm", a, c)?;
    check_layout("gemm", b, c)?;
    let (m, k) = op_shape(a, trans_a);
    let (k2, n) = op_shape(b, trans_b);
    if k != k2 || (m, n) != (c.rows(), c.cols()) {
        return Err(KernelError::ShapeMismatch(format!(
            "gemm: {m}x{k} times {k2}x{n} into {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    with_lanes!(c.lane_width(), D => {
        for blk in 0..c.nblocks() {
            let av = a.block_view::<D>(blk).op(trans_a);
            let bv = b.block_view::<D>(blk).op(trans_b);
            kernels::gemm::<D>(alpha, av, bv, beta, &mut c.block_view_mut::<D>(blk), cfg);
        }
    });
    Ok(())
}

/// Per lane `C_j ← alpha·op(A_j)·op(A_j)ᵀ + beta·C_j` on the lower triangle.
/// `trans = Yes` computes `A_jᵀ·A_j`.
pub fn batch_syrk(
    alpha: f64,
    a: &CompactBatch,
    trans: Trans,
    beta: f64,
    c: &mut CompactBatch,
) -> Result<(), KernelError> {
    let (m, k) = op_shape(a, trans);
    batch_syrk_with(&KernelConfig::for_shape(m, m, k), alpha, a, trans, beta, c)
}

pub fn batch_syrk_with(
    cfg: &KernelConfig,
    alpha: f64,
    a: &CompactBatch,
    trans: Trans,
    beta: f64,
    c: &mut CompactBatch,
) -> Result<(), KernelError> {
    cfg.validate()?;
    check_layout("syrk", a, c)?;
    let (m, _) = op_shape(a, trans);
    if c.rows() != c.cols() || c.rows() != m {
        return Err(KernelError::ShapeMismatch(format!(
            "syrk: operand with {m} rows into {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    with_lanes!(c.lane_width(), D => {
        for blk in 0..c.nblocks() {
            let av = a.block_view::<D>(blk).op(trans);
            kernels::syrk::<D>(alpha, av, beta, &mut c.block_view_mut::<D>(blk), cfg);
        }
    });
    Ok(())
}

/// In-place lower Cholesky factorization of every lane. All lanes are
/// processed even when one fails; the error names the first failing stage.
pub fn batch_potrf(c: &mut CompactBatch) -> Result<(), KernelError> {
    if c.rows() != c.cols() {
        return Err(KernelError::ShapeMismatch(format!(
            "potrf: {}x{} is not square",
            c.rows(),
            c.cols()
        )));
    }
    let stages = c.stages();
    let mut failure = None;
    with_lanes!(c.lane_width(), D => {
        for blk in 0..c.nblocks() {
            let lanes = kernels::potrf::<D>(&mut c.block_view_mut::<D>(blk));
            if failure.is_none() {
                failure = first_failure::<D>(blk, stages, &lanes);
            }
        }
    });
    match failure {
        Some((stage, row)) => Err(KernelError::NonPositivePivot { stage, row }),
        None => Ok(()),
    }
}

/// Triangular solve with the lower-triangular lanes of `l`, in place on `b`.
/// See the side/transpose table on the block kernel.
pub fn batch_trsm(
    l: &CompactBatch,
    side: Side,
    trans: Trans,
    b: &mut CompactBatch,
) -> Result<(), KernelError> {
    check_layout("trsm", l, b)?;
    let n = l.rows();
    let conforming = l.cols() == n
        && match side {
            Side::Left => b.rows() == n,
            Side::Right => b.cols() == n,
        };
    if !conforming {
        return Err(KernelError::ShapeMismatch(format!(
            "trsm: {}x{} factor with {}x{} right-hand side",
            l.rows(),
            l.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let stages = b.stages();
    let mut failure = None;
    with_lanes!(b.lane_width(), D => {
        for blk in 0..b.nblocks() {
            let lanes = kernels::trsm::<D>(l.block_view::<D>(blk), side, trans, &mut b.block_view_mut::<D>(blk));
            if failure.is_none() {
                failure = first_failure::<D>(blk, stages, &lanes);
            }
        }
    });
    match failure {
        Some((stage, row)) => Err(KernelError::ZeroDiagonal { stage, row }),
        None => Ok(()),
    }
}

/// Lane-wise inverse of lower-triangular matrices.
pub fn batch_trtri(l: &CompactBatch) -> Result<CompactBatch, KernelError> {
    if l.rows() != l.cols() {
        return Err(KernelError::ShapeMismatch(format!(
            "trtri: {}x{} is not square",
            l.rows(),
            l.cols()
        )));
    }
    let mut out = CompactBatch::zeros(l.rows(), l.cols(), l.stages(), l.lane_width())?;
    let stages = l.stages();
    let mut failure = None;
    with_lanes!(l.lane_width(), D => {
        for blk in 0..l.nblocks() {
            let lanes = kernels::trtri::<D>(l.block_view::<D>(blk), &mut out.block_view_mut::<D>(blk));
            if failure.is_none() {
                failure = first_failure::<D>(blk, stages, &lanes);
            }
        }
    });
    match failure {
        Some((stage, row)) => Err(KernelError::ZeroDiagonal { stage, row }),
        None => Ok(out),
    }
}

//! Compact interleaved storage for batches of small matrices.
//!
//! A [`CompactBatch`] holds one `rows × cols` matrix per stage. Stages are
//! grouped into blocks of `d` consecutive stages, and the `d` copies of every
//! element `(i, l)` within a block sit next to each other in memory:
//!
//! ```text
//! flat(i, l, j) = ((j / d) * cols * rows + l * rows + i) * d + (j % d)
//! ```
//!
//! With this layout a single vector instruction touches the same element of
//! `d` different stages, so the batched kernels in this module process `d`
//! stages per instruction stream. With `d = 1` the layout degenerates to the
//! usual stage-contiguous column-major ("naive") storage.

mod batch;
pub(crate) mod kernels;
pub mod reference;

pub use batch::{
    batch_gemm, batch_gemm_with, batch_potrf, batch_syrk, batch_syrk_with, batch_trsm,
    batch_trtri,
};

use nalgebra::DMatrix;
use thiserror::Error;

/// Lane widths supported by the kernels.
pub const LANE_WIDTHS: [usize; 4] = [1, 2, 4, 8];

/// Whether an operand enters a kernel transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// Side on which the triangular factor multiplies in `batch_trsm`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("lane width {0} is not one of 1, 2, 4, 8")]
    InvalidLaneWidth(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-positive pivot at stage {stage}, row {row}")]
    NonPositivePivot { stage: usize, row: usize },
    #[error("zero diagonal at stage {stage}, row {row}")]
    ZeroDiagonal { stage: usize, row: usize },
}

pub(crate) fn check_lane_width(d: usize) -> Result<(), KernelError> {
    if LANE_WIDTHS.contains(&d) {
        Ok(())
    } else {
        Err(KernelError::InvalidLaneWidth(d))
    }
}

/// Tiling and blocking parameters of the batched matrix kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelConfig {
    /// Rows of the register accumulator tile.
    pub micro_m: usize,
    /// Columns of the register accumulator tile.
    pub micro_n: usize,
    pub block_k: usize,
    pub block_m: usize,
    pub block_n: usize,
    /// Copy operand panels into contiguous buffers before the micro-kernel runs.
    pub packing: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            micro_m: 3,
            micro_n: 3,
            block_k: 128,
            block_m: 96,
            block_n: 96,
            packing: false,
        }
    }
}

impl KernelConfig {
    /// Configuration picked for an `m × n` result with inner dimension `k`.
    ///
    /// Uses the 5×5 tile once the result has at least 64 entries per lane and
    /// packs operands only when the `A` operand exceeds one `block_k × block_m`
    /// panel.
    pub fn for_shape(m: usize, n: usize, k: usize) -> Self {
        let mut cfg = Self::default();
        if m * n >= 64 {
            cfg.micro_m = 5;
            cfg.micro_n = 5;
        }
        cfg.packing = m * k >= cfg.block_k * cfg.block_m;
        cfg
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let tile = (self.micro_m, self.micro_n);
        if tile != (3, 3) && tile != (5, 5) {
            return Err(KernelError::ShapeMismatch(format!(
                "micro tile {}x{} is not 3x3 or 5x5",
                self.micro_m, self.micro_n
            )));
        }
        if self.block_k == 0 || self.block_m == 0 || self.block_n == 0 {
            return Err(KernelError::ShapeMismatch("blocking sizes must be positive".into()));
        }
        Ok(())
    }
}

/// A batch of equally shaped matrices in compact interleaved layout.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactBatch {
    rows: usize,
    cols: usize,
    stages: usize,
    d: usize,
    nblocks: usize,
    data: Vec<f64>,
}

impl CompactBatch {
    /// All-zero batch holding `stages` matrices in blocks of `d` lanes.
    pub fn zeros(rows: usize, cols: usize, stages: usize, d: usize) -> Result<Self, KernelError> {
        check_lane_width(d)?;
        let nblocks = stages.div_ceil(d);
        Ok(Self {
            rows,
            cols,
            stages,
            d,
            nblocks,
            data: vec![0.0; rows * cols * nblocks * d],
        })
    }

    /// Interleaves `matrices` into compact layout. Unfilled lanes of the last
    /// block are zero.
    pub fn pack(matrices: &[DMatrix<f64>], d: usize) -> Result<Self, KernelError> {
        let (rows, cols) = matrices.first().map(|m| m.shape()).unwrap_or((0, 0));
        Self::pack_shaped(rows, cols, matrices, d)
    }

    /// Like [`CompactBatch::pack`] but with an explicit shape, so that an empty
    /// sequence or zero-sized matrices are representable.
    pub fn pack_shaped(
        rows: usize,
        cols: usize,
        matrices: &[DMatrix<f64>],
        d: usize,
    ) -> Result<Self, KernelError> {
        let mut batch = Self::zeros(rows, cols, matrices.len(), d)?;
        for (j, m) in matrices.iter().enumerate() {
            batch.set_stage(j, m)?;
        }
        Ok(batch)
    }

    /// Splits the batch back into one naive column-major matrix per stage.
    pub fn unpack(&self) -> Vec<DMatrix<f64>> {
        (0..self.stages).map(|j| self.stage(j)).collect()
    }

    /// Copy of the matrix of stage `j`.
    pub fn stage(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, l| self.get(i, l, j))
    }

    pub fn set_stage(&mut self, j: usize, m: &DMatrix<f64>) -> Result<(), KernelError> {
        if m.shape() != (self.rows, self.cols) {
            return Err(KernelError::ShapeMismatch(format!(
                "stage {j}: expected {}x{}, got {}x{}",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        if j >= self.nblocks * self.d {
            return Err(KernelError::ShapeMismatch(format!(
                "stage {j} outside batch of {} slots",
                self.nblocks * self.d
            )));
        }
        for l in 0..self.cols {
            for i in 0..self.rows {
                let idx = self.index(i, l, j);
                self.data[idx] = m[(i, l)];
            }
        }
        Ok(())
    }

    /// Flat buffer index of element `(i, l)` of stage `j`.
    #[inline]
    pub fn index(&self, i: usize, l: usize, j: usize) -> usize {
        ((j / self.d) * self.cols * self.rows + l * self.rows + i) * self.d + (j % self.d)
    }

    #[inline]
    pub fn get(&self, i: usize, l: usize, j: usize) -> f64 {
        self.data[self.index(i, l, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, l: usize, j: usize, value: f64) {
        let idx = self.index(i, l, j);
        self.data[idx] = value;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stages the batch was created for.
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Total stage slots, `nblocks * d`.
    pub fn slots(&self) -> usize {
        self.nblocks * self.d
    }

    pub fn lane_width(&self) -> usize {
        self.d
    }

    pub fn nblocks(&self) -> usize {
        self.nblocks
    }

    /// Number of `f64` values in one block.
    pub fn block_len(&self) -> usize {
        self.rows * self.cols * self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    /// Same contents repacked with lane width `d`.
    pub fn with_lane_width(&self, d: usize) -> Result<Self, KernelError> {
        let mut out = Self::zeros(self.rows, self.cols, self.stages, d)?;
        for j in 0..self.stages {
            for l in 0..self.cols {
                for i in 0..self.rows {
                    out.set(i, l, j, self.get(i, l, j));
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn same_layout(&self, other: &Self) -> bool {
        self.d == other.d && self.nblocks == other.nblocks
    }

    pub(crate) fn block_view<const D: usize>(&self, b: usize) -> kernels::MatRef<'_, D> {
        debug_assert_eq!(D, self.d);
        let len = self.block_len();
        let (tuples, _) = self.data[b * len..(b + 1) * len].as_chunks::<D>();
        kernels::MatRef::new(tuples, self.rows, self.cols)
    }

    pub(crate) fn block_view_mut<const D: usize>(&mut self, b: usize) -> kernels::MatMut<'_, D> {
        debug_assert_eq!(D, self.d);
        let len = self.block_len();
        let (rows, cols) = (self.rows, self.cols);
        let (tuples, _) = self.data[b * len..(b + 1) * len].as_chunks_mut::<D>();
        kernels::MatMut::new(tuples, rows, cols)
    }
}

/// Runs `$body` with `$D` bound to the compile-time lane width matching `$d`.
macro_rules! with_lanes {
    ($d:expr, $D:ident => $body:expr) => {
        match $d {
            1 => {
                const $D: usize = 1;
                $body
            }
            2 => {
                const $D: usize = 2;
                $body
            }
            4 => {
                const $D: usize = 4;
                $body
            }
            8 => {
                const $D: usize = 8;
                $body
            }
            other => panic!("unsupported lane width {other}"),
        }
    };
}
pub(crate) use with_lanes;

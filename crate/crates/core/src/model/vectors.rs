//! Stage-blocked vectors in compact layout.
//!
//! Each vector is a [`CompactBatch`] with one column. Entries that have no
//! logical counterpart (terminal inputs, padded constraint rows, filler
//! stages) are kept at zero by the solver, so whole-buffer reductions such as
//! norms and dot products equal their logical values.

use super::{ModelError, OcpDims};
use crate::compact::CompactBatch;

fn to_logical(batch: &CompactBatch, rows_at: impl Fn(usize) -> usize, stages: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..stages {
        for i in 0..rows_at(j) {
            out.push(batch.get(i, 0, j));
        }
    }
    out
}

fn set_logical(
    batch: &mut CompactBatch,
    rows_at: impl Fn(usize) -> usize,
    stages: usize,
    values: &[f64],
) -> Result<(), ModelError> {
    let total: usize = (0..stages).map(&rows_at).sum();
    if values.len() != total {
        return Err(ModelError::DimensionMismatch(format!(
            "vector has {} entries, expected {total}",
            values.len()
        )));
    }
    let mut it = values.iter();
    for j in 0..stages {
        for i in 0..rows_at(j) {
            batch.set(i, 0, j, *it.next().unwrap());
        }
    }
    Ok(())
}

macro_rules! stage_vector {
    ($(#[$doc:meta])* $name:ident, $rows:expr, $rows_at:expr) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            batch: CompactBatch,
        }

        impl $name {
            pub fn zeros(dims: &OcpDims) -> Self {
                let rows: fn(&OcpDims) -> usize = $rows;
                Self {
                    batch: CompactBatch::zeros(rows(dims), 1, dims.stages(), dims.lanes)
                        .expect("lane width checked by OcpDims"),
                }
            }

            pub fn from_batch(batch: CompactBatch) -> Self {
                Self { batch }
            }

            /// Builds the vector from its logical (unpadded, stage-ordered) entries.
            pub fn from_logical(dims: &OcpDims, values: &[f64]) -> Result<Self, ModelError> {
                let mut v = Self::zeros(dims);
                v.set_logical(dims, values)?;
                Ok(v)
            }

            pub fn set_logical(&mut self, dims: &OcpDims, values: &[f64]) -> Result<(), ModelError> {
                let rows_at: fn(&OcpDims, usize) -> usize = $rows_at;
                set_logical(&mut self.batch, |j| rows_at(dims, j), dims.stages(), values)
            }

            /// Logical entries in stage order.
            pub fn to_logical(&self, dims: &OcpDims) -> Vec<f64> {
                let rows_at: fn(&OcpDims, usize) -> usize = $rows_at;
                to_logical(&self.batch, |j| rows_at(dims, j), dims.stages())
            }

            pub fn batch(&self) -> &CompactBatch {
                &self.batch
            }

            pub fn batch_mut(&mut self) -> &mut CompactBatch {
                &mut self.batch
            }

            pub fn into_batch(self) -> CompactBatch {
                self.batch
            }

            pub fn as_slice(&self) -> &[f64] {
                self.batch.as_slice()
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                self.batch.as_mut_slice()
            }

            pub(crate) fn conforms(&self, dims: &OcpDims) -> bool {
                let rows: fn(&OcpDims) -> usize = $rows;
                self.batch.rows() == rows(dims)
                    && self.batch.cols() == 1
                    && self.batch.lane_width() == dims.lanes
                    && self.batch.nblocks() == dims.nblocks()
            }

            pub fn fill(&mut self, v: f64) {
                self.batch.fill(v);
            }

            pub fn copy_from(&mut self, other: &Self) {
                self.as_mut_slice().copy_from_slice(other.as_slice());
            }

            /// `self += alpha * other`.
            pub fn axpy(&mut self, alpha: f64, other: &Self) {
                for (a, b) in self.as_mut_slice().iter_mut().zip(other.as_slice()) {
                    *a += alpha * b;
                }
            }

            pub fn scale(&mut self, alpha: f64) {
                for a in self.as_mut_slice() {
                    *a *= alpha;
                }
            }

            pub fn dot(&self, other: &Self) -> f64 {
                self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
            }

            pub fn norm_inf(&self) -> f64 {
                self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    };
}

stage_vector!(
    /// Primal vector `(x⁰, u⁰, …, x^N)`, one `(n_x + n_u)`-block per stage.
    PrimalVector,
    |d| d.nxu(),
    |d, j| d.nx + d.nu_at(j)
);
stage_vector!(
    /// Equality multipliers / residuals, one `n_x`-block per stage.
    DualEqVector,
    |d| d.nx,
    |d, j| if j <= d.horizon { d.nx } else { 0 }
);
stage_vector!(
    /// Inequality multipliers / constraint values, one padded row block per stage.
    DualIneqVector,
    |d| d.ny_padded(),
    |d, j| d.ny_at(j)
);

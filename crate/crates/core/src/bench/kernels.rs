//! Throughput of the batched kernels on square stage matrices.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::BenchError;
use crate::compact::{batch_gemm, batch_potrf, batch_syrk, batch_trsm, batch_trtri, CompactBatch, Side, Trans};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kernel {
    Gemm,
    Syrk,
    Potrf,
    Trsm,
    Trtri,
}

pub const KERNELS: [Kernel; 5] = [Kernel::Gemm, Kernel::Syrk, Kernel::Potrf, Kernel::Trsm, Kernel::Trtri];

impl Kernel {
    /// Floating-point operations for one `n × n` matrix.
    pub fn flops(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Kernel::Gemm => 2.0 * n * n * n,
            Kernel::Syrk => n * n * (n + 1.0),
            Kernel::Potrf | Kernel::Trtri => n * n * n / 3.0,
            Kernel::Trsm => n * n * n,
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kernel::Gemm => "gemm",
            Kernel::Syrk => "syrk",
            Kernel::Potrf => "potrf",
            Kernel::Trsm => "trsm",
            Kernel::Trtri => "trtri",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelBenchResult {
    pub kernel: Kernel,
    pub size: usize,
    pub lanes: usize,
    pub stages: usize,
    /// Time per stage matrix.
    pub ns_per_matrix: f64,
    pub gflops: f64,
}

fn spd_batch(rng: &mut ChaCha8Rng, n: usize, stages: usize, lanes: usize) -> Result<CompactBatch, BenchError> {
    let mats: Vec<DMatrix<f64>> = (0..stages)
        .map(|_| {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            a.transpose() * &a + DMatrix::identity(n, n) * n as f64
        })
        .collect();
    Ok(CompactBatch::pack(&mats, lanes)?)
}

/// Times `kernel` on `stages` random `n × n` matrices in lane width `lanes`,
/// repeating until at least `min_seconds` have elapsed.
pub fn bench_kernel(
    kernel: Kernel,
    n: usize,
    lanes: usize,
    stages: usize,
    min_seconds: f64,
) -> Result<KernelBenchResult, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let a = spd_batch(&mut rng, n, stages, lanes)?;
    let mut l = a.clone();
    batch_potrf(&mut l)?;
    let mut c = a.clone();
    let mut reps = 0u64;
    let t0 = Instant::now();
    loop {
        match kernel {
            Kernel::Gemm => batch_gemm(1.0, &a, Trans::No, &l, Trans::Yes, 0.0, &mut c)?,
            Kernel::Syrk => batch_syrk(1.0, &a, Trans::No, 0.0, &mut c)?,
            Kernel::Potrf => {
                c.as_mut_slice().copy_from_slice(a.as_slice());
                batch_potrf(&mut c)?
            }
            Kernel::Trsm => {
                c.as_mut_slice().copy_from_slice(a.as_slice());
                batch_trsm(&l, Side::Left, Trans::No, &mut c)?
            }
            Kernel::Trtri => c = batch_trtri(&l)?,
        }
        reps += 1;
        if t0.elapsed().as_secs_f64() >= min_seconds {
            break;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let matrices = (reps * stages as u64) as f64;
    Ok(KernelBenchResult {
        kernel,
        size: n,
        lanes,
        stages,
        ns_per_matrix: secs * 1e9 / matrices,
        gflops: kernel.flops(n) * matrices / secs / 1e9,
    })
}

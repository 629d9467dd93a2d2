//! Batched Cholesky factorization and triangular solve over many small
//! matrices, checked against nalgebra one stage at a time.

use nalgebra::DMatrix;
use ocpqp::compact::{batch_gemm, batch_potrf, batch_trsm, CompactBatch, Side, Trans};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, stages, d) = (6, 11, 4);
    let random = |rng: &mut ChaCha8Rng, r, c| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let a: Vec<DMatrix<f64>> = (0..stages)
        .map(|_| {
            let f = random(&mut rng, n, n);
            &f * f.transpose() + DMatrix::identity(n, n)
        })
        .collect();
    let rhs: Vec<DMatrix<f64>> = (0..stages).map(|_| random(&mut rng, n, 2)).collect();

    // A = LLᵀ, then X = L⁻ᵀ L⁻¹ B
    let mut l = CompactBatch::pack(&a, d)?;
    batch_potrf(&mut l)?;
    let mut x = CompactBatch::pack(&rhs, d)?;
    batch_trsm(&l, Side::Left, Trans::No, &mut x)?;
    batch_trsm(&l, Side::Left, Trans::Yes, &mut x)?;

    // residual A X − B through the batched gemm
    let mut r = CompactBatch::pack(&rhs, d)?;
    batch_gemm(1.0, &CompactBatch::pack(&a, d)?, Trans::No, &x, Trans::No, -1.0, &mut r)?;
    for j in 0..stages {
        let want = a[j].clone().cholesky().unwrap().solve(&rhs[j]);
        println!(
            "stage {j:2}: |AX - B| {:.1e}   |X - X_nalgebra| {:.1e}",
            r.stage(j).amax(),
            (x.stage(j) - want).amax()
        );
    }
    Ok(())
}

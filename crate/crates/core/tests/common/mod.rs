#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `AᵀA + n·I`, comfortably positive definite.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    a.transpose() * &a + DMatrix::identity(n, n) * n as f64
}

/// Well-conditioned lower-triangular matrix with diagonal in [1, 2].
pub fn random_lower(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.gen_range(1.0..2.0)
        } else if i > j {
            rng.gen_range(-0.5..0.5)
        } else {
            0.0
        }
    })
}

/// Largest elementwise error `|x − r| / (|r| + scale)`, with `scale` giving the
/// magnitude below which an entry counts as zero.
pub fn max_rel_err(x: &DMatrix<f64>, r: &DMatrix<f64>, scale: &DMatrix<f64>) -> f64 {
    assert_eq!(x.shape(), r.shape());
    x.iter()
        .zip(r.iter())
        .zip(scale.iter())
        .map(|((a, b), s)| {
            let den = b.abs() + s;
            if den == 0.0 {
                (a - b).abs()
            } else {
                (a - b).abs() / den
            }
        })
        .fold(0.0, f64::max)
}

/// Uniform zero floor at `frac` of the largest entry of `r`.
pub fn floor_of(r: &DMatrix<f64>, frac: f64) -> DMatrix<f64> {
    DMatrix::from_element(r.nrows(), r.ncols(), r.amax() * frac)
}

pub fn lower_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i >= j { m[(i, j)] } else { 0.0 })
}

pub mod newton;
pub mod ocp;
pub mod oracle;

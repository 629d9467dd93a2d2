//! Random feasible OCP instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::{OcpData, StageData, TerminalData};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomOcpConfig {
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    pub ny: usize,
    pub ny_terminal: usize,
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random instance around a feasible rollout.
///
/// `A` is rescaled to spectral radius at most 0.95, `R` is positive definite
/// and `Q` positive semidefinite. The bounds enclose `[C D]` applied to a
/// rollout under random inputs, each side at a distance drawn from
/// `[0.1, 1]·margin`; `margin = ∞` gives an unconstrained instance.
pub fn gen_random_ocp(cfg: &RandomOcpConfig, seed: u64, margin: f64) -> Result<OcpData, BenchError> {
    let RandomOcpConfig { horizon, nx, nu, ny, ny_terminal } = *cfg;
    if horizon == 0 || nx == 0 || nu == 0 {
        return Err(BenchError::InvalidConfig("horizon, nx and nu must be positive".into()));
    }
    if !(margin >= 0.0) {
        return Err(BenchError::InvalidConfig("margin must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_init = vector(&mut rng, nx);
    let mut x = x_init.clone();
    let mut stages = Vec::with_capacity(horizon);
    let side = |rng: &mut ChaCha8Rng, g: f64, sign: f64| {
        if margin.is_infinite() {
            sign * f64::INFINITY
        } else {
            g + sign * margin * rng.gen_range(0.1..=1.0)
        }
    };
    for _ in 0..horizon {
        let mut a = matrix(&mut rng, nx, nx);
        let rho = a.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max);
        if rho > 0.95 {
            a *= 0.95 / rho;
        }
        let b = matrix(&mut rng, nx, nu);
        // Q = FᵀF with F of rank ⌈nx/2⌉ is only semidefinite
        let f = matrix(&mut rng, nx.div_ceil(2), nx);
        let g = matrix(&mut rng, nu, nu);
        let r = g.transpose() * &g + DMatrix::identity(nu, nu) * 0.1;
        let c = matrix(&mut rng, ny, nx);
        let d = matrix(&mut rng, ny, nu);
        let u = vector(&mut rng, nu) * 0.5;
        let gx = &c * &x + &d * &u;
        let lower = DVector::from_fn(ny, |i, _| side(&mut rng, gx[i], -1.0));
        let upper = DVector::from_fn(ny, |i, _| side(&mut rng, gx[i], 1.0));
        let offset = vector(&mut rng, nx) * 0.1;
        x = &a * &x + &b * &u + &offset;
        stages.push(StageData {
            q: f.transpose() * f,
            s: DMatrix::zeros(nu, nx),
            r,
            q_lin: vector(&mut rng, nx),
            r_lin: vector(&mut rng, nu),
            a,
            b,
            offset,
            c,
            d,
            lower,
            upper,
        });
    }
    let ft = matrix(&mut rng, nx, nx);
    let ct = matrix(&mut rng, ny_terminal, nx);
    let gx = &ct * &x;
    let lower = DVector::from_fn(ny_terminal, |i, _| side(&mut rng, gx[i], -1.0));
    let upper = DVector::from_fn(ny_terminal, |i, _| side(&mut rng, gx[i], 1.0));
    Ok(OcpData {
        stages,
        terminal: TerminalData {
            q: ft.transpose() * ft + DMatrix::identity(nx, nx) * 0.1,
            q_lin: vector(&mut rng, nx),
            c: ct,
            lower,
            upper,
        },
        x_init,
    })
}

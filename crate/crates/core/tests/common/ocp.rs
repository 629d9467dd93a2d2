//! Random OCP instances and a dense assembly of the standard-form QP, written
//! directly from the block definitions and independent of the library.

use nalgebra::{DMatrix, DVector};
use ocpqp::model::{OcpData, StageData, TerminalData};
use rand::Rng;

use super::{random_matrix, random_spd};

pub struct Dense {
    pub q: DMatrix<f64>,
    pub q_lin: DVector<f64>,
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_bounds(rng: &mut impl Rng, n: usize, infinite: bool) -> (DVector<f64>, DVector<f64>) {
    let lo = DVector::from_fn(n, |_, _| {
        if infinite && rng.gen_bool(0.2) {
            f64::NEG_INFINITY
        } else {
            -rng.gen_range(0.2..1.5)
        }
    });
    let hi = DVector::from_fn(n, |_, _| {
        if infinite && rng.gen_bool(0.2) {
            f64::INFINITY
        } else {
            rng.gen_range(0.2..1.5)
        }
    });
    (lo, hi)
}

/// Random instance with a positive definite joint stage cost.
pub fn random_data(rng: &mut impl Rng, n: usize, nx: usize, nu: usize, ny: usize, nyn: usize) -> OcpData {
    let nxu = nx + nu;
    let stages = (0..n)
        .map(|_| {
            let h = random_spd(rng, nxu) * 0.5;
            let (lower, upper) = random_bounds(rng, ny, true);
            StageData {
                q: h.view((0, 0), (nx, nx)).into_owned(),
                s: h.view((nx, 0), (nu, nx)).into_owned(),
                r: h.view((nx, nx), (nu, nu)).into_owned(),
                q_lin: random_vector(rng, nx),
                r_lin: random_vector(rng, nu),
                a: random_matrix(rng, nx, nx) * 0.6,
                b: random_matrix(rng, nx, nu),
                offset: random_vector(rng, nx) * 0.1,
                c: random_matrix(rng, ny, nx),
                d: random_matrix(rng, ny, nu),
                lower,
                upper,
            }
        })
        .collect();
    let (lower, upper) = random_bounds(rng, nyn, true);
    OcpData {
        stages,
        terminal: TerminalData {
            q: random_spd(rng, nx) * 0.5,
            q_lin: random_vector(rng, nx),
            c: random_matrix(rng, nyn, nx),
            lower,
            upper,
        },
        x_init: random_vector(rng, nx),
    }
}

/// Instance with diagonal costs, no cross terms and box constraints on
/// every state and input.
pub fn random_diagonal_data(rng: &mut impl Rng, n: usize, nx: usize, nu: usize) -> OcpData {
    let diag = |rng: &mut dyn rand::RngCore, k: usize| {
        DMatrix::from_diagonal(&DVector::from_fn(k, |_, _| rng.gen_range(0.5..2.0)))
    };
    let stages = (0..n)
        .map(|_| {
            let (lower, upper) = random_bounds(rng, nx + nu, false);
            let mut c = DMatrix::zeros(nx + nu, nx);
            let mut d = DMatrix::zeros(nx + nu, nu);
            for i in 0..nx {
                c[(i, i)] = 1.0;
            }
            for i in 0..nu {
                d[(nx + i, i)] = 1.0;
            }
            StageData {
                q: diag(rng, nx),
                s: DMatrix::zeros(nu, nx),
                r: diag(rng, nu),
                q_lin: random_vector(rng, nx),
                r_lin: random_vector(rng, nu),
                a: random_matrix(rng, nx, nx) * 0.6,
                b: random_matrix(rng, nx, nu),
                offset: DVector::zeros(nx),
                c,
                d,
                lower,
                upper,
            }
        })
        .collect();
    let (lower, upper) = random_bounds(rng, nx, false);
    OcpData {
        stages,
        terminal: TerminalData {
            q: diag(rng, nx),
            q_lin: random_vector(rng, nx),
            c: DMatrix::identity(nx, nx),
            lower,
            upper,
        },
        x_init: random_vector(rng, nx),
    }
}

pub fn dense(data: &OcpData) -> Dense {
    let n = data.stages.len();
    let nx = data.x_init.len();
    let nu = data.stages[0].b.ncols();
    let ny = data.stages[0].c.nrows();
    let nyn = data.terminal.c.nrows();
    let nxu = nx + nu;
    let nv = n * nxu + nx;
    let p = (n + 1) * nx;
    let m = n * ny + nyn;
    let mut out = Dense {
        q: DMatrix::zeros(nv, nv),
        q_lin: DVector::zeros(nv),
        m: DMatrix::zeros(p, nv),
        b: DVector::zeros(p),
        g: DMatrix::zeros(m, nv),
        lower: DVector::zeros(m),
        upper: DVector::zeros(m),
    };
    out.m.view_mut((0, 0), (nx, nx)).fill_with_identity();
    out.b.rows_mut(0, nx).copy_from(&data.x_init);
    for (j, st) in data.stages.iter().enumerate() {
        let (x, u) = (j * nxu, j * nxu + nx);
        out.q.view_mut((x, x), (nx, nx)).copy_from(&st.q);
        out.q.view_mut((u, x), (nu, nx)).copy_from(&st.s);
        out.q.view_mut((x, u), (nx, nu)).copy_from(&st.s.transpose());
        out.q.view_mut((u, u), (nu, nu)).copy_from(&st.r);
        out.q_lin.rows_mut(x, nx).copy_from(&st.q_lin);
        out.q_lin.rows_mut(u, nu).copy_from(&st.r_lin);
        let row = (j + 1) * nx;
        out.m.view_mut((row, x), (nx, nx)).copy_from(&(-&st.a));
        out.m.view_mut((row, u), (nx, nu)).copy_from(&(-&st.b));
        out.m.view_mut((row, x + nxu), (nx, nx)).fill_with_identity();
        out.b.rows_mut(row, nx).copy_from(&st.offset);
        out.g.view_mut((j * ny, x), (ny, nx)).copy_from(&st.c);
        out.g.view_mut((j * ny, u), (ny, nu)).copy_from(&st.d);
        out.lower.rows_mut(j * ny, ny).copy_from(&st.lower);
        out.upper.rows_mut(j * ny, ny).copy_from(&st.upper);
    }
    let t = &data.terminal;
    let x = n * nxu;
    out.q.view_mut((x, x), (nx, nx)).copy_from(&t.q);
    out.q_lin.rows_mut(x, nx).copy_from(&t.q_lin);
    out.g.view_mut((n * ny, x), (nyn, nx)).copy_from(&t.c);
    out.lower.rows_mut(n * ny, nyn).copy_from(&t.lower);
    out.upper.rows_mut(n * ny, nyn).copy_from(&t.upper);
    out
}

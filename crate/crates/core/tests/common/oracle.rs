//! Reference solutions computed densely from `OcpData`, independent of the
//! library solver.

use nalgebra::{DMatrix, DVector};
use ocpqp::model::OcpData;
use rand::Rng;

use super::ocp::{dense, random_data, Dense};

/// Replaces the bounds of `data` by an interval around a random rollout, so
/// the instance is feasible. Each side is infinite with probability
/// `p_inf`, otherwise offset from the rollout by a margin in `[0, margin)`.
pub fn make_feasible(rng: &mut impl Rng, data: &mut OcpData, margin: f64, p_inf: f64) {
    let nu = data.nu();
    let mut x = data.x_init.clone();
    let side = |rng: &mut dyn rand::RngCore, g: f64, sign: f64| {
        if rng.gen_bool(p_inf) {
            sign * f64::INFINITY
        } else {
            g + sign * rng.gen_range(0.0..margin)
        }
    };
    for st in data.stages.iter_mut() {
        let u = DVector::from_fn(nu, |_, _| rng.gen_range(-0.5..0.5));
        let g = &st.c * &x + &st.d * &u;
        for i in 0..g.len() {
            st.lower[i] = side(rng, g[i], -1.0);
            st.upper[i] = side(rng, g[i], 1.0);
        }
        x = &st.a * &x + &st.b * &u + &st.offset;
    }
    let t = &mut data.terminal;
    let g = &t.c * &x;
    for i in 0..g.len() {
        t.lower[i] = side(rng, g[i], -1.0);
        t.upper[i] = side(rng, g[i], 1.0);
    }
}

pub fn feasible_data(rng: &mut impl Rng, n: usize, nx: usize, nu: usize, ny: usize, nyn: usize) -> OcpData {
    let mut data = random_data(rng, n, nx, nu, ny, nyn);
    make_feasible(rng, &mut data, 0.3, 0.2);
    data
}

/// Unconstrained optimum by the backward Riccati recursion with affine terms,
/// in logical order `[x₀, u₀, …, x_N]`.
pub fn riccati(data: &OcpData) -> DVector<f64> {
    let n = data.horizon();
    let mut p = data.terminal.q.clone();
    let mut pv = data.terminal.q_lin.clone();
    let mut gains = Vec::with_capacity(n);
    for st in data.stages.iter().rev() {
        let pc = &p * &st.offset + &pv;
        let quu = &st.r + st.b.transpose() * &p * &st.b;
        let qux = &st.s + st.b.transpose() * &p * &st.a;
        let qxx = &st.q + st.a.transpose() * &p * &st.a;
        let qu = &st.r_lin + st.b.transpose() * &pc;
        let qx = &st.q_lin + st.a.transpose() * &pc;
        let chol = quu.cholesky().expect("Quu positive definite");
        let k = -chol.solve(&qux);
        let kv = -chol.solve(&qu);
        p = &qxx + qux.transpose() * &k;
        p = (&p + p.transpose()) * 0.5;
        pv = qx + qux.transpose() * &kv;
        gains.push((k, kv));
    }
    gains.reverse();
    let (nx, nu) = (data.nx(), data.nu());
    let mut out = DVector::zeros(n * (nx + nu) + nx);
    let mut x = data.x_init.clone();
    for (j, (st, (k, kv))) in data.stages.iter().zip(&gains).enumerate() {
        let u = k * &x + kv;
        out.rows_mut(j * (nx + nu), nx).copy_from(&x);
        out.rows_mut(j * (nx + nu) + nx, nu).copy_from(&u);
        x = &st.a * &x + &st.b * &u + &st.offset;
    }
    out.rows_mut(n * (nx + nu), nx).copy_from(&x);
    out
}

pub fn objective(d: &Dense, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(&d.q * x)) + d.q_lin.dot(x)
}

/// Optimum by enumerating every assignment of each inequality row to
/// free / lower / upper. Each assignment gives an equality-constrained QP
/// solved through its dense KKT matrix; the best feasible candidate wins.
pub fn enumerate(data: &OcpData) -> DVector<f64> {
    let d = dense(data);
    let (nv, p, m) = (d.q.nrows(), d.m.nrows(), d.g.nrows());
    assert!(m <= 12, "enumeration oracle limited to 12 rows");
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut choice = vec![0u8; m];
    loop {
        let active: Vec<(usize, f64)> = (0..m)
            .filter_map(|i| match choice[i] {
                1 => Some((i, d.lower[i])),
                2 => Some((i, d.upper[i])),
                _ => None,
            })
            .collect();
        if active.iter().all(|(_, b)| b.is_finite()) {
            let k = nv + p + active.len();
            let mut kkt = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            kkt.view_mut((0, 0), (nv, nv)).copy_from(&d.q);
            kkt.view_mut((nv, 0), (p, nv)).copy_from(&d.m);
            kkt.view_mut((0, nv), (nv, p)).copy_from(&d.m.transpose());
            rhs.rows_mut(0, nv).copy_from(&(-&d.q_lin));
            rhs.rows_mut(nv, p).copy_from(&d.b);
            for (r, &(i, b)) in active.iter().enumerate() {
                let row = d.g.row(i);
                kkt.view_mut((nv + p + r, 0), (1, nv)).copy_from(&row);
                kkt.view_mut((0, nv + p + r), (nv, 1)).copy_from(&row.transpose());
                rhs[nv + p + r] = b;
            }
            if let Some(sol) = kkt.clone().lu().solve(&rhs) {
                let res = (&kkt * &sol - &rhs).amax();
                let x = sol.rows(0, nv).into_owned();
                let gx = &d.g * &x;
                let feasible = (0..m).all(|i| gx[i] >= d.lower[i] - 1e-9 && gx[i] <= d.upper[i] + 1e-9);
                if res < 1e-9 * (1.0 + rhs.amax()) && feasible {
                    let f = objective(&d, &x);
                    if best.as_ref().map_or(true, |(b, _)| f < *b) {
                        best = Some((f, x));
                    }
                }
            }
        }
        // next assignment in base 3
        let mut i = 0;
        while i < m && choice[i] == 2 {
            choice[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
        choice[i] += 1;
    }
    best.expect("no feasible candidate").1
}

/// Stationarity `‖Qx + q + Mᵀλ + Gᵀy‖∞`, equality residual `‖Mx − b‖∞`,
/// infeasibility `‖dist(Gx, C)‖∞` and complementarity `‖Gx − Π_C(Gx + y)‖∞`.
pub fn kkt_residual(d: &Dense, x: &DVector<f64>, y: &DVector<f64>, lam: &DVector<f64>) -> [f64; 4] {
    let dual = (&d.q * x + &d.q_lin + d.m.transpose() * lam + d.g.transpose() * y).amax();
    let eq = (&d.m * x - &d.b).amax();
    let gx = &d.g * x;
    let clamp = |i: usize, v: f64| v.clamp(d.lower[i], d.upper[i]);
    let primal = (0..gx.len()).fold(0.0f64, |a, i| a.max((gx[i] - clamp(i, gx[i])).abs()));
    let comp = (0..gx.len()).fold(0.0f64, |a, i| a.max((gx[i] - clamp(i, gx[i] + y[i])).abs()));
    [dual, eq, primal, comp]
}

//! Reference solutions and solution checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::BenchError;
use crate::alm::{Residuals, Solution};
use crate::model::{DualEqVector, DualIneqVector, OcpData, OcpProblem, PrimalVector};

/// Largest instance the active-set enumeration accepts.
pub const ENUMERATION_MAX_ROWS: usize = 14;
pub const ENUMERATION_MAX_VARS: usize = 60;

/// The QP `min ½xᵀQx + qᵀx  s.t.  Mx = b, l ≤ Gx ≤ u` with dense matrices.
#[derive(Clone, Debug)]
pub struct DenseQp {
    pub q: DMatrix<f64>,
    pub q_lin: DVector<f64>,
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl DenseQp {
    pub fn from_data(data: &OcpData) -> Self {
        let (n, nx, nu) = (data.horizon(), data.nx(), data.nu());
        let (ny, nyn) = (data.ny(), data.ny_terminal());
        let nxu = nx + nu;
        let nv = n * nxu + nx;
        let mut qp = DenseQp {
            q: DMatrix::zeros(nv, nv),
            q_lin: DVector::zeros(nv),
            m: DMatrix::zeros((n + 1) * nx, nv),
            b: DVector::zeros((n + 1) * nx),
            g: DMatrix::zeros(n * ny + nyn, nv),
            lower: DVector::zeros(n * ny + nyn),
            upper: DVector::zeros(n * ny + nyn),
        };
        qp.m.view_mut((0, 0), (nx, nx)).fill_with_identity();
        qp.b.rows_mut(0, nx).copy_from(&data.x_init);
        for (j, st) in data.stages.iter().enumerate() {
            let (x, u, row) = (j * nxu, j * nxu + nx, (j + 1) * nx);
            qp.q.view_mut((x, x), (nx, nx)).copy_from(&st.q);
            qp.q.view_mut((u, x), (nu, nx)).copy_from(&st.s);
            qp.q.view_mut((x, u), (nx, nu)).copy_from(&st.s.transpose());
            qp.q.view_mut((u, u), (nu, nu)).copy_from(&st.r);
            qp.q_lin.rows_mut(x, nx).copy_from(&st.q_lin);
            qp.q_lin.rows_mut(u, nu).copy_from(&st.r_lin);
            qp.m.view_mut((row, x), (nx, nx)).copy_from(&(-&st.a));
            qp.m.view_mut((row, u), (nx, nu)).copy_from(&(-&st.b));
            qp.m.view_mut((row, x + nxu), (nx, nx)).fill_with_identity();
            qp.b.rows_mut(row, nx).copy_from(&st.offset);
            qp.g.view_mut((j * ny, x), (ny, nx)).copy_from(&st.c);
            qp.g.view_mut((j * ny, u), (ny, nu)).copy_from(&st.d);
            qp.lower.rows_mut(j * ny, ny).copy_from(&st.lower);
            qp.upper.rows_mut(j * ny, ny).copy_from(&st.upper);
        }
        let (t, x) = (&data.terminal, n * nxu);
        qp.q.view_mut((x, x), (nx, nx)).copy_from(&t.q);
        qp.q_lin.rows_mut(x, nx).copy_from(&t.q_lin);
        qp.g.view_mut((n * ny, x), (nyn, nx)).copy_from(&t.c);
        qp.lower.rows_mut(n * ny, nyn).copy_from(&t.lower);
        qp.upper.rows_mut(n * ny, nyn).copy_from(&t.upper);
        qp
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.q_lin.dot(x)
    }

    /// Solves the equality-constrained QP with the rows `fixed` of `G` held
    /// at the given values. Returns `(x, λ, y_fixed)`, or `None` when the KKT
    /// matrix is singular.
    fn solve_equality(&self, fixed: &[(usize, f64)]) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (nv, p, a) = (self.q.nrows(), self.m.nrows(), fixed.len());
        let k = nv + p + a;
        let mut kkt = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&self.q);
        kkt.view_mut((nv, 0), (p, nv)).copy_from(&self.m);
        kkt.view_mut((0, nv), (nv, p)).copy_from(&self.m.transpose());
        rhs.rows_mut(0, nv).copy_from(&(-&self.q_lin));
        rhs.rows_mut(nv, p).copy_from(&self.b);
        for (r, &(i, v)) in fixed.iter().enumerate() {
            kkt.view_mut((nv + p + r, 0), (1, nv)).copy_from(&self.g.row(i));
            kkt.view_mut((0, nv + p + r), (nv, 1)).copy_from(&self.g.row(i).transpose());
            rhs[nv + p + r] = v;
        }
        let sol = kkt.clone().lu().solve(&rhs)?;
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            return None;
        }
        Some((sol.rows(0, nv).into_owned(), sol.rows(nv, p).into_owned(), sol.rows(nv + p, a).into_owned()))
    }
}

/// Unconstrained optimum by the backward Riccati recursion, in logical order
/// `[x₀, u₀, …, x_N]`. Bounds are ignored.
pub fn riccati(data: &OcpData) -> Result<DVector<f64>, BenchError> {
    let n = data.horizon();
    let (nx, nu) = (data.nx(), data.nu());
    let mut p = data.terminal.q.clone();
    let mut pv = data.terminal.q_lin.clone();
    let mut gains = Vec::with_capacity(n);
    for (j, st) in data.stages.iter().enumerate().rev() {
        let pc = &p * &st.offset + &pv;
        let bp = st.b.transpose() * &p;
        let quu = &st.r + &bp * &st.b;
        let qux = &st.s + &bp * &st.a;
        let chol = quu
            .cholesky()
            .ok_or_else(|| BenchError::Oracle(format!("Riccati: input Hessian of stage {j} is not positive definite")))?;
        let k = -chol.solve(&qux);
        let kv = -chol.solve(&(&st.r_lin + st.b.transpose() * &pc));
        let next = &st.q + st.a.transpose() * &p * &st.a + qux.transpose() * &k;
        pv = &st.q_lin + st.a.transpose() * &pc + qux.transpose() * &kv;
        p = (&next + next.transpose()) * 0.5;
        gains.push((k, kv));
    }
    gains.reverse();
    let mut out = DVector::zeros(n * (nx + nu) + nx);
    let mut x = data.x_init.clone();
    for (j, (st, (k, kv))) in data.stages.iter().zip(&gains).enumerate() {
        let u = k * &x + kv;
        out.rows_mut(j * (nx + nu), nx).copy_from(&x);
        out.rows_mut(j * (nx + nu) + nx, nu).copy_from(&u);
        x = &st.a * &x + &st.b * &u + &st.offset;
    }
    out.rows_mut(n * (nx + nu), nx).copy_from(&x);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Number of free / lower / upper assignments examined, `3^m`.
    pub candidates: u64,
}

/// Optimum by active-set enumeration. Every row is assigned free, at its
/// lower bound or at its upper bound; each assignment's equality-constrained
/// QP is solved densely and kept when it is feasible and its multipliers
/// have the right signs. The best kept candidate is returned.
pub fn enumerate_active_sets(data: &OcpData) -> Result<Enumeration, BenchError> {
    let qp = DenseQp::from_data(data);
    let (nv, m) = (qp.q.nrows(), qp.g.nrows());
    if m > ENUMERATION_MAX_ROWS || nv > ENUMERATION_MAX_VARS {
        return Err(BenchError::OracleIntractable { rows: m, vars: nv });
    }
    let tol = 1e-9;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut choice = vec![0u8; m];
    let mut fixed = Vec::with_capacity(m);
    let mut candidates = 0u64;
    loop {
        candidates += 1;
        fixed.clear();
        let mut usable = true;
        for (i, &c) in choice.iter().enumerate() {
            let (lo, hi) = (qp.lower[i], qp.upper[i]);
            match c {
                1 => fixed.push((i, lo)),
                // an equality row is covered by its lower assignment
                2 if hi != lo => fixed.push((i, hi)),
                2 => usable = false,
                _ => {}
            }
        }
        usable &= fixed.iter().all(|(_, v)| v.is_finite());
        if let Some((x, _, y)) = usable.then(|| qp.solve_equality(&fixed)).flatten() {
            let gx = &qp.g * &x;
            let feasible = (0..m).all(|i| gx[i] >= qp.lower[i] - tol && gx[i] <= qp.upper[i] + tol);
            // y enters as Qx + q + Mᵀλ + Gᵀy = 0: y ≥ 0 at an upper bound, ≤ 0 at a lower one
            let signs = fixed.iter().zip(y.iter()).all(|(&(i, v), &yi)| {
                let scale = 1e-7 * (1.0 + y.amax());
                if qp.lower[i] == qp.upper[i] {
                    true
                } else if v == qp.upper[i] {
                    yi >= -scale
                } else {
                    yi <= scale
                }
            });
            if feasible && signs {
                let f = qp.objective(&x);
                if best.as_ref().map_or(true, |(b, _)| f < *b) {
                    best = Some((f, x));
                }
            }
        }
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
    let (objective, x) = best.ok_or_else(|| BenchError::Oracle("no active set satisfies the KKT conditions".into()))?;
    Ok(Enumeration { x, objective, candidates })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Oracle {
    /// KKT residuals only, any size.
    Residual,
    /// Riccati recursion, for instances without finite bounds.
    Riccati,
    /// Active-set enumeration, for tiny instances.
    Enumerate,
}

impl std::str::FromStr for Oracle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "residual" => Ok(Oracle::Residual),
            "riccati" => Ok(Oracle::Riccati),
            "enumerate" => Ok(Oracle::Enumerate),
            _ => Err(format!("unknown oracle {s:?} (expected residual, riccati or enumerate)")),
        }
    }
}

/// KKT residuals of a logical solution, from the model products.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KktResiduals {
    pub dual: f64,
    pub eq: f64,
    pub primal: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.dual.max(self.eq).max(self.primal).max(self.complementarity)
    }
}

pub fn kkt_residuals(problem: &OcpProblem, sol: &Solution) -> Result<KktResiduals, BenchError> {
    let d = problem.dims();
    let r = Residuals::evaluate(
        problem,
        &PrimalVector::from_logical(d, &sol.x)?,
        &DualIneqVector::from_logical(d, &sol.y)?,
        &DualEqVector::from_logical(d, &sol.lam)?,
    );
    Ok(KktResiduals { dual: r.dual, eq: r.eq, primal: r.primal, complementarity: r.complementarity })
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub oracle: Oracle,
    pub residuals: KktResiduals,
    pub residual_tolerance: f64,
    /// `‖x − x_ref‖∞` for the reference oracles.
    pub reference_error: Option<f64>,
    pub reference_tolerance: Option<f64>,
    pub candidates: Option<u64>,
    pub passed: bool,
}

/// Checks `sol` by its KKT residuals (tolerance `eps`) and, for the
/// reference oracles, by its distance to the reference solution (1e-7 for
/// Riccati, 1e-6 for enumeration).
pub fn verify_against_oracle(
    data: &OcpData,
    sol: &Solution,
    oracle: Oracle,
    eps: f64,
) -> Result<VerificationReport, BenchError> {
    let problem = OcpProblem::new(data, 1)?;
    let residuals = kkt_residuals(&problem, sol)?;
    let x = DVector::from_column_slice(&sol.x);
    let (reference, tol, candidates) = match oracle {
        Oracle::Residual => (None, None, None),
        Oracle::Riccati => {
            let bounded = data
                .stages
                .iter()
                .flat_map(|s| s.lower.iter().chain(s.upper.iter()))
                .chain(data.terminal.lower.iter().chain(data.terminal.upper.iter()))
                .any(|v| v.is_finite());
            if bounded {
                return Err(BenchError::Oracle("Riccati oracle needs all bounds infinite".into()));
            }
            (Some(riccati(data)?), Some(1e-7), None)
        }
        Oracle::Enumerate => {
            let e = enumerate_active_sets(data)?;
            (Some(e.x), Some(1e-6), Some(e.candidates))
        }
    };
    let reference_error = reference.map(|r| (&x - r).amax());
    let passed = residuals.max() <= eps && reference_error.zip(tol).map_or(true, |(e, t)| e <= t);
    Ok(VerificationReport {
        oracle,
        residuals,
        residual_tolerance: eps,
        reference_error,
        reference_tolerance: tol,
        candidates,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StageData, TerminalData};

    /// One stage, scalar state and input, `−1 ≤ u ≤ 1` and `x₁` free, so
    /// `m = 1 + 1` rows counting the terminal one.
    fn scalar(x0: f64) -> OcpData {
        let mut st = StageData::zeros(1, 1, 1);
        st.q[(0, 0)] = 1.0;
        st.r[(0, 0)] = 1.0;
        st.a[(0, 0)] = 1.0;
        st.b[(0, 0)] = 1.0;
        st.d[(0, 0)] = 1.0;
        st.lower[0] = -1.0;
        st.upper[0] = 1.0;
        let mut t = TerminalData::zeros(1, 1);
        t.q[(0, 0)] = 1.0;
        t.c[(0, 0)] = 1.0;
        t.lower[0] = f64::NEG_INFINITY;
        t.upper[0] = f64::INFINITY;
        OcpData { stages: vec![st], terminal: t, x_init: DVector::from_element(1, x0) }
    }

    #[test]
    fn enumeration_counts_all_assignments() {
        // min ½x₀² + ½u² + ½(x₀ + u)²: u = −x₀/2 unless clipped
        let e = enumerate_active_sets(&scalar(1.0)).unwrap();
        assert_eq!(e.candidates, 9);
        assert!((e.x[1] + 0.5).abs() < 1e-12);
        let e = enumerate_active_sets(&scalar(4.0)).unwrap();
        assert!((e.x[1] + 1.0).abs() < 1e-12);
        assert!((e.x[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn riccati_handles_the_scalar_case() {
        let x = riccati(&scalar(4.0)).unwrap();
        assert!((x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_enumeration_is_refused() {
        let mut data = scalar(1.0);
        data.stages = vec![data.stages[0].clone(); 20];
        assert!(matches!(enumerate_active_sets(&data), Err(BenchError::OracleIntractable { rows: 21, .. })));
    }

    #[test]
    fn perturbed_solution_fails_verification() {
        let data = scalar(4.0);
        // x₀ = 4, u = −1, x₁ = 3; λ and y from stationarity
        let sol = Solution { x: vec![4.0, -1.0, 3.0], y: vec![-2.0, 0.0], lam: vec![-7.0, -3.0] };
        let ok = verify_against_oracle(&data, &sol, Oracle::Enumerate, 1e-8).unwrap();
        assert!(ok.passed, "{ok:?}");
        let mut bad = sol.clone();
        bad.x[1] += 1e-3;
        let report = verify_against_oracle(&data, &bad, Oracle::Enumerate, 1e-8).unwrap();
        assert!(!report.passed);
        assert!(verify_against_oracle(&data, &sol, Oracle::Riccati, 1e-8).is_err());
    }
}

//! The inner objective
//!
//! ```text
//! φ(x) = ½xᵀQx + qᵀx + ½‖z − Π_C(z)‖²_Σy + ½‖x − x̄‖²_{Σx⁻¹},   z = Gx + Σy⁻¹y
//! ```
//!
//! its gradient and the exact minimization along a search direction.

use super::{AlmError, AlmState};
use crate::model::{DualEqVector, DualIneqVector, OcpDims, OcpProblem, PrimalVector};

/// `Gx + y/σ`, exact when `y = 0`.
#[inline]
pub(crate) fn shifted(g: f64, y: f64, s: f64) -> f64 {
    if y == 0.0 {
        g
    } else {
        g + y / s
    }
}

/// Per-problem buffers for evaluating `φ`, `∇φ` and the line search.
#[derive(Clone, Debug)]
pub(crate) struct PhiWork {
    pub gx: DualIneqVector,
    /// `σ ∘ (z − Π_C(z))`, which is also the dual update candidate.
    pub dist: DualIneqVector,
    pub qx: PrimalVector,
    pub grad: PrimalVector,
    pub tmp: PrimalVector,
    pub eq: DualEqVector,
    pub gdx: DualIneqVector,
    pub qdx: PrimalVector,
    events: Vec<Event>,
}

#[derive(Clone, Copy, Debug)]
enum Crossing {
    LeaveBelow,
    LeaveAbove,
    EnterBelow,
    EnterAbove,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    tau: f64,
    row: usize,
    kind: Crossing,
}

impl PhiWork {
    pub fn new(dims: &OcpDims) -> Self {
        Self {
            gx: DualIneqVector::zeros(dims),
            dist: DualIneqVector::zeros(dims),
            qx: PrimalVector::zeros(dims),
            grad: PrimalVector::zeros(dims),
            tmp: PrimalVector::zeros(dims),
            eq: DualEqVector::zeros(dims),
            gdx: DualIneqVector::zeros(dims),
            qdx: PrimalVector::zeros(dims),
            events: Vec::with_capacity(2 * dims.ny_padded() * dims.slots()),
        }
    }

    /// Evaluates `φ(x)`, leaving `Gx`, `Qx` and the scaled distance in the
    /// buffers. With `grad`, also fills `∇φ(x)`.
    pub fn eval(&mut self, p: &OcpProblem, st: &AlmState, x: &PrimalVector, grad: bool) -> f64 {
        p.mul_g_unchecked(x, &mut self.gx);
        p.mul_q_unchecked(x, &mut self.qx);
        let (lo, hi) = (p.lower.as_slice(), p.upper.as_slice());
        let (y, s) = (st.y.as_slice(), st.sigma_y.as_slice());
        let mut pen = 0.0;
        for (k, d) in self.dist.as_mut_slice().iter_mut().enumerate() {
            let z = shifted(self.gx.as_slice()[k], y[k], s[k]);
            let e = z - z.clamp(lo[k], hi[k]);
            pen += s[k] * e * e;
            *d = s[k] * e;
        }
        let (xs, qx, q, c, w) =
            (x.as_slice(), self.qx.as_slice(), p.lin.as_slice(), st.center.as_slice(), st.prox.as_slice());
        let mut quad = 0.0;
        let mut prox = 0.0;
        for k in 0..xs.len() {
            quad += xs[k] * (0.5 * qx[k] + q[k]);
            let dx = xs[k] - c[k];
            prox += w[k] * dx * dx;
        }
        if grad {
            p.mul_gt_unchecked(&self.dist, &mut self.grad);
            let g = self.grad.as_mut_slice();
            for k in 0..xs.len() {
                g[k] += qx[k] + q[k] + w[k] * (xs[k] - c[k]);
            }
        }
        quad + 0.5 * pen + 0.5 * prox
    }

    /// Exact minimizer of `τ ↦ φ(x + τΔx) + λᵀ(M(x + τΔx) − b)` over `τ ≥ 0`,
    /// which is `φ` along directions with `MΔx = 0`. `r` is `∇φ(x) + Mᵀλ`;
    /// expects a prior [`eval`](Self::eval) at `x` (uses `Gx`).
    ///
    /// `ψ'(τ)` is piecewise linear and nondecreasing with breakpoints where a
    /// row of `z + τGΔx` crosses a bound; the breakpoints are sorted and
    /// scanned until the derivative changes sign.
    pub fn line_search(
        &mut self,
        p: &OcpProblem,
        st: &AlmState,
        r: &PrimalVector,
        dx: &PrimalVector,
    ) -> Result<f64, AlmError> {
        p.mul_g_unchecked(dx, &mut self.gdx);
        p.mul_q_unchecked(dx, &mut self.qdx);
        let (ds, w, qd) = (dx.as_slice(), st.prox.as_slice(), self.qdx.as_slice());
        // ψ'(τ) = a·τ + b on the current interval. The slope at 0 comes from
        // the residual vector: summing the terms of ∇φ·Δx and λᵀMΔx
        // separately loses it to cancellation near convergence.
        let mut a = 0.0;
        let mut b = 0.0;
        for k in 0..ds.len() {
            a += ds[k] * (qd[k] + w[k] * ds[k]);
            b += ds[k] * r.as_slice()[k];
        }
        let (lo, hi) = (p.lower.as_slice(), p.upper.as_slice());
        let (y, s) = (st.y.as_slice(), st.sigma_y.as_slice());
        let (gx, gd) = (self.gx.as_slice(), self.gdx.as_slice());
        self.events.clear();
        for k in 0..gx.len() {
            let g = gd[k];
            if g == 0.0 {
                continue;
            }
            let z = shifted(gx[k], y[k], s[k]);
            let below = z < lo[k] || (z == lo[k] && g < 0.0);
            let above = z > hi[k] || (z == hi[k] && g > 0.0);
            if below || above {
                a += s[k] * g * g;
            }
            let ev = |tau: f64, kind| Event { tau, row: k, kind };
            if g > 0.0 {
                if below {
                    self.events.push(ev((lo[k] - z) / g, Crossing::LeaveBelow));
                }
                if !above && hi[k].is_finite() {
                    self.events.push(ev((hi[k] - z) / g, Crossing::EnterAbove));
                }
            } else {
                if above {
                    self.events.push(ev((hi[k] - z) / g, Crossing::LeaveAbove));
                }
                if !below && lo[k].is_finite() {
                    self.events.push(ev((lo[k] - z) / g, Crossing::EnterBelow));
                }
            }
        }
        if b >= 0.0 {
            return Err(AlmError::NonDescentDirection { slope: b });
        }
        self.events.sort_unstable_by(|u, v| u.tau.total_cmp(&v.tau));
        let mut prev = 0.0;
        for e in &self.events {
            if a > 0.0 {
                let t = -b / a;
                if t <= e.tau {
                    return Ok(t.max(prev));
                }
            }
            let k = e.row;
            let g = gd[k];
            let z = shifted(gx[k], y[k], s[k]);
            let sg2 = s[k] * g * g;
            match e.kind {
                Crossing::LeaveBelow => {
                    a -= sg2;
                    b -= s[k] * g * (z - lo[k]);
                }
                Crossing::LeaveAbove => {
                    a -= sg2;
                    b -= s[k] * g * (z - hi[k]);
                }
                Crossing::EnterBelow => {
                    a += sg2;
                    b += s[k] * g * (z - lo[k]);
                }
                Crossing::EnterAbove => {
                    a += sg2;
                    b += s[k] * g * (z - hi[k]);
                }
            }
            prev = e.tau;
        }
        if a > 0.0 {
            Ok((-b / a).max(prev))
        } else {
            Err(AlmError::UnboundedDirection)
        }
    }
}

/// `φ(x)` for the inner problem defined by `state`.
pub fn eval_phi(problem: &OcpProblem, state: &AlmState, x: &PrimalVector) -> Result<f64, AlmError> {
    state.check(problem, x)?;
    Ok(PhiWork::new(problem.dims()).eval(problem, state, x, false))
}

/// `∇φ(x) = Qx + q + GᵀΣy(z − Π_C(z)) + Σx⁻¹(x − x̄)`.
pub fn eval_grad_phi(problem: &OcpProblem, state: &AlmState, x: &PrimalVector) -> Result<PrimalVector, AlmError> {
    state.check(problem, x)?;
    let mut w = PhiWork::new(problem.dims());
    w.eval(problem, state, x, true);
    Ok(w.grad)
}

/// Global minimizer `τ ≥ 0` of `φ(x + τΔx)` for a direction with `MΔx = 0`.
/// The slope is evaluated on the Lagrangian `φ + λᵀ(Mx − b)`, so a direction
/// that violates `MΔx = 0` is searched on that function instead.
pub fn exact_line_search(
    problem: &OcpProblem,
    state: &AlmState,
    x: &PrimalVector,
    dx: &PrimalVector,
) -> Result<f64, AlmError> {
    state.check(problem, x)?;
    state.check(problem, dx)?;
    let mut w = PhiWork::new(problem.dims());
    w.eval(problem, state, x, true);
    let mut r = w.grad.clone();
    problem.mul_mt_unchecked(&state.lam, &mut w.tmp);
    r.axpy(1.0, &w.tmp);
    w.line_search(problem, state, &r, dx)
}

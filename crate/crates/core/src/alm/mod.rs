//! Augmented Lagrangian outer loop with a semismooth Newton inner solver.
//!
//! Each outer iteration minimizes the piecewise quadratic `φ` (see
//! [`eval_phi`]) subject to `Mx = b` with Newton steps from [`crate::kkt`],
//! then updates the inequality multipliers, the penalties and the proximal
//! center.

mod phi;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::kkt::{update_active_weights, ActiveWeights, KktError, StageFactorization, Variant};
use crate::model::{DualEqVector, DualIneqVector, ModelError, OcpDims, OcpProblem, PrimalVector};
use crate::parallel::WorkerPool;

pub use phi::{eval_grad_phi, eval_phi, exact_line_search};
use phi::{shifted, PhiWork};

pub const SIGMA_MIN: f64 = 1e-9;
pub const SIGMA_MAX: f64 = 1e9;

#[derive(Debug, Error)]
pub enum AlmError {
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("search direction is not a descent direction (slope {slope:e})")]
    NonDescentDirection { slope: f64 },
    #[error("objective is unbounded along the search direction")]
    UnboundedDirection,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kkt(#[from] KktError),
}

/// Initial inequality penalty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialSigma {
    /// `clamp(20·max(1, |f(x₀)|) / max(1, ½‖Gx₀‖²), 1e-4, 1e4)` on every row.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Factor applied to a row penalty that is not making progress.
    pub penalty_update_factor: f64,
    /// A row penalty grows when its violation has not dropped below this
    /// fraction of the previous one.
    pub penalty_trigger: f64,
    pub initial_sigma: InitialSigma,
    /// Diagonal of the proximal weight `Σx⁻¹`.
    pub prox_delta: f64,
    pub workers: usize,
    pub lanes: usize,
    pub variant: Variant,
    /// Record one [`InnerRecord`] per inner iteration.
    pub trace: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 0.0,
            max_outer: 200,
            max_inner: 200,
            penalty_update_factor: 10.0,
            penalty_trigger: 0.25,
            initial_sigma: InitialSigma::Auto,
            prox_delta: 1e-7,
            workers: 1,
            lanes: 4,
            variant: Variant::Dense,
            trace: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), AlmError> {
        let bad = |m: &str| Err(AlmError::InvalidSettings(m.to_string()));
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0 && (self.eps_abs > 0.0 || self.eps_rel > 0.0)) {
            return bad("need eps_abs > 0 or eps_rel > 0, both non-negative");
        }
        if !(self.penalty_update_factor > 1.0) {
            return bad("penalty_update_factor must exceed 1");
        }
        if !(self.penalty_trigger > 0.0 && self.penalty_trigger < 1.0) {
            return bad("penalty_trigger must lie in (0, 1)");
        }
        if !(self.prox_delta > 0.0 && self.prox_delta.is_finite()) {
            return bad("prox_delta must be positive");
        }
        if let InitialSigma::Fixed(s) = self.initial_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("initial sigma must be positive");
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration limits must be positive");
        }
        if !crate::compact::LANE_WIDTHS.contains(&self.lanes) {
            return bad("lane width must be 1, 2, 4 or 8");
        }
        Ok(())
    }
}

/// Iterates and weights of the augmented Lagrangian method.
#[derive(Clone, Debug)]
pub struct AlmState {
    pub x: PrimalVector,
    pub y: DualIneqVector,
    pub lam: DualEqVector,
    /// Penalty weights `Σy`, positive on every stored entry.
    pub sigma_y: DualIneqVector,
    /// Diagonal of `Σx⁻¹`.
    pub prox: PrimalVector,
    /// Proximal center `x̄`.
    pub center: PrimalVector,
    pub outer_iter: usize,
    pub inner_iter: usize,
}

impl AlmState {
    /// Zero iterates with uniform weights `sigma` and proximal weight `delta`.
    pub fn new(dims: &OcpDims, sigma: f64, delta: f64) -> Self {
        let mut sigma_y = DualIneqVector::zeros(dims);
        sigma_y.fill(sigma);
        let mut prox = PrimalVector::zeros(dims);
        prox.fill(delta);
        Self {
            x: PrimalVector::zeros(dims),
            y: DualIneqVector::zeros(dims),
            lam: DualEqVector::zeros(dims),
            sigma_y,
            prox,
            center: PrimalVector::zeros(dims),
            outer_iter: 0,
            inner_iter: 0,
        }
    }

    fn check(&self, p: &OcpProblem, v: &PrimalVector) -> Result<(), AlmError> {
        let d = p.dims();
        let ok = v.conforms(d)
            && self.x.conforms(d)
            && self.y.conforms(d)
            && self.lam.conforms(d)
            && self.sigma_y.conforms(d)
            && self.prox.conforms(d)
            && self.center.conforms(d);
        if ok {
            Ok(())
        } else {
            Err(AlmError::DimensionMismatch("state does not conform to the problem".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    MaxIter,
    NumericalError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Solved => "solved",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::NumericalError => "numerical-error",
        })
    }
}

/// Wall-clock time per solver phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    /// Active set and Hessian assembly.
    pub assembly: Duration,
    pub stage_factor: Duration,
    pub psi_factor: Duration,
    pub substitution: Duration,
    pub line_search: Duration,
    pub total: Duration,
}

/// One inner iterate. The last record of an inner solve has `step = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerRecord {
    pub outer: usize,
    pub inner: usize,
    pub phi: f64,
    /// `‖∇φ + Mᵀλ‖∞` before the step.
    pub stationarity: f64,
    /// `‖Mx − b‖∞` before the step.
    pub eq_residual: f64,
    pub step: f64,
    pub active: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// `‖dist(Gx, C)‖∞`.
    pub primal_residual: f64,
    /// `‖Gx − Π_C(Gx + y)‖∞`, zero iff `y` is in the normal cone of `C` at `Gx`.
    pub complementarity_residual: f64,
    /// `‖Mx − b‖∞`.
    pub eq_residual: f64,
    /// `‖Qx + q + Mᵀλ + Gᵀy‖∞`.
    pub dual_residual: f64,
    pub objective: f64,
    pub timings: PhaseTimings,
    pub trace: Vec<InnerRecord>,
}

/// Primal and dual iterates in logical (unpadded) order.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lam: Vec<f64>,
}

/// KKT residuals of a candidate solution, computed from the model products.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub complementarity: f64,
    pub eq: f64,
    pub dual: f64,
    pub primal_scale: f64,
    pub dual_scale: f64,
    pub objective: f64,
}

impl Residuals {
    /// Residuals of `(x, y, λ)` for `problem`.
    pub fn evaluate(problem: &OcpProblem, x: &PrimalVector, y: &DualIneqVector, lam: &DualEqVector) -> Self {
        let dims = problem.dims();
        let mut w = PhiWork::new(dims);
        Self::evaluate_with(problem, x, y, lam, &mut w)
    }

    fn evaluate_with(
        p: &OcpProblem,
        x: &PrimalVector,
        y: &DualIneqVector,
        lam: &DualEqVector,
        w: &mut PhiWork,
    ) -> Self {
        p.mul_g_unchecked(x, &mut w.gx);
        p.mul_q_unchecked(x, &mut w.qx);
        p.eq_residual_unchecked(x, &mut w.eq);
        let (lo, hi) = (p.lower.as_slice(), p.upper.as_slice());
        let ys = y.as_slice();
        let mut primal = 0.0f64;
        let mut comp = 0.0f64;
        let mut pscale = 0.0f64;
        for (k, &g) in w.gx.as_slice().iter().enumerate() {
            primal = primal.max((g - g.clamp(lo[k], hi[k])).abs());
            comp = comp.max((g - (g + ys[k]).clamp(lo[k], hi[k])).abs());
            pscale = pscale.max(g.abs());
            for b in [lo[k], hi[k]] {
                if b.is_finite() {
                    pscale = pscale.max(b.abs());
                }
            }
        }
        let q = p.lin.as_slice();
        p.mul_mt_unchecked(lam, &mut w.grad);
        p.mul_gt_unchecked(y, &mut w.tmp);
        let mut dual = 0.0f64;
        let mut dscale = 0.0f64;
        let mut obj = 0.0;
        let xs = x.as_slice();
        for k in 0..xs.len() {
            let (qx, mt, gt) = (w.qx.as_slice()[k], w.grad.as_slice()[k], w.tmp.as_slice()[k]);
            dual = dual.max((qx + q[k] + mt + gt).abs());
            dscale = dscale.max(qx.abs()).max(q[k].abs()).max(mt.abs()).max(gt.abs());
            obj += xs[k] * (0.5 * qx + q[k]);
        }
        Self {
            primal,
            complementarity: comp,
            eq: w.eq.norm_inf(),
            dual,
            primal_scale: pscale,
            dual_scale: dscale,
            objective: obj,
        }
    }

    /// The termination test with tolerances `eps_abs`, `eps_rel`. Besides
    /// stationarity and feasibility it requires complementarity, without
    /// which a multiplier on a row that is slightly inactive goes unnoticed.
    pub fn converged(&self, eps_abs: f64, eps_rel: f64) -> bool {
        self.dual <= eps_abs + eps_rel * self.dual_scale
            && self.primal <= eps_abs + eps_rel * self.primal_scale
            && self.complementarity <= eps_abs + eps_rel * self.primal_scale
            && self.eq <= eps_abs
    }
}

/// How many times the proximal weight is raised after a failed factorization.
const MAX_PROX_ESCALATIONS: usize = 3;

/// A solver instance bound to one problem structure. All workspaces are
/// allocated at setup.
#[derive(Debug)]
pub struct Solver {
    problem: OcpProblem,
    settings: SolverSettings,
    pool: WorkerPool,
    variant: Variant,
    state: AlmState,
    weights: ActiveWeights,
    fact: StageFactorization,
    work: PhiWork,
    /// `∇φ + Mᵀλ` at the current inner iterate.
    resid: PrimalVector,
    dx: PrimalVector,
    dlam: DualEqVector,
    /// Per-row violation of the previous outer iteration.
    prev_violation: DualIneqVector,
    b_norm: f64,
}

impl Solver {
    /// Prepares a solver for `problem`, repacked to the lane width of `settings`.
    pub fn setup(problem: &OcpProblem, settings: SolverSettings) -> Result<Self, AlmError> {
        settings.validate()?;
        let problem = if problem.lane_width() == settings.lanes {
            problem.clone()
        } else {
            problem.with_lane_width(settings.lanes)?
        };
        let variant = settings.variant.resolve(&problem)?;
        let dims = *problem.dims();
        let b_norm = problem.rhs.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            pool: WorkerPool::new(settings.workers),
            variant,
            state: AlmState::new(&dims, 1.0, settings.prox_delta),
            weights: ActiveWeights::new(&dims),
            fact: StageFactorization::new(&dims, variant)?,
            work: PhiWork::new(&dims),
            resid: PrimalVector::zeros(&dims),
            dx: PrimalVector::zeros(&dims),
            dlam: DualEqVector::zeros(&dims),
            prev_violation: DualIneqVector::zeros(&dims),
            b_norm,
            problem,
            settings,
        })
    }

    pub fn problem(&self) -> &OcpProblem {
        &self.problem
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// The Hessian variant in use after resolving `Auto`.
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn state(&self) -> &AlmState {
        &self.state
    }

    /// Current iterates in logical order.
    pub fn solution(&self) -> Solution {
        let d = self.problem.dims();
        Solution {
            x: self.state.x.to_logical(d),
            y: self.state.y.to_logical(d),
            lam: self.state.lam.to_logical(d),
        }
    }

    /// Replaces the inequality bounds (logical vectors of length `m`).
    pub fn update_bounds(&mut self, lower: &[f64], upper: &[f64]) -> Result<(), AlmError> {
        self.problem.set_bounds(lower, upper)?;
        Ok(())
    }

    /// Replaces the linear cost (logical vector of length `n`).
    pub fn update_gradient(&mut self, q: &[f64]) -> Result<(), AlmError> {
        self.problem.set_linear_cost(q)?;
        Ok(())
    }

    pub fn update_initial_state(&mut self, x_init: &[f64]) -> Result<(), AlmError> {
        self.problem.set_initial_state(x_init)?;
        self.b_norm = self.problem.rhs.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(())
    }

    /// Solves from a cold start (all iterates zero) or from `warm_start`.
    pub fn solve(&mut self, warm_start: Option<&Solution>) -> Result<SolveReport, AlmError> {
        let t0 = Instant::now();
        let dims = *self.problem.dims();
        let st = &mut self.state;
        match warm_start {
            Some(w) => {
                st.x.set_logical(&dims, &w.x)?;
                st.y.set_logical(&dims, &w.y)?;
                st.lam.set_logical(&dims, &w.lam)?;
            }
            None => {
                st.x.fill(0.0);
                st.y.fill(0.0);
                st.lam.fill(0.0);
            }
        }
        st.center.copy_from(&st.x);
        st.outer_iter = 0;
        st.inner_iter = 0;
        let sigma0 = match self.settings.initial_sigma {
            InitialSigma::Fixed(s) => s,
            InitialSigma::Auto => self.auto_sigma(),
        };
        self.state.sigma_y.fill(sigma0.clamp(SIGMA_MIN, SIGMA_MAX));
        self.prev_violation.fill(f64::INFINITY);

        let mut report = SolveReport {
            status: SolveStatus::MaxIter,
            outer_iterations: 0,
            inner_iterations: 0,
            primal_residual: f64::INFINITY,
            complementarity_residual: f64::INFINITY,
            eq_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            objective: f64::NAN,
            timings: PhaseTimings::default(),
            trace: Vec::new(),
        };
        let eps_abs = self.settings.eps_abs;
        let mut inner_tol: f64 = 1.0;
        for k in 0..self.settings.max_outer {
            self.state.outer_iter = k + 1;
            report.outer_iterations = k + 1;
            self.state.prox.fill(self.settings.prox_delta);
            match self.inner_solve(inner_tol, &mut report) {
                Ok(()) => {}
                Err(AlmError::Kkt(KktError::NonPositivePivot { .. })) => {
                    report.status = SolveStatus::NumericalError;
                    break;
                }
                Err(e) => return Err(e),
            }
            // (x, y, λ) before the dual update is a candidate too, which makes
            // a warm start at a solution a fixed point
            if self.check_termination(&mut report) {
                break;
            }
            self.outer_update();
            if self.check_termination(&mut report) {
                break;
            }
            inner_tol = (0.1 * inner_tol).max(0.1 * eps_abs);
        }
        report.inner_iterations = self.state.inner_iter;
        report.timings.total = t0.elapsed();
        Ok(report)
    }

    /// Records the residuals of the current iterates; true when converged.
    fn check_termination(&mut self, report: &mut SolveReport) -> bool {
        let st = &self.state;
        let r = Residuals::evaluate_with(&self.problem, &st.x, &st.y, &st.lam, &mut self.work);
        report.primal_residual = r.primal;
        report.complementarity_residual = r.complementarity;
        report.eq_residual = r.eq;
        report.dual_residual = r.dual;
        report.objective = r.objective;
        if r.converged(self.settings.eps_abs, self.settings.eps_rel) {
            report.status = SolveStatus::Solved;
        }
        report.status == SolveStatus::Solved
    }

    fn auto_sigma(&mut self) -> f64 {
        let p = &self.problem;
        let w = &mut self.work;
        p.mul_q_unchecked(&self.state.x, &mut w.qx);
        p.mul_g_unchecked(&self.state.x, &mut w.gx);
        let xs = self.state.x.as_slice();
        let f: f64 = (0..xs.len()).map(|k| xs[k] * (0.5 * w.qx.as_slice()[k] + p.lin.as_slice()[k])).sum();
        let g2 = 0.5 * w.gx.dot(&w.gx);
        (20.0 * f.abs().max(1.0) / g2.max(1.0)).clamp(1e-4, 1e4)
    }

    /// Dual update `y ← Σy(z − Π_C(z))`, per-row penalty increase and new
    /// proximal center.
    fn outer_update(&mut self) {
        let p = &self.problem;
        let w = &mut self.work;
        p.mul_g_unchecked(&self.state.x, &mut w.gx);
        let (lo, hi) = (p.lower.as_slice(), p.upper.as_slice());
        let (delta, theta) = (self.settings.penalty_update_factor, self.settings.penalty_trigger);
        let eps = self.settings.eps_abs;
        let st = &mut self.state;
        let gx = w.gx.as_slice();
        let y = st.y.as_mut_slice();
        let s = st.sigma_y.as_mut_slice();
        let prev = self.prev_violation.as_mut_slice();
        for k in 0..gx.len() {
            let z = shifted(gx[k], y[k], s[k]);
            let proj = z.clamp(lo[k], hi[k]);
            y[k] = s[k] * (z - proj);
            // violation of Gx against the projected point
            let e = (gx[k] - proj).abs();
            if e > eps && e > theta * prev[k] {
                s[k] = (s[k] * delta).clamp(SIGMA_MIN, SIGMA_MAX);
            }
            prev[k] = e;
        }
        st.center.copy_from(&st.x);
    }

    /// Refactorizes the Newton system, raising the proximal weight if a
    /// pivot fails.
    fn refactor(&mut self, t: &mut PhaseTimings) -> Result<(), AlmError> {
        let mut escalations = 0;
        loop {
            let t0 = Instant::now();
            self.fact.assemble(&self.problem, &self.weights, &self.state.prox, &self.pool)?;
            let t1 = Instant::now();
            let r = self.fact.factor_stages(&self.problem, &self.pool);
            let t2 = Instant::now();
            let r = r.and_then(|_| self.fact.factor_psi());
            t.assembly += t1 - t0;
            t.stage_factor += t2 - t1;
            t.psi_factor += t2.elapsed();
            match r {
                Ok(()) => return Ok(()),
                Err(KktError::NonPositivePivot { .. }) if escalations < MAX_PROX_ESCALATIONS => {
                    escalations += 1;
                    self.state.prox.scale(10.0);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn inner_solve(&mut self, tol: f64, report: &mut SolveReport) -> Result<(), AlmError> {
        let mut factored = false;
        let feas_tol = 1e-11 * (1.0 + self.b_norm);
        for it in 0..=self.settings.max_inner {
            let t0 = Instant::now();
            let phi = self.work.eval(&self.problem, &self.state, &self.state.x, true);
            self.problem.mul_mt_unchecked(&self.state.lam, &mut self.resid);
            self.resid.axpy(1.0, &self.work.grad);
            let stat = self.resid.norm_inf();
            self.problem.eq_residual_unchecked(&self.state.x, &mut self.work.eq);
            let eq = self.work.eq.norm_inf();
            // the first step restores Mx = b even when the tolerance is loose
            if stat <= tol && eq <= tol && (it > 0 || eq <= feas_tol) {
                if self.settings.trace {
                    report.trace.push(InnerRecord {
                        outer: self.state.outer_iter,
                        inner: it,
                        phi,
                        stationarity: stat,
                        eq_residual: eq,
                        step: 0.0,
                        active: self.weights.active_count(),
                    });
                }
                return Ok(());
            }
            if it == self.settings.max_inner {
                break;
            }
            let changed = update_active_weights(
                &self.problem,
                &self.state.sigma_y,
                &self.state.y,
                &self.work.gx,
                &mut self.weights,
            );
            report.timings.assembly += t0.elapsed();
            if changed || !factored {
                self.refactor(&mut report.timings)?;
                factored = true;
            }

            let t1 = Instant::now();
            self.fact.solve(
                &self.problem,
                &self.work.grad,
                &self.state.lam,
                &self.work.eq,
                &mut self.dx,
                &mut self.dlam,
            )?;
            let t2 = Instant::now();
            report.timings.substitution += t2 - t1;

            let tau = if eq > feas_tol {
                1.0
            } else {
                match self.work.line_search(&self.problem, &self.state, &self.resid, &self.dx) {
                    Ok(t) => t,
                    Err(AlmError::NonDescentDirection { .. }) => {
                        // x is stationary up to rounding; only λ can still improve
                        self.state.lam.axpy(1.0, &self.dlam);
                        report.timings.line_search += t2.elapsed();
                        return Ok(());
                    }
                    Err(e) => return Err(e),
                }
            };
            report.timings.line_search += t2.elapsed();
            if self.settings.trace {
                report.trace.push(InnerRecord {
                    outer: self.state.outer_iter,
                    inner: it,
                    phi,
                    stationarity: stat,
                    eq_residual: eq,
                    step: tau,
                    active: self.weights.active_count(),
                });
            }
            // λ + Δλ is the multiplier of the Newton model and does not depend
            // on the old λ, so it is taken in full whatever the step length
            self.state.x.axpy(tau, &self.dx);
            self.state.lam.axpy(1.0, &self.dlam);
            self.state.inner_iter += 1;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OcpData, StageData, TerminalData};
    use nalgebra::{DMatrix, DVector};

    /// One stage, scalar state and input, single constraint on `x₀`.
    fn scalar_problem(upper: f64) -> OcpProblem {
        let mut st = StageData::zeros(1, 1, 1);
        st.q[(0, 0)] = 1.0;
        st.c[(0, 0)] = 1.0;
        st.upper[0] = upper;
        let mut t = TerminalData::zeros(1, 0);
        t.q[(0, 0)] = 1.0;
        let data = OcpData { stages: vec![st], terminal: t, x_init: DVector::from_element(1, 0.0) };
        OcpProblem::new(&data, 1).unwrap()
    }

    #[test]
    fn hand_evaluated_phi_and_gradient() {
        // Q = 1, q = 0, G = 1, b_u = 0, y = 0, σ = 1, x̄ = x: at x = 2, φ = 2 + 2 = 4 and ∇φ = 4
        let p = scalar_problem(0.0);
        let dims = *p.dims();
        let mut st = AlmState::new(&dims, 1.0, 0.0);
        let x = PrimalVector::from_logical(&dims, &[2.0, 0.0, 0.0]).unwrap();
        st.center.copy_from(&x);
        assert_eq!(eval_phi(&p, &st, &x).unwrap(), 4.0);
        assert_eq!(eval_grad_phi(&p, &st, &x).unwrap().to_logical(&dims), vec![4.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_minimized_line_search() {
        // φ(τ) = ½(2 − 2τ)² + ½max(2 − 2τ, 0)² along Δx = −2 from x = 2
        let p = scalar_problem(0.0);
        let dims = *p.dims();
        let st = AlmState::new(&dims, 1.0, 0.0);
        let x = PrimalVector::from_logical(&dims, &[2.0, 0.0, 0.0]).unwrap();
        let dx = PrimalVector::from_logical(&dims, &[-2.0, 0.0, 0.0]).unwrap();
        assert_eq!(exact_line_search(&p, &st, &x, &dx).unwrap(), 1.0);
        let up = PrimalVector::from_logical(&dims, &[2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(exact_line_search(&p, &st, &x, &up), Err(AlmError::NonDescentDirection { .. })));
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = [
            SolverSettings { eps_abs: 0.0, eps_rel: 0.0, ..Default::default() },
            SolverSettings { penalty_update_factor: 1.0, ..Default::default() },
            SolverSettings { penalty_trigger: 1.0, ..Default::default() },
            SolverSettings { lanes: 3, ..Default::default() },
        ];
        for s in bad {
            assert!(matches!(s.validate(), Err(AlmError::InvalidSettings(_))));
        }
    }

    #[test]
    fn scalar_problem_solves() {
        let mut st = StageData::zeros(1, 1, 1);
        st.q[(0, 0)] = 1.0;
        st.a[(0, 0)] = 1.0;
        st.b[(0, 0)] = 1.0;
        st.d[(0, 0)] = 1.0;
        st.lower[0] = -0.5;
        st.upper[0] = 0.5;
        let mut t = TerminalData::zeros(1, 0);
        t.q = DMatrix::from_element(1, 1, 10.0);
        let data = OcpData { stages: vec![st], terminal: t, x_init: DVector::from_element(1, 2.0) };
        let p = OcpProblem::new(&data, 1).unwrap();
        let mut s = Solver::setup(&p, SolverSettings::default()).unwrap();
        let r = s.solve(None).unwrap();
        assert_eq!(r.status, SolveStatus::Solved);
        // the input saturates at −0.5 (unconstrained optimum is −20/11)
        let sol = s.solution();
        assert!((sol.x[1] + 0.5).abs() < 1e-7, "{sol:?}");
        assert!((sol.x[2] - 1.5).abs() < 1e-7);
    }
}

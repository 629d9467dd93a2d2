//! Problem data of a linear-quadratic optimal control problem.
//!
//! Users describe a problem stage by stage in naive layout ([`OcpData`]);
//! [`OcpProblem::new`] validates it and converts it once into the compact
//! layout used by the solver. Stage `N` (terminal) is stored as an ordinary
//! stage with `S = 0`, `R = I`, `D = 0`, no dynamics, and slots past it are
//! filled with inert stages, so every stage loop is uniform.

mod io;
mod products;
mod vectors;

pub use io::{read_problem, read_problem_binary, read_problem_json, write_problem_binary, write_problem_json, IoError};
pub use vectors::{DualEqVector, DualIneqVector, PrimalVector};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::compact::{check_lane_width, CompactBatch, KernelError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid problem: {0}")]
    Invalid(ValidationReport),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Problem dimensions and lane width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OcpDims {
    /// Number of non-terminal stages `N`.
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    /// Inequality rows per non-terminal stage.
    pub ny: usize,
    /// Inequality rows of the terminal stage.
    pub ny_terminal: usize,
    /// Lane width of the compact layout.
    pub lanes: usize,
}

impl OcpDims {
    pub fn new(
        horizon: usize,
        nx: usize,
        nu: usize,
        ny: usize,
        ny_terminal: usize,
        lanes: usize,
    ) -> Result<Self, ModelError> {
        check_lane_width(lanes)?;
        if horizon == 0 || nx == 0 || nu == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "need N, n_x, n_u >= 1, got N={horizon}, n_x={nx}, n_u={nu}"
            )));
        }
        Ok(Self { horizon, nx, nu, ny, ny_terminal, lanes })
    }

    /// Number of primal variables `N(n_x + n_u) + n_x`.
    pub fn n(&self) -> usize {
        self.horizon * (self.nx + self.nu) + self.nx
    }

    /// Number of equality constraints `(N + 1) n_x`.
    pub fn p(&self) -> usize {
        (self.horizon + 1) * self.nx
    }

    /// Number of inequality rows `N n_y + n_yN`.
    pub fn m(&self) -> usize {
        self.horizon * self.ny + self.ny_terminal
    }

    pub fn nxu(&self) -> usize {
        self.nx + self.nu
    }

    /// Inequality rows per stored stage: terminal rows are padded to the
    /// common count with zero rows and infinite bounds.
    pub fn ny_padded(&self) -> usize {
        self.ny.max(self.ny_terminal)
    }

    /// Stored stages: `N` regular stages plus the terminal one.
    pub fn stages(&self) -> usize {
        self.horizon + 1
    }

    pub fn nblocks(&self) -> usize {
        self.stages().div_ceil(self.lanes)
    }

    /// Stage slots including fillers, a multiple of the lane width.
    pub fn slots(&self) -> usize {
        self.nblocks() * self.lanes
    }

    /// Inequality rows of stage `j`.
    pub fn ny_at(&self, j: usize) -> usize {
        if j < self.horizon {
            self.ny
        } else if j == self.horizon {
            self.ny_terminal
        } else {
            0
        }
    }

    /// Input dimension of stage `j` in the logical problem.
    pub fn nu_at(&self, j: usize) -> usize {
        if j < self.horizon {
            self.nu
        } else {
            0
        }
    }
}

/// One non-terminal stage in naive layout.
#[derive(Clone, Debug, PartialEq)]
pub struct StageData {
    /// State cost `Q_j` (n_x × n_x).
    pub q: DMatrix<f64>,
    /// Cross cost `S_j` (n_u × n_x).
    pub s: DMatrix<f64>,
    /// Input cost `R_j` (n_u × n_u).
    pub r: DMatrix<f64>,
    pub q_lin: DVector<f64>,
    pub r_lin: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Dynamics offset `c_j`.
    pub offset: DVector<f64>,
    /// State constraint matrix `C_j` (n_y × n_x).
    pub c: DMatrix<f64>,
    /// Input constraint matrix `D_j` (n_y × n_u).
    pub d: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl StageData {
    /// Stage with zero data of the given dimensions, `R = I` and unbounded rows.
    pub fn zeros(nx: usize, nu: usize, ny: usize) -> Self {
        Self {
            q: DMatrix::zeros(nx, nx),
            s: DMatrix::zeros(nu, nx),
            r: DMatrix::identity(nu, nu),
            q_lin: DVector::zeros(nx),
            r_lin: DVector::zeros(nu),
            a: DMatrix::zeros(nx, nx),
            b: DMatrix::zeros(nx, nu),
            offset: DVector::zeros(nx),
            c: DMatrix::zeros(ny, nx),
            d: DMatrix::zeros(ny, nu),
            lower: DVector::from_element(ny, f64::NEG_INFINITY),
            upper: DVector::from_element(ny, f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminalData {
    pub q: DMatrix<f64>,
    pub q_lin: DVector<f64>,
    pub c: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl TerminalData {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            q: DMatrix::zeros(nx, nx),
            q_lin: DVector::zeros(nx),
            c: DMatrix::zeros(ny, nx),
            lower: DVector::from_element(ny, f64::NEG_INFINITY),
            upper: DVector::from_element(ny, f64::INFINITY),
        }
    }
}

/// A complete problem in naive per-stage layout.
#[derive(Clone, Debug, PartialEq)]
pub struct OcpData {
    pub stages: Vec<StageData>,
    pub terminal: TerminalData,
    pub x_init: DVector<f64>,
}

impl OcpData {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn nx(&self) -> usize {
        self.x_init.len()
    }

    pub fn nu(&self) -> usize {
        self.stages.first().map_or(0, |s| s.r.nrows())
    }

    pub fn ny(&self) -> usize {
        self.stages.first().map_or(0, |s| s.c.nrows())
    }

    pub fn ny_terminal(&self) -> usize {
        self.terminal.c.nrows()
    }

    /// Checks dimensions, positive definiteness of every `R_j` and the bound
    /// ordering. Never fails; problems are listed in the report.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let (nx, nu, ny, nyt) = (self.nx(), self.nu(), self.ny(), self.ny_terminal());
        if self.stages.is_empty() {
            issues.push("horizon must contain at least one stage".to_string());
        }
        if nx == 0 {
            issues.push("state dimension must be at least 1".to_string());
        }
        if !self.stages.is_empty() && nu == 0 {
            issues.push("input dimension must be at least 1".to_string());
        }
        let mut shape = |what: &str, j: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                issues.push(format!(
                    "{what}_{j} has shape {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                ));
                false
            } else {
                true
            }
        };
        let mut shapes_ok = true;
        for (j, st) in self.stages.iter().enumerate() {
            let j = j.to_string();
            shapes_ok &= shape("Q", &j, st.q.shape(), (nx, nx));
            shapes_ok &= shape("S", &j, st.s.shape(), (nu, nx));
            shapes_ok &= shape("R", &j, st.r.shape(), (nu, nu));
            shapes_ok &= shape("q", &j, st.q_lin.shape(), (nx, 1));
            shapes_ok &= shape("r", &j, st.r_lin.shape(), (nu, 1));
            shapes_ok &= shape("A", &j, st.a.shape(), (nx, nx));
            shapes_ok &= shape("B", &j, st.b.shape(), (nx, nu));
            shapes_ok &= shape("c", &j, st.offset.shape(), (nx, 1));
            shapes_ok &= shape("C", &j, st.c.shape(), (ny, nx));
            shapes_ok &= shape("D", &j, st.d.shape(), (ny, nu));
            shapes_ok &= shape("bl", &j, st.lower.shape(), (ny, 1));
            shapes_ok &= shape("bu", &j, st.upper.shape(), (ny, 1));
        }
        let t = &self.terminal;
        shapes_ok &= shape("Q", "N", t.q.shape(), (nx, nx));
        shapes_ok &= shape("q", "N", t.q_lin.shape(), (nx, 1));
        shapes_ok &= shape("C", "N", t.c.shape(), (nyt, nx));
        shapes_ok &= shape("bl", "N", t.lower.shape(), (nyt, 1));
        shapes_ok &= shape("bu", "N", t.upper.shape(), (nyt, 1));
        if !shapes_ok {
            return ValidationReport { issues };
        }

        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        for (j, st) in self.stages.iter().enumerate() {
            let data_finite = [&st.q, &st.s, &st.r, &st.a, &st.b, &st.c, &st.d]
                .into_iter()
                .all(finite)
                && [&st.q_lin, &st.r_lin, &st.offset].into_iter().all(|v| v.iter().all(|x| x.is_finite()));
            if !data_finite {
                issues.push(format!("stage {j} contains non-finite data"));
            }
            let r_sym = (&st.r + st.r.transpose()) * 0.5;
            if r_sym.cholesky().is_none() || !finite(&st.r) {
                issues.push(format!("R_{j} not positive definite"));
            }
            bound_issues(&mut issues, &format!("stage {j}"), &st.lower, &st.upper);
        }
        if !finite(&t.q) || !t.q_lin.iter().all(|v| v.is_finite()) || !finite(&t.c) {
            issues.push("terminal stage contains non-finite data".to_string());
        }
        bound_issues(&mut issues, "terminal stage", &t.lower, &t.upper);
        if !self.x_init.iter().all(|v| v.is_finite()) {
            issues.push("x_init contains non-finite data".to_string());
        }
        ValidationReport { issues }
    }
}

fn bound_issues(issues: &mut Vec<String>, at: &str, lower: &DVector<f64>, upper: &DVector<f64>) {
    for (i, (&l, &u)) in lower.iter().zip(upper.iter()).enumerate() {
        if l.is_nan() || u.is_nan() {
            issues.push(format!("NaN bound at {at}, row {i}"));
        } else if l == f64::INFINITY || u == f64::NEG_INFINITY {
            issues.push(format!("empty bound at {at}, row {i}"));
        } else if l > u {
            issues.push(format!("bound crossing at {at}, row {i}"));
        }
    }
}

/// Outcome of [`OcpData::validate`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.issues.is_empty() {
            write!(f, "pass")
        } else {
            write!(f, "{}", self.issues.join("; "))
        }
    }
}

/// Validated problem in compact layout.
///
/// Stage slot `j ≤ N` holds stage `j` (slot `N` is the terminal stage); the
/// remaining slots up to a multiple of the lane width are inert fillers.
#[derive(Clone, Debug)]
pub struct OcpProblem {
    pub(crate) dims: OcpDims,
    /// `[Q Sᵀ; S R]`, stored in full.
    pub(crate) cost: CompactBatch,
    /// `[q; r]`.
    pub(crate) lin: CompactBatch,
    /// `[A B]`.
    pub(crate) dynamics: CompactBatch,
    /// Right-hand side of `Mx = b`: slot 0 holds `x_init`, slot `j + 1`
    /// holds `c_j`.
    pub(crate) rhs: CompactBatch,
    /// `[C D]`.
    pub(crate) constraints: CompactBatch,
    pub(crate) lower: CompactBatch,
    pub(crate) upper: CompactBatch,
}

impl OcpProblem {
    /// Validates `data` and converts it to compact layout with lane width `lanes`.
    pub fn new(data: &OcpData, lanes: usize) -> Result<Self, ModelError> {
        let report = data.validate();
        if !report.is_ok() {
            return Err(ModelError::Invalid(report));
        }
        let dims = OcpDims::new(
            data.horizon(),
            data.nx(),
            data.nu(),
            data.ny(),
            data.ny_terminal(),
            lanes,
        )?;
        let (nx, nu, nxu, nyp) = (dims.nx, dims.nu, dims.nxu(), dims.ny_padded());
        let stages = dims.stages();
        let mut p = Self {
            dims,
            cost: CompactBatch::zeros(nxu, nxu, stages, lanes)?,
            lin: CompactBatch::zeros(nxu, 1, stages, lanes)?,
            dynamics: CompactBatch::zeros(nx, nxu, stages, lanes)?,
            rhs: CompactBatch::zeros(nx, 1, stages, lanes)?,
            constraints: CompactBatch::zeros(nyp, nxu, stages, lanes)?,
            lower: CompactBatch::zeros(nyp, 1, stages, lanes)?,
            upper: CompactBatch::zeros(nyp, 1, stages, lanes)?,
        };
        for (j, st) in data.stages.iter().enumerate() {
            let q = (&st.q + st.q.transpose()) * 0.5;
            let r = (&st.r + st.r.transpose()) * 0.5;
            for l in 0..nx {
                for i in 0..nx {
                    p.cost.set(i, l, j, q[(i, l)]);
                }
                for i in 0..nu {
                    p.cost.set(nx + i, l, j, st.s[(i, l)]);
                    p.cost.set(l, nx + i, j, st.s[(i, l)]);
                }
            }
            for l in 0..nu {
                for i in 0..nu {
                    p.cost.set(nx + i, nx + l, j, r[(i, l)]);
                }
            }
            for i in 0..nx {
                p.lin.set(i, 0, j, st.q_lin[i]);
                p.rhs.set(i, 0, j + 1, st.offset[i]);
                for l in 0..nx {
                    p.dynamics.set(i, l, j, st.a[(i, l)]);
                }
                for l in 0..nu {
                    p.dynamics.set(i, nx + l, j, st.b[(i, l)]);
                }
            }
            for i in 0..nu {
                p.lin.set(nx + i, 0, j, st.r_lin[i]);
            }
            for i in 0..nyp {
                let inside = i < dims.ny;
                for l in 0..nx {
                    p.constraints.set(i, l, j, if inside { st.c[(i, l)] } else { 0.0 });
                }
                for l in 0..nu {
                    p.constraints.set(i, nx + l, j, if inside { st.d[(i, l)] } else { 0.0 });
                }
                p.lower.set(i, 0, j, if inside { st.lower[i] } else { f64::NEG_INFINITY });
                p.upper.set(i, 0, j, if inside { st.upper[i] } else { f64::INFINITY });
            }
        }
        let t = &data.terminal;
        let n = dims.horizon;
        let qn = (&t.q + t.q.transpose()) * 0.5;
        for i in 0..nx {
            p.lin.set(i, 0, n, t.q_lin[i]);
            p.rhs.set(i, 0, 0, data.x_init[i]);
            for l in 0..nx {
                p.cost.set(i, l, n, qn[(i, l)]);
            }
        }
        for i in 0..nu {
            p.cost.set(nx + i, nx + i, n, 1.0);
        }
        for i in 0..nyp {
            let inside = i < dims.ny_terminal;
            for l in 0..nx {
                p.constraints.set(i, l, n, if inside { t.c[(i, l)] } else { 0.0 });
            }
            p.lower.set(i, 0, n, if inside { t.lower[i] } else { f64::NEG_INFINITY });
            p.upper.set(i, 0, n, if inside { t.upper[i] } else { f64::INFINITY });
        }
        p.fill_padding();
        Ok(p)
    }

    /// Writes the inert filler stages past the terminal slot: `R = I`,
    /// everything else zero, unbounded rows.
    fn fill_padding(&mut self) {
        let (nx, nxu, nyp) = (self.dims.nx, self.dims.nxu(), self.dims.ny_padded());
        for j in self.dims.stages()..self.dims.slots() {
            for l in 0..nxu {
                for i in 0..nxu {
                    let v = if i == l && i >= nx { 1.0 } else { 0.0 };
                    self.cost.set(i, l, j, v);
                }
            }
            for i in 0..nyp {
                self.lower.set(i, 0, j, f64::NEG_INFINITY);
                self.upper.set(i, 0, j, f64::INFINITY);
            }
        }
    }

    pub fn dims(&self) -> &OcpDims {
        &self.dims
    }

    pub fn lane_width(&self) -> usize {
        self.dims.lanes
    }

    /// The same problem repacked for lane width `lanes`. Logical dimensions
    /// are unchanged; only the number of filler slots differs.
    pub fn with_lane_width(&self, lanes: usize) -> Result<Self, ModelError> {
        let mut dims = self.dims;
        check_lane_width(lanes)?;
        dims.lanes = lanes;
        let mut p = Self {
            dims,
            cost: self.cost.with_lane_width(lanes)?,
            lin: self.lin.with_lane_width(lanes)?,
            dynamics: self.dynamics.with_lane_width(lanes)?,
            rhs: self.rhs.with_lane_width(lanes)?,
            constraints: self.constraints.with_lane_width(lanes)?,
            lower: self.lower.with_lane_width(lanes)?,
            upper: self.upper.with_lane_width(lanes)?,
        };
        p.fill_padding();
        Ok(p)
    }

    /// Converts back to naive per-stage data.
    pub fn to_data(&self) -> OcpData {
        let d = &self.dims;
        let (nx, nu, ny, nyt) = (d.nx, d.nu, d.ny, d.ny_terminal);
        let stages = (0..d.horizon)
            .map(|j| {
                let cost = self.cost.stage(j);
                let dynm = self.dynamics.stage(j);
                let con = self.constraints.stage(j);
                let lin = self.lin.stage(j);
                StageData {
                    q: cost.view((0, 0), (nx, nx)).into_owned(),
                    s: cost.view((nx, 0), (nu, nx)).into_owned(),
                    r: cost.view((nx, nx), (nu, nu)).into_owned(),
                    q_lin: DVector::from_fn(nx, |i, _| lin[(i, 0)]),
                    r_lin: DVector::from_fn(nu, |i, _| lin[(nx + i, 0)]),
                    a: dynm.view((0, 0), (nx, nx)).into_owned(),
                    b: dynm.view((0, nx), (nx, nu)).into_owned(),
                    offset: DVector::from_fn(nx, |i, _| self.rhs.get(i, 0, j + 1)),
                    c: con.view((0, 0), (ny, nx)).into_owned(),
                    d: con.view((0, nx), (ny, nu)).into_owned(),
                    lower: DVector::from_fn(ny, |i, _| self.lower.get(i, 0, j)),
                    upper: DVector::from_fn(ny, |i, _| self.upper.get(i, 0, j)),
                }
            })
            .collect();
        let n = d.horizon;
        let cost = self.cost.stage(n);
        let con = self.constraints.stage(n);
        OcpData {
            stages,
            terminal: TerminalData {
                q: cost.view((0, 0), (nx, nx)).into_owned(),
                q_lin: DVector::from_fn(nx, |i, _| self.lin.get(i, 0, n)),
                c: con.view((0, 0), (nyt, nx)).into_owned(),
                lower: DVector::from_fn(nyt, |i, _| self.lower.get(i, 0, n)),
                upper: DVector::from_fn(nyt, |i, _| self.upper.get(i, 0, n)),
            },
            x_init: DVector::from_fn(nx, |i, _| self.rhs.get(i, 0, 0)),
        }
    }

    /// Stage cost blocks `[Q Sᵀ; S R]` in compact layout.
    pub fn cost_blocks(&self) -> &CompactBatch {
        &self.cost
    }

    /// Dynamics blocks `[A B]` in compact layout.
    pub fn dynamics_blocks(&self) -> &CompactBatch {
        &self.dynamics
    }

    /// Constraint blocks `[C D]` in compact layout.
    pub fn constraint_blocks(&self) -> &CompactBatch {
        &self.constraints
    }

    /// The stacked vector `q` of linear cost terms.
    pub fn linear_cost(&self) -> PrimalVector {
        PrimalVector::from_batch(self.lin.clone())
    }

    /// The right-hand side `b` of `Mx = b`.
    pub fn eq_rhs(&self) -> DualEqVector {
        DualEqVector::from_batch(self.rhs.clone())
    }

    pub fn lower_bounds(&self) -> DualIneqVector {
        DualIneqVector::from_batch(self.lower.clone())
    }

    pub fn upper_bounds(&self) -> DualIneqVector {
        DualIneqVector::from_batch(self.upper.clone())
    }

    /// Replaces the initial state.
    pub fn set_initial_state(&mut self, x_init: &[f64]) -> Result<(), ModelError> {
        if x_init.len() != self.dims.nx || x_init.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::DimensionMismatch(format!(
                "x_init needs {} finite entries",
                self.dims.nx
            )));
        }
        for (i, &v) in x_init.iter().enumerate() {
            self.rhs.set(i, 0, 0, v);
        }
        Ok(())
    }

    /// Replaces all inequality bounds, given as logical vectors of length `m`.
    pub fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) -> Result<(), ModelError> {
        let m = self.dims.m();
        if lower.len() != m || upper.len() != m {
            return Err(ModelError::DimensionMismatch(format!("bounds need {m} entries")));
        }
        let mut report = ValidationReport::default();
        bound_issues(
            &mut report.issues,
            "update",
            &DVector::from_column_slice(lower),
            &DVector::from_column_slice(upper),
        );
        if !report.is_ok() {
            return Err(ModelError::Invalid(report));
        }
        let mut lo = DualIneqVector::zeros(&self.dims);
        let mut hi = DualIneqVector::zeros(&self.dims);
        lo.set_logical(&self.dims, lower)?;
        hi.set_logical(&self.dims, upper)?;
        for j in 0..self.dims.stages() {
            for i in self.dims.ny_at(j)..self.dims.ny_padded() {
                lo.batch_mut().set(i, 0, j, f64::NEG_INFINITY);
                hi.batch_mut().set(i, 0, j, f64::INFINITY);
            }
        }
        self.lower = lo.into_batch();
        self.upper = hi.into_batch();
        self.fill_padding();
        Ok(())
    }

    /// Replaces the linear cost terms, given as a logical vector of length `n`.
    pub fn set_linear_cost(&mut self, q: &[f64]) -> Result<(), ModelError> {
        let mut v = PrimalVector::zeros(&self.dims);
        v.set_logical(&self.dims, q)?;
        self.lin = v.into_batch();
        Ok(())
    }
}

/// Repacks `problem` for lane width `lanes` (terminal stage embedded as a
/// padded stage, inert filler stages appended).
pub fn pad_horizon(problem: &OcpProblem, lanes: usize) -> Result<OcpProblem, ModelError> {
    problem.with_lane_width(lanes)
}

use super::{KktError, StageFactorization, Variant};
use crate::compact::kernels::{self, MatMut, MatRef};
use crate::compact::{with_lanes, CompactBatch, KernelConfig, KernelError, Side, Trans};
use crate::model::{DualEqVector, OcpDims, OcpProblem, PrimalVector};

#[derive(Clone, Debug)]
pub(super) struct Scratch {
    v: PrimalVector,
    r: PrimalVector,
    /// `Δλ` in naive per-stage layout for the `Ψ` sweeps.
    lam: CompactBatch,
}

impl Scratch {
    pub(super) fn new(dims: &OcpDims) -> Result<Self, KernelError> {
        Ok(Self {
            v: PrimalVector::zeros(dims),
            r: PrimalVector::zeros(dims),
            lam: CompactBatch::zeros(dims.nx, 1, dims.stages(), 1)?,
        })
    }
}

/// `x ← H⁻¹ x` stage by stage.
fn solve_h<const D: usize>(variant: Variant, l_h: &CompactBatch, l_h_diag: &CompactBatch, x: &mut PrimalVector) {
    let nxu = l_h.rows();
    let xb = x.batch_mut();
    for b in 0..l_h.nblocks() {
        let mut col = xb.block_view_mut::<D>(b);
        match variant {
            Variant::Diagonal => {
                let d = l_h_diag.block_view::<D>(b);
                for k in 0..nxu {
                    let (dk, xk) = (d.at(k, 0), col.at(k, 0));
                    for q in 0..D {
                        xk[q] = xk[q] / dk[q] / dk[q];
                    }
                }
            }
            _ => {
                let l = l_h.block_view::<D>(b);
                kernels::trsm::<D>(l, Side::Left, Trans::No, &mut col);
                kernels::trsm::<D>(l, Side::Left, Trans::Yes, &mut col);
            }
        }
    }
}

fn view(s: &[f64], rows: usize, cols: usize) -> MatRef<'_, 1> {
    MatRef::new(s.as_chunks::<1>().0, rows, cols)
}

fn view_mut(s: &mut [f64], rows: usize, cols: usize) -> MatMut<'_, 1> {
    MatMut::new(s.as_chunks_mut::<1>().0, rows, cols)
}

impl StageFactorization {
    /// `Ψ Δλ = rhs` with the block-bidiagonal factor, in place on `self.scratch.lam`.
    fn solve_psi(&mut self) {
        let (nx, n) = (self.dims.nx, self.dims.horizon);
        let len = nx * nx;
        let cfg = KernelConfig::for_shape(nx, 1, nx);
        let ld = self.l_psi_diag.as_slice();
        let ls = self.l_psi_sub.as_slice();
        let lam = self.scratch.lam.as_mut_slice();
        // forward: L y = rhs
        for j in 0..=n {
            let (done, rest) = lam.split_at_mut(j * nx);
            let mut yj = view_mut(&mut rest[..nx], nx, 1);
            if j > 0 {
                let prev = view(&done[(j - 1) * nx..], nx, 1);
                kernels::gemm::<1>(-1.0, view(&ls[(j - 1) * len..], nx, nx), prev, 1.0, &mut yj, &cfg);
            }
            kernels::trsm::<1>(view(&ld[j * len..], nx, nx), Side::Left, Trans::No, &mut yj);
        }
        // backward: Lᵀ Δλ = y
        for j in (0..=n).rev() {
            let (head, tail) = lam.split_at_mut((j + 1) * nx);
            let mut xj = view_mut(&mut head[j * nx..], nx, 1);
            if j < n {
                let next = view(&tail[..nx], nx, 1);
                kernels::gemm::<1>(-1.0, view(&ls[j * len..], nx, nx).t(), next, 1.0, &mut xj, &cfg);
            }
            kernels::trsm::<1>(view(&ld[j * len..], nx, nx), Side::Left, Trans::Yes, &mut xj);
        }
    }

    /// Solves the Newton system for `(Δx, Δλ)` given `∇φ`, `λ` and the
    /// equality residual `Mx − b`.
    pub fn solve(
        &mut self,
        problem: &OcpProblem,
        grad_phi: &PrimalVector,
        lam: &DualEqVector,
        eq_residual: &DualEqVector,
        dx: &mut PrimalVector,
        dlam: &mut DualEqVector,
    ) -> Result<(), KktError> {
        let dims = *problem.dims();
        let ok = self.conforms(problem)
            && grad_phi.conforms(&dims)
            && dx.conforms(&dims)
            && lam.conforms(&dims)
            && eq_residual.conforms(&dims)
            && dlam.conforms(&dims);
        if !ok {
            return Err(KktError::DimensionMismatch("solve: operands do not conform".into()));
        }

        // r = ∇φ + Mᵀλ, v = H⁻¹ r
        let r = &mut self.scratch.r;
        problem.mul_mt_unchecked(lam, r);
        r.axpy(1.0, grad_phi);
        let v = &mut self.scratch.v;
        v.copy_from(r);
        with_lanes!(dims.lanes, D => solve_h::<D>(self.variant, &self.l_h, &self.l_h_diag, v));

        // Ψ Δλ = (Mx − b) − M v
        problem.mul_m_unchecked(v, dlam);
        for (o, e) in dlam.as_mut_slice().iter_mut().zip(eq_residual.as_slice()) {
            *o = e - *o;
        }
        for j in 0..dims.stages() {
            for i in 0..dims.nx {
                self.scratch.lam.set(i, 0, j, dlam.batch().get(i, 0, j));
            }
        }
        self.solve_psi();
        dlam.fill(0.0);
        for j in 0..dims.stages() {
            for i in 0..dims.nx {
                dlam.batch_mut().set(i, 0, j, self.scratch.lam.get(i, 0, j));
            }
        }

        // Δx = −H⁻¹ (r + MᵀΔλ)
        problem.mul_mt_unchecked(dlam, dx);
        dx.axpy(1.0, &self.scratch.r);
        with_lanes!(dims.lanes, D => solve_h::<D>(self.variant, &self.l_h, &self.l_h_diag, dx));
        dx.scale(-1.0);
        Ok(())
    }
}

/// Three-step solution of the Newton system with factorization `f`.
pub fn solve_newton(
    problem: &OcpProblem,
    f: &mut StageFactorization,
    grad_phi: &PrimalVector,
    lam: &DualEqVector,
    eq_residual: &DualEqVector,
) -> Result<(PrimalVector, DualEqVector), KktError> {
    let mut dx = PrimalVector::zeros(problem.dims());
    let mut dlam = DualEqVector::zeros(problem.dims());
    f.solve(problem, grad_phi, lam, eq_residual, &mut dx, &mut dlam)?;
    Ok((dx, dlam))
}

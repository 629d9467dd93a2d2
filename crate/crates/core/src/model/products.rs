//! Structured products with the standard-form matrices `Q`, `M`, `G` and their
//! transposes, computed stage-wise on the compact data without assembling any
//! global matrix.
//!
//! `Q` and `G` are block diagonal, so their products are lane-local. `M`
//! couples stage `j` with stage `j + 1`; its products read the neighbouring
//! lane, which for the last lane of a block lives in the next block.

use super::{DualEqVector, DualIneqVector, ModelError, OcpProblem, PrimalVector};
use crate::compact::kernels::{self, Lanes};
use crate::compact::{with_lanes, CompactBatch, KernelConfig};

fn tuples<const D: usize>(b: &CompactBatch) -> &[Lanes<D>] {
    b.as_slice().as_chunks::<D>().0
}

fn tuples_mut<const D: usize>(b: &mut CompactBatch) -> &mut [Lanes<D>] {
    b.as_mut_slice().as_chunks_mut::<D>().0
}

/// `out ← Mx`: block 0 is `x⁰`, block `j + 1` is `x^{j+1} − A_j x^j − B_j u^j`.
fn mul_m_impl<const D: usize>(p: &OcpProblem, x: &CompactBatch, out: &mut CompactBatch) {
    let (nx, nxu, nb) = (p.dims.nx, p.dims.nxu(), p.dims.nblocks());
    let ab = tuples::<D>(&p.dynamics);
    let xt = tuples::<D>(x);
    let ot = tuples_mut::<D>(out);
    for b in 0..nb {
        for i in 0..nx {
            ot[b * nx + i] = xt[b * nxu + i];
        }
    }
    for b in 0..nb {
        let abb = &ab[b * nx * nxu..(b + 1) * nx * nxu];
        let xb = &xt[b * nxu..(b + 1) * nxu];
        for i in 0..nx {
            let mut t = [0.0; D];
            for (k, xk) in xb.iter().enumerate() {
                let a = &abb[k * nx + i];
                for q in 0..D {
                    t[q] += a[q] * xk[q];
                }
            }
            let o = &mut ot[b * nx + i];
            for q in 0..D - 1 {
                o[q + 1] -= t[q];
            }
            if b + 1 < nb {
                ot[(b + 1) * nx + i][0] -= t[D - 1];
            }
        }
    }
}

/// Tuple holding, in lane `q`, entry `k` of the stage following lane `q`.
#[inline(always)]
fn next_stage<const D: usize>(v: &[Lanes<D>], rows: usize, nb: usize, b: usize, k: usize) -> Lanes<D> {
    let cur = &v[b * rows + k];
    let mut s = [0.0; D];
    s[..D - 1].copy_from_slice(&cur[1..]);
    if b + 1 < nb {
        s[D - 1] = v[(b + 1) * rows + k][0];
    }
    s
}

/// `out ← Mᵀλ`: stage `j` gets `(λ^j − A_jᵀ λ^{j+1}, −B_jᵀ λ^{j+1})`.
fn mul_mt_impl<const D: usize>(p: &OcpProblem, lam: &CompactBatch, out: &mut CompactBatch) {
    let (nx, nxu, nb) = (p.dims.nx, p.dims.nxu(), p.dims.nblocks());
    let ab = tuples::<D>(&p.dynamics);
    let lt = tuples::<D>(lam);
    let ot = tuples_mut::<D>(out);
    for b in 0..nb {
        let abb = &ab[b * nx * nxu..(b + 1) * nx * nxu];
        let ob = &mut ot[b * nxu..(b + 1) * nxu];
        for (c, o) in ob.iter_mut().enumerate() {
            *o = if c < nx { lt[b * nx + c] } else { [0.0; D] };
        }
        for k in 0..nx {
            let s = next_stage::<D>(lt, nx, nb, b, k);
            for (c, o) in ob.iter_mut().enumerate() {
                let a = &abb[c * nx + k];
                for q in 0..D {
                    o[q] -= a[q] * s[q];
                }
            }
        }
    }
}

/// `out ← op(blocks)·v` lane by lane.
fn blockwise_mv<const D: usize>(blocks: &CompactBatch, transpose: bool, v: &CompactBatch, out: &mut CompactBatch) {
    let cfg = KernelConfig::default();
    for b in 0..blocks.nblocks() {
        let a = blocks.block_view::<D>(b);
        let a = if transpose { a.t() } else { a };
        kernels::gemm::<D>(1.0, a, v.block_view::<D>(b), 0.0, &mut out.block_view_mut::<D>(b), &cfg);
    }
}

impl OcpProblem {
    fn check(ok: bool, what: &str) -> Result<(), ModelError> {
        if ok {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch(format!("{what} does not conform to the problem")))
        }
    }

    /// `out ← Mx`.
    pub fn mul_m(&self, x: &PrimalVector, out: &mut DualEqVector) -> Result<(), ModelError> {
        Self::check(x.conforms(&self.dims) && out.conforms(&self.dims), "mul_m operand")?;
        self.mul_m_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn mul_m_unchecked(&self, x: &PrimalVector, out: &mut DualEqVector) {
        with_lanes!(self.dims.lanes, D => mul_m_impl::<D>(self, x.batch(), out.batch_mut()))
    }

    /// `out ← Mx − b`.
    pub fn eq_residual(&self, x: &PrimalVector, out: &mut DualEqVector) -> Result<(), ModelError> {
        self.mul_m(x, out)?;
        self.sub_rhs(out);
        Ok(())
    }

    pub(crate) fn eq_residual_unchecked(&self, x: &PrimalVector, out: &mut DualEqVector) {
        self.mul_m_unchecked(x, out);
        self.sub_rhs(out);
    }

    fn sub_rhs(&self, out: &mut DualEqVector) {
        for (o, b) in out.as_mut_slice().iter_mut().zip(self.rhs.as_slice()) {
            *o -= b;
        }
    }

    /// `out ← Mᵀλ`.
    pub fn mul_mt(&self, lam: &DualEqVector, out: &mut PrimalVector) -> Result<(), ModelError> {
        Self::check(lam.conforms(&self.dims) && out.conforms(&self.dims), "mul_mt operand")?;
        self.mul_mt_unchecked(lam, out);
        Ok(())
    }

    pub(crate) fn mul_mt_unchecked(&self, lam: &DualEqVector, out: &mut PrimalVector) {
        with_lanes!(self.dims.lanes, D => mul_mt_impl::<D>(self, lam.batch(), out.batch_mut()))
    }

    /// `out ← Gx`.
    pub fn mul_g(&self, x: &PrimalVector, out: &mut DualIneqVector) -> Result<(), ModelError> {
        Self::check(x.conforms(&self.dims) && out.conforms(&self.dims), "mul_g operand")?;
        self.mul_g_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn mul_g_unchecked(&self, x: &PrimalVector, out: &mut DualIneqVector) {
        with_lanes!(self.dims.lanes, D => blockwise_mv::<D>(&self.constraints, false, x.batch(), out.batch_mut()))
    }

    /// `out ← Gᵀz`.
    pub fn mul_gt(&self, z: &DualIneqVector, out: &mut PrimalVector) -> Result<(), ModelError> {
        Self::check(z.conforms(&self.dims) && out.conforms(&self.dims), "mul_gt operand")?;
        self.mul_gt_unchecked(z, out);
        Ok(())
    }

    pub(crate) fn mul_gt_unchecked(&self, z: &DualIneqVector, out: &mut PrimalVector) {
        with_lanes!(self.dims.lanes, D => blockwise_mv::<D>(&self.constraints, true, z.batch(), out.batch_mut()))
    }

    /// `out ← Qx`. The terminal and filler input slots carry the unit padding
    /// weight, which is inert because those entries are zero.
    pub fn mul_q(&self, x: &PrimalVector, out: &mut PrimalVector) -> Result<(), ModelError> {
        Self::check(x.conforms(&self.dims) && out.conforms(&self.dims), "mul_q operand")?;
        self.mul_q_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn mul_q_unchecked(&self, x: &PrimalVector, out: &mut PrimalVector) {
        with_lanes!(self.dims.lanes, D => blockwise_mv::<D>(&self.cost, false, x.batch(), out.batch_mut()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_data;
    use super::*;

    #[test]
    fn rollout_satisfies_dynamics() {
        let data = tiny_data(4);
        for lanes in [1, 2, 4, 8] {
            let p = OcpProblem::new(&data, lanes).unwrap();
            let dims = *p.dims();
            let mut x = data.x_init.clone();
            let mut flat = Vec::new();
            for (j, st) in data.stages.iter().enumerate() {
                let u = nalgebra::DVector::from_element(1, 0.3 * j as f64 - 0.2);
                flat.extend(x.iter());
                flat.extend(u.iter());
                x = &st.a * &x + &st.b * &u + &st.offset;
            }
            flat.extend(x.iter());
            let xv = PrimalVector::from_logical(&dims, &flat).unwrap();
            let mut r = DualEqVector::zeros(&dims);
            p.eq_residual(&xv, &mut r).unwrap();
            assert_eq!(r.norm_inf(), 0.0, "lanes={lanes}");
        }
    }

    #[test]
    fn identity_dynamics_on_ones() {
        let mut data = tiny_data(5);
        for st in &mut data.stages {
            st.a = nalgebra::DMatrix::identity(2, 2);
            st.b = nalgebra::DMatrix::zeros(2, 1);
        }
        let p = OcpProblem::new(&data, 4).unwrap();
        let dims = *p.dims();
        let x = PrimalVector::from_logical(&dims, &vec![1.0; dims.n()]).unwrap();
        let mut out = DualEqVector::zeros(&dims);
        p.mul_m(&x, &mut out).unwrap();
        let flat = out.to_logical(&dims);
        assert_eq!(&flat[..2], &[1.0, 1.0]);
        assert!(flat[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_vectors_rejected() {
        let p = OcpProblem::new(&tiny_data(3), 2).unwrap();
        let q = p.with_lane_width(4).unwrap();
        let x = PrimalVector::zeros(q.dims());
        let mut out = DualEqVector::zeros(p.dims());
        assert!(matches!(p.mul_m(&x, &mut out), Err(ModelError::DimensionMismatch(_))));
    }
}

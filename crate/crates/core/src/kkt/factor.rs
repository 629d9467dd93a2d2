use super::{ActiveWeights, FactorBlock, KktError, StageFactorization, Variant};
use crate::compact::kernels::{self, Lanes, MatMut, MatRef};
use crate::compact::{with_lanes, CompactBatch, KernelConfig, Side, Trans};
use crate::model::{OcpProblem, PrimalVector};
use crate::parallel::WorkerPool;

fn lanes_mut<const D: usize>(s: &mut [f64]) -> &mut [Lanes<D>] {
    s.as_chunks_mut::<D>().0
}

fn lanes<const D: usize>(s: &[f64]) -> &[Lanes<D>] {
    s.as_chunks::<D>().0
}

fn blocks_mut(b: &mut CompactBatch) -> std::slice::ChunksMut<'_, f64> {
    let len = b.block_len().max(1);
    b.as_mut_slice().chunks_mut(len)
}

/// First failing filled stage of block `b`, if any.
fn block_failure<const D: usize>(b: usize, stages: usize, lanes: &[Option<usize>; D]) -> Option<(usize, usize)> {
    lanes
        .iter()
        .enumerate()
        .filter_map(|(q, r)| r.map(|r| (b * D + q, r)))
        .find(|&(s, _)| s < stages)
}

struct AssembleTask<'a> {
    b: usize,
    h: &'a mut [f64],
    scaled_g: &'a mut [f64],
}

fn assemble_block<const D: usize>(
    problem: &OcpProblem,
    weights: &ActiveWeights,
    prox: &PrimalVector,
    variant: Variant,
    t: AssembleTask<'_>,
) {
    let dims = problem.dims();
    let (nxu, nyp) = (dims.nxu(), dims.ny_padded());
    let b = t.b;
    let cost = problem.cost.block_view::<D>(b);
    let g = problem.constraints.block_view::<D>(b);
    let sig = weights.sigma_active().batch().block_view::<D>(b);
    let px = prox.batch().block_view::<D>(b);
    let mut h = MatMut::<D>::new(lanes_mut::<D>(t.h), nxu, nxu);
    match variant {
        Variant::Diagonal => {
            for l in 0..nxu {
                for i in 0..nxu {
                    *h.at(i, l) = [0.0; D];
                }
                let mut acc = *cost.at(l, l);
                for i in 0..nyp {
                    let (gi, si) = (g.at(i, l), sig.at(i, 0));
                    for q in 0..D {
                        acc[q] += si[q] * gi[q] * gi[q];
                    }
                }
                let p = px.at(l, 0);
                for q in 0..D {
                    acc[q] += p[q];
                }
                *h.at(l, l) = acc;
            }
        }
        _ => {
            kernels::copy::<D>(cost, &mut h);
            if nyp > 0 {
                let mut sg = MatMut::<D>::new(lanes_mut::<D>(t.scaled_g), nyp, nxu);
                for i in 0..nyp {
                    let mut r = *sig.at(i, 0);
                    for v in &mut r {
                        *v = v.sqrt();
                    }
                    for l in 0..nxu {
                        let gi = g.at(i, l);
                        let o = sg.at(i, l);
                        for q in 0..D {
                            o[q] = r[q] * gi[q];
                        }
                    }
                }
                let cfg = KernelConfig::for_shape(nxu, nxu, nyp);
                kernels::syrk::<D>(1.0, sg.rb().t(), 1.0, &mut h, &cfg);
            }
            for l in 0..nxu {
                let p = *px.at(l, 0);
                let d = h.at(l, l);
                for q in 0..D {
                    d[q] += p[q];
                }
            }
            kernels::symmetrize_lower::<D>(&mut h);
        }
    }
}

impl StageFactorization {
    /// Assembles `H_j = [Q_j S_jᵀ; S_j R_j] + [C_j D_j]ᵀ Σ_j^J [C_j D_j] + (Σ_x⁻¹)_j`
    /// for every stage. `prox` holds the diagonal of `Σ_x⁻¹`.
    pub fn assemble(
        &mut self,
        problem: &OcpProblem,
        weights: &ActiveWeights,
        prox: &PrimalVector,
        pool: &WorkerPool,
    ) -> Result<(), KktError> {
        if !self.conforms(problem) || !prox.conforms(problem.dims()) {
            return Err(KktError::DimensionMismatch("assemble: operands do not conform".into()));
        }
        let variant = self.variant;
        let mut tasks = Vec::with_capacity(self.dims.nblocks());
        let mut gs = blocks_mut(&mut self.scaled_g);
        for (b, h) in blocks_mut(&mut self.h).enumerate() {
            tasks.push(AssembleTask { b, h, scaled_g: gs.next().unwrap_or_default() });
        }
        with_lanes!(self.dims.lanes, D => {
            pool.map(tasks, |t| assemble_block::<D>(problem, weights, prox, variant, t));
        });
        Ok(())
    }

    /// Per-stage Cholesky of `H_j` and the products `V_j`, `W_j`, then the
    /// blocks of `Ψ`. Stage blocks are distributed over `pool`.
    pub fn factor_stages(&mut self, problem: &OcpProblem, pool: &WorkerPool) -> Result<(), KktError> {
        if !self.conforms(problem) {
            return Err(KktError::DimensionMismatch("factor_stages: problem does not conform".into()));
        }
        let variant = self.variant;
        let stages = self.dims.stages();
        let mut tasks = Vec::with_capacity(self.dims.nblocks());
        {
            let h = &self.h;
            let mut lh = blocks_mut(&mut self.l_h);
            let mut lhd = blocks_mut(&mut self.l_h_diag);
            let mut v = blocks_mut(&mut self.v);
            let mut w = blocks_mut(&mut self.w);
            let mut vv = blocks_mut(&mut self.vv);
            let mut ww = blocks_mut(&mut self.ww);
            let mut vw = blocks_mut(&mut self.vw);
            for b in 0..self.dims.nblocks() {
                tasks.push(StageTask {
                    b,
                    h,
                    lh: lh.next().unwrap(),
                    lh_diag: lhd.next().unwrap(),
                    v: v.next().unwrap(),
                    w: w.next().unwrap(),
                    vv: vv.next().unwrap(),
                    ww: ww.next().unwrap(),
                    vw: vw.next().unwrap(),
                });
            }
        }
        let failures = with_lanes!(self.dims.lanes, D => {
            pool.map(tasks, |t| {
                let b = t.b;
                let lanes = match variant {
                    Variant::Diagonal => factor_block_diagonal::<D>(problem, t),
                    _ => factor_block_dense::<D>(problem, t),
                };
                block_failure::<D>(b, stages, &lanes)
            })
        });
        if let Some((stage, row)) = failures.into_iter().flatten().next() {
            return Err(KktError::NonPositivePivot { block: FactorBlock::Hessian, stage, row });
        }
        self.gather_psi();
        Ok(())
    }

    fn gather_psi(&mut self) {
        let (nx, n) = (self.dims.nx, self.dims.horizon);
        for j in 0..=n {
            for l in 0..nx {
                for i in l..nx {
                    let mut v = self.ww.get(i, l, j);
                    if j > 0 {
                        v += self.vv.get(i, l, j - 1);
                    }
                    self.psi_diag.set(i, l, j, v);
                    self.psi_diag.set(l, i, j, v);
                }
            }
            if j < n {
                for l in 0..nx {
                    for i in 0..nx {
                        self.psi_sub.set(i, l, j, self.vw.get(i, l, j));
                    }
                }
            }
        }
    }

    /// Block-bidiagonal Cholesky factorization of `Ψ`, stage by stage.
    pub fn factor_psi(&mut self) -> Result<(), KktError> {
        let (nx, n) = (self.dims.nx, self.dims.horizon);
        let len = nx * nx;
        let cfg = KernelConfig::for_shape(nx, nx, nx);
        self.l_psi_diag.as_mut_slice().copy_from_slice(self.psi_diag.as_slice());
        self.l_psi_sub.as_mut_slice().copy_from_slice(self.psi_sub.as_slice());
        let diag = self.l_psi_diag.as_mut_slice();
        let sub = self.l_psi_sub.as_mut_slice();
        for j in 0..=n {
            let (done, rest) = diag.split_at_mut(j * len);
            let mut dj = MatMut::<1>::new(lanes_mut::<1>(&mut rest[..len]), nx, nx);
            if j > 0 {
                let prev = MatRef::<1>::new(lanes::<1>(&done[(j - 1) * len..]), nx, nx);
                let mut s = MatMut::<1>::new(lanes_mut::<1>(&mut sub[(j - 1) * len..j * len]), nx, nx);
                kernels::trsm::<1>(prev, Side::Right, Trans::Yes, &mut s);
                kernels::syrk::<1>(-1.0, s.rb(), 1.0, &mut dj, &cfg);
            }
            if let Some(row) = kernels::potrf::<1>(&mut dj)[0] {
                return Err(KktError::NonPositivePivot { block: FactorBlock::Schur, stage: j, row });
            }
        }
        Ok(())
    }

    /// [`assemble`](Self::assemble), [`factor_stages`](Self::factor_stages)
    /// and [`factor_psi`](Self::factor_psi) in sequence.
    pub fn factor(
        &mut self,
        problem: &OcpProblem,
        weights: &ActiveWeights,
        prox: &PrimalVector,
        pool: &WorkerPool,
    ) -> Result<(), KktError> {
        self.assemble(problem, weights, prox, pool)?;
        self.factor_stages(problem, pool)?;
        self.factor_psi()
    }
}

struct StageTask<'a> {
    b: usize,
    h: &'a CompactBatch,
    lh: &'a mut [f64],
    lh_diag: &'a mut [f64],
    v: &'a mut [f64],
    w: &'a mut [f64],
    vv: &'a mut [f64],
    ww: &'a mut [f64],
    vw: &'a mut [f64],
}

/// `VVᵀ`, `WWᵀ` and `−VWᵀ` for one block.
fn psi_products<const D: usize>(nx: usize, nxu: usize, t: StageTask<'_>) {
    let v = MatRef::<D>::new(lanes::<D>(t.v), nx, nxu);
    let w = MatRef::<D>::new(lanes::<D>(t.w), nx, nxu);
    let cfg = KernelConfig::for_shape(nx, nx, nxu);
    let mut vv = MatMut::<D>::new(lanes_mut::<D>(t.vv), nx, nx);
    kernels::syrk::<D>(1.0, v, 0.0, &mut vv, &cfg);
    let mut ww = MatMut::<D>::new(lanes_mut::<D>(t.ww), nx, nx);
    kernels::syrk::<D>(1.0, w, 0.0, &mut ww, &cfg);
    let mut vw = MatMut::<D>::new(lanes_mut::<D>(t.vw), nx, nx);
    kernels::gemm::<D>(-1.0, v, w.t(), 0.0, &mut vw, &cfg);
}

fn factor_block_dense<const D: usize>(problem: &OcpProblem, t: StageTask<'_>) -> [Option<usize>; D] {
    let dims = problem.dims();
    let (nx, nu, nxu) = (dims.nx, dims.nu, dims.nxu());
    let b = t.b;
    let mut lh = MatMut::<D>::new(lanes_mut::<D>(&mut *t.lh), nxu, nxu);
    kernels::copy::<D>(t.h.block_view::<D>(b), &mut lh);
    let failed = kernels::potrf::<D>(&mut lh);
    let l = lh.rb();

    // V = [A B] L⁻ᵀ
    let mut v = MatMut::<D>::new(lanes_mut::<D>(&mut *t.v), nx, nxu);
    kernels::copy::<D>(problem.dynamics.block_view::<D>(b), &mut v);
    kernels::trsm::<D>(l, Side::Right, Trans::Yes, &mut v);

    // W = [I 0] L⁻ᵀ = [L11⁻ᵀ, −L11⁻ᵀ L21ᵀ L22⁻ᵀ]
    let (w1, w2) = lanes_mut::<D>(&mut *t.w).split_at_mut(nx * nx);
    let mut w1 = MatMut::<D>::new(w1, nx, nx);
    kernels::trtri::<D>(l.sub(0, 0, nx, nx), &mut w1);
    for c in 0..nx {
        for r in c + 1..nx {
            let lo = w1.get(r, c);
            *w1.at(r, c) = w1.get(c, r);
            *w1.at(c, r) = lo;
        }
    }
    let mut w2 = MatMut::<D>::new(w2, nx, nu);
    let cfg = KernelConfig::for_shape(nx, nu, nx);
    kernels::gemm::<D>(-1.0, w1.rb(), l.sub(nx, 0, nu, nx).t(), 0.0, &mut w2, &cfg);
    kernels::trsm::<D>(l.sub(nx, nx, nu, nu), Side::Right, Trans::Yes, &mut w2);

    psi_products::<D>(nx, nxu, t);
    failed
}

fn factor_block_diagonal<const D: usize>(problem: &OcpProblem, t: StageTask<'_>) -> [Option<usize>; D] {
    let dims = problem.dims();
    let (nx, nxu) = (dims.nx, dims.nxu());
    let b = t.b;
    let h = t.h.block_view::<D>(b);
    let mut failed = [None; D];
    let ld = lanes_mut::<D>(&mut *t.lh_diag);
    for (k, dk) in ld.iter_mut().enumerate() {
        let mut s = *h.at(k, k);
        for q in 0..D {
            if !(s[q] > 0.0 && s[q].is_finite()) {
                failed[q].get_or_insert(k);
                s[q] = 1.0;
            }
            s[q] = s[q].sqrt();
        }
        *dk = s;
    }
    let ld: &[Lanes<D>] = ld;
    let mut lh = MatMut::<D>::new(lanes_mut::<D>(&mut *t.lh), nxu, nxu);
    for l in 0..nxu {
        for i in 0..nxu {
            *lh.at(i, l) = if i == l { ld[l] } else { [0.0; D] };
        }
    }
    let ab = problem.dynamics.block_view::<D>(b);
    let mut v = MatMut::<D>::new(lanes_mut::<D>(&mut *t.v), nx, nxu);
    let mut w = MatMut::<D>::new(lanes_mut::<D>(&mut *t.w), nx, nxu);
    for l in 0..nxu {
        let mut inv = [0.0; D];
        for q in 0..D {
            inv[q] = 1.0 / ld[l][q];
        }
        for i in 0..nx {
            let a = ab.at(i, l);
            let o = v.at(i, l);
            for q in 0..D {
                o[q] = a[q] / ld[l][q];
            }
            *w.at(i, l) = if i == l { inv } else { [0.0; D] };
        }
    }
    psi_products::<D>(nx, nxu, t);
    failed
}

/// Assembles the stage Hessians into `f`.
pub fn assemble_h(
    problem: &OcpProblem,
    weights: &ActiveWeights,
    prox: &PrimalVector,
    f: &mut StageFactorization,
    pool: &WorkerPool,
) -> Result<(), KktError> {
    f.assemble(problem, weights, prox, pool)
}

/// Factorizes the assembled stage Hessians in `f` and forms `Ψ`.
pub fn factor_stages(problem: &OcpProblem, f: &mut StageFactorization, pool: &WorkerPool) -> Result<(), KktError> {
    f.factor_stages(problem, pool)
}

pub fn factor_psi(f: &mut StageFactorization) -> Result<(), KktError> {
    f.factor_psi()
}

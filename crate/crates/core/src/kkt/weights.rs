use crate::model::{DualIneqVector, OcpDims, OcpProblem, PrimalVector};

/// Diagonal of the active penalty matrix: `(Σ_y)_ii` for rows whose shifted
/// constraint value `Gx + Σ_y⁻¹y` leaves the closed box, zero otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveWeights {
    sigma_active: DualIneqVector,
    /// One flag per stored entry of `sigma_active`.
    active_mask: Vec<bool>,
}

impl ActiveWeights {
    pub fn new(dims: &OcpDims) -> Self {
        let sigma_active = DualIneqVector::zeros(dims);
        let active_mask = vec![false; sigma_active.as_slice().len()];
        Self { sigma_active, active_mask }
    }

    pub fn sigma_active(&self) -> &DualIneqVector {
        &self.sigma_active
    }

    /// Activity flags in logical row order.
    pub fn active_rows(&self, dims: &OcpDims) -> Vec<bool> {
        let mut out = Vec::with_capacity(dims.m());
        let b = self.sigma_active.batch();
        for j in 0..dims.stages() {
            for i in 0..dims.ny_at(j) {
                out.push(self.active_mask[b.index(i, 0, j)]);
            }
        }
        out
    }

    pub fn active_count(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }
}

/// Recomputes the weights from `gx = Gx`. Returns whether any weight changed.
pub fn update_active_weights(
    problem: &OcpProblem,
    sigma_y: &DualIneqVector,
    y: &DualIneqVector,
    gx: &DualIneqVector,
    w: &mut ActiveWeights,
) -> bool {
    let lo = problem.lower.as_slice();
    let hi = problem.upper.as_slice();
    let mut changed = false;
    let out = w.sigma_active.as_mut_slice();
    for (k, o) in out.iter_mut().enumerate() {
        let (g, yk, s) = (gx.as_slice()[k], y.as_slice()[k], sigma_y.as_slice()[k]);
        let z = if yk == 0.0 { g } else { g + yk / s };
        let active = !(z >= lo[k] && z <= hi[k]);
        let val = if active { s } else { 0.0 };
        if val != *o || active != w.active_mask[k] {
            changed = true;
        }
        *o = val;
        w.active_mask[k] = active;
    }
    changed
}

/// Active weights at `x` for penalties `sigma_y` and multipliers `y`.
pub fn compute_active_weights(
    problem: &OcpProblem,
    sigma_y: &DualIneqVector,
    y: &DualIneqVector,
    x: &PrimalVector,
) -> ActiveWeights {
    let dims = problem.dims();
    let mut gx = DualIneqVector::zeros(dims);
    problem.mul_g_unchecked(x, &mut gx);
    let mut w = ActiveWeights::new(dims);
    update_active_weights(problem, sigma_y, y, &gx, &mut w);
    w
}

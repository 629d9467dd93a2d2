//! Semismooth Newton system of the inner ALM problem.
//!
//! The system
//!
//! ```text
//! [ H  Mᵀ ] [Δx]     [∇φ + Mᵀλ]
//! [ M  0  ] [Δλ] = − [ Mx − b  ]
//! ```
//!
//! is solved in three steps that keep the stage structure:
//!
//! ```text
//!  H v   = ∇φ + Mᵀλ
//!  Ψ Δλ  = (Mx − b) − M v,          Ψ = M H⁻¹ Mᵀ
//! −H Δx  = ∇φ + Mᵀ(λ + Δλ)
//! ```
//!
//! `H` is block diagonal. With `H_j = L_j L_jᵀ`, `V_j = [A_j B_j] L_j⁻ᵀ` and
//! `W_j = [I 0] L_j⁻ᵀ`, the block-tridiagonal `Ψ` has diagonal blocks
//! `Ψ_00 = W_0 W_0ᵀ`, `Ψ_{j+1,j+1} = V_j V_jᵀ + W_{j+1} W_{j+1}ᵀ` and
//! subdiagonal blocks `Ψ_{j+1,j} = −V_j W_jᵀ`. Everything up to `Ψ` runs per
//! stage block on the worker pool; the factorization of `Ψ` is sequential.

mod factor;
mod solve;
mod weights;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::compact::{CompactBatch, KernelError};
use crate::model::{OcpDims, OcpProblem};

pub use weights::{compute_active_weights, update_active_weights, ActiveWeights};

#[derive(Debug, Error)]
pub enum KktError {
    #[error("non-positive pivot in the {block} factorization at stage {stage}, row {row}")]
    NonPositivePivot { block: FactorBlock, stage: usize, row: usize },
    #[error("structure mismatch: {0}")]
    StructureMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorBlock {
    Hessian,
    Schur,
}

impl std::fmt::Display for FactorBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FactorBlock::Hessian => "Hessian",
            FactorBlock::Schur => "Schur complement",
        })
    }
}

/// How the stage Hessians are factorized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Dense Cholesky of every `H_j`.
    #[default]
    Dense,
    /// Diagonal `H_j` (diagonal costs, box constraints).
    Diagonal,
    /// `Diagonal` when the problem has the required structure, else `Dense`.
    Auto,
}

impl Variant {
    /// Resolves `Auto` and checks the precondition of `Diagonal`.
    pub fn resolve(self, problem: &OcpProblem) -> Result<Variant, KktError> {
        match self {
            Variant::Dense => Ok(Variant::Dense),
            Variant::Diagonal => check_diagonal_structure(problem).map(|_| Variant::Diagonal),
            Variant::Auto => Ok(match check_diagonal_structure(problem) {
                Ok(()) => Variant::Diagonal,
                Err(_) => Variant::Dense,
            }),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Variant::Dense),
            "diagonal" => Ok(Variant::Diagonal),
            "auto" => Ok(Variant::Auto),
            _ => Err(format!("unknown variant {s:?} (expected dense, diagonal or auto)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Dense => "dense",
            Variant::Diagonal => "diagonal",
            Variant::Auto => "auto",
        })
    }
}

/// Checks that every `H_j` is diagonal whatever the active set: diagonal
/// cost blocks and at most one nonzero per row of `[C_j D_j]`.
pub fn check_diagonal_structure(problem: &OcpProblem) -> Result<(), KktError> {
    let dims = problem.dims();
    let nxu = dims.nxu();
    for j in 0..dims.stages() {
        for l in 0..nxu {
            for i in 0..nxu {
                if i != l && problem.cost.get(i, l, j) != 0.0 {
                    return Err(KktError::StructureMismatch(format!(
                        "cost block of stage {j} has off-diagonal entry ({i}, {l})"
                    )));
                }
            }
        }
        for i in 0..dims.ny_at(j) {
            let nnz = (0..nxu).filter(|&l| problem.constraints.get(i, l, j) != 0.0).count();
            if nnz > 1 {
                return Err(KktError::StructureMismatch(format!(
                    "constraint row {i} of stage {j} has {nnz} nonzeros"
                )));
            }
        }
    }
    Ok(())
}

/// Factorization of the Newton system plus the workspaces used to build and
/// apply it. Allocated once per problem structure.
#[derive(Clone, Debug)]
pub struct StageFactorization {
    dims: OcpDims,
    variant: Variant,
    /// Assembled `H_j`.
    h: CompactBatch,
    /// Rows of `[C_j D_j]` scaled by the square root of the active weights.
    scaled_g: CompactBatch,
    l_h: CompactBatch,
    /// Diagonal of `L_H` for the diagonal variant.
    l_h_diag: CompactBatch,
    v: CompactBatch,
    w: CompactBatch,
    vv: CompactBatch,
    ww: CompactBatch,
    vw: CompactBatch,
    psi_diag: CompactBatch,
    psi_sub: CompactBatch,
    l_psi_diag: CompactBatch,
    l_psi_sub: CompactBatch,
    scratch: solve::Scratch,
}

impl StageFactorization {
    /// Workspaces for `dims`. `variant` must already be resolved.
    pub fn new(dims: &OcpDims, variant: Variant) -> Result<Self, KktError> {
        if variant == Variant::Auto {
            return Err(KktError::StructureMismatch("variant must be resolved before setup".into()));
        }
        let (nx, nxu, s, d) = (dims.nx, dims.nxu(), dims.stages(), dims.lanes);
        Ok(Self {
            dims: *dims,
            variant,
            h: CompactBatch::zeros(nxu, nxu, s, d)?,
            scaled_g: CompactBatch::zeros(dims.ny_padded(), nxu, s, d)?,
            l_h: CompactBatch::zeros(nxu, nxu, s, d)?,
            l_h_diag: CompactBatch::zeros(nxu, 1, s, d)?,
            v: CompactBatch::zeros(nx, nxu, s, d)?,
            w: CompactBatch::zeros(nx, nxu, s, d)?,
            vv: CompactBatch::zeros(nx, nx, s, d)?,
            ww: CompactBatch::zeros(nx, nx, s, d)?,
            vw: CompactBatch::zeros(nx, nx, s, d)?,
            psi_diag: CompactBatch::zeros(nx, nx, s, 1)?,
            psi_sub: CompactBatch::zeros(nx, nx, dims.horizon, 1)?,
            l_psi_diag: CompactBatch::zeros(nx, nx, s, 1)?,
            l_psi_sub: CompactBatch::zeros(nx, nx, dims.horizon, 1)?,
            scratch: solve::Scratch::new(dims)?,
        })
    }

    pub fn dims(&self) -> &OcpDims {
        &self.dims
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Assembled Hessian blocks `H_j` (full symmetric storage).
    pub fn hessian(&self) -> &CompactBatch {
        &self.h
    }

    pub fn l_h(&self) -> &CompactBatch {
        &self.l_h
    }

    pub fn v(&self) -> &CompactBatch {
        &self.v
    }

    pub fn w(&self) -> &CompactBatch {
        &self.w
    }

    /// `Ψ_{j,j}`, `j = 0..=N`, symmetric.
    pub fn psi_diag(&self, j: usize) -> DMatrix<f64> {
        self.psi_diag.stage(j)
    }

    /// `Ψ_{j+1,j}`, `j = 0..N`.
    pub fn psi_sub(&self, j: usize) -> DMatrix<f64> {
        self.psi_sub.stage(j)
    }

    pub fn l_psi_diag(&self, j: usize) -> DMatrix<f64> {
        self.l_psi_diag.stage(j)
    }

    pub fn l_psi_sub(&self, j: usize) -> DMatrix<f64> {
        self.l_psi_sub.stage(j)
    }

    /// The assembled block-tridiagonal `Ψ` as a dense `p × p` matrix.
    pub fn psi_dense(&self) -> DMatrix<f64> {
        let nx = self.dims.nx;
        let p = self.dims.p();
        let mut out = DMatrix::zeros(p, p);
        for j in 0..self.dims.stages() {
            out.view_mut((j * nx, j * nx), (nx, nx)).copy_from(&self.psi_diag(j));
            if j < self.dims.horizon {
                let s = self.psi_sub(j);
                out.view_mut(((j + 1) * nx, j * nx), (nx, nx)).copy_from(&s);
                out.view_mut((j * nx, (j + 1) * nx), (nx, nx)).copy_from(&s.transpose());
            }
        }
        out
    }

    /// The block-bidiagonal factor of `Ψ` as a dense lower-triangular matrix.
    pub fn l_psi_dense(&self) -> DMatrix<f64> {
        let nx = self.dims.nx;
        let p = self.dims.p();
        let mut out = DMatrix::zeros(p, p);
        for j in 0..self.dims.stages() {
            out.view_mut((j * nx, j * nx), (nx, nx)).copy_from(&self.l_psi_diag(j));
            if j < self.dims.horizon {
                out.view_mut(((j + 1) * nx, j * nx), (nx, nx)).copy_from(&self.l_psi_sub(j));
            }
        }
        out
    }

    pub(crate) fn conforms(&self, problem: &OcpProblem) -> bool {
        self.dims == *problem.dims()
    }
}

pub use factor::{assemble_h, factor_psi, factor_stages};
pub use solve::solve_newton;


//! Chain of masses coupled by springs and dampers to each other and to two
//! walls, with actuators pushing consecutive masses apart.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::{OcpData, StageData, TerminalData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringMassConfig {
    pub masses: usize,
    pub horizon: usize,
    /// Spring constant κ.
    pub stiffness: f64,
    /// Damping β.
    pub damping: f64,
    /// Value μ of every mass.
    pub mass: f64,
    pub sample_time: f64,
    pub u_max: f64,
    pub x_max: f64,
    pub seed: u64,
}

impl Default for SpringMassConfig {
    fn default() -> Self {
        Self {
            masses: 10,
            horizon: 15,
            stiffness: 1.0,
            damping: 0.0,
            mass: 1.0,
            sample_time: 0.5,
            u_max: 0.5,
            x_max: 4.0,
            seed: 0,
        }
    }
}

impl SpringMassConfig {
    pub fn nx(&self) -> usize {
        2 * self.masses
    }

    pub fn nu(&self) -> usize {
        self.masses.saturating_sub(1)
    }

    /// Number of primal variables `N(n_x + n_u) + n_x`.
    pub fn primal_dim(&self) -> usize {
        self.horizon * (self.nx() + self.nu()) + self.nx()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.masses < 2 {
            return bad(format!("{} masses leave no actuator; need at least 2", self.masses));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.stiffness >= 0.0 && self.damping >= 0.0) {
            return bad("stiffness and damping must be non-negative".into());
        }
        for (name, v) in [
            ("mass", self.mass),
            ("sample_time", self.sample_time),
            ("u_max", self.u_max),
            ("x_max", self.x_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Continuous-time `(A_c, B_c)` with state `[positions; velocities]`.
    pub fn continuous_dynamics(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m, nu) = (self.masses, self.nu());
        // chain Laplacian, walls at both ends
        let lap = DMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let mut ac = DMatrix::zeros(2 * m, 2 * m);
        ac.view_mut((0, m), (m, m)).fill_with_identity();
        ac.view_mut((m, 0), (m, m)).copy_from(&(&lap * (-self.stiffness / self.mass)));
        ac.view_mut((m, m), (m, m)).copy_from(&(&lap * (-self.damping / self.mass)));
        let mut bc = DMatrix::zeros(2 * m, nu);
        for k in 0..nu {
            bc[(m + k, k)] = 1.0 / self.mass;
            bc[(m + k + 1, k)] = -1.0 / self.mass;
        }
        (ac, bc)
    }

    /// Exact zero-order-hold discretization through the exponential of the
    /// augmented matrix `[A_c B_c; 0 0]·T_s`.
    pub fn discrete_dynamics(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (ac, bc) = self.continuous_dynamics();
        let (nx, nu) = (ac.nrows(), bc.ncols());
        let mut aug = DMatrix::zeros(nx + nu, nx + nu);
        aug.view_mut((0, 0), (nx, nx)).copy_from(&ac);
        aug.view_mut((0, nx), (nx, nu)).copy_from(&bc);
        let e = (aug * self.sample_time).exp();
        (e.view((0, 0), (nx, nx)).into_owned(), e.view((0, nx), (nx, nu)).into_owned())
    }
}

/// Spring-mass instance: unit diagonal costs, box constraints on every state
/// and input, and an initial state drawn from `[−x_max/2, x_max/2]` per seed.
pub fn gen_spring_mass(cfg: &SpringMassConfig) -> Result<OcpData, BenchError> {
    cfg.validate()?;
    let (nx, nu) = (cfg.nx(), cfg.nu());
    let (a, b) = cfg.discrete_dynamics();
    let mut c = DMatrix::zeros(nx + nu, nx);
    c.view_mut((0, 0), (nx, nx)).fill_with_identity();
    let mut d = DMatrix::zeros(nx + nu, nu);
    d.view_mut((nx, 0), (nu, nu)).fill_with_identity();
    let bound = DVector::from_fn(nx + nu, |i, _| if i < nx { cfg.x_max } else { cfg.u_max });
    let stage = StageData {
        q: DMatrix::identity(nx, nx),
        s: DMatrix::zeros(nu, nx),
        r: DMatrix::identity(nu, nu),
        q_lin: DVector::zeros(nx),
        r_lin: DVector::zeros(nu),
        a,
        b,
        offset: DVector::zeros(nx),
        c,
        d,
        lower: -&bound,
        upper: bound,
    };
    let xb = DVector::from_element(nx, cfg.x_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 * cfg.x_max;
    let x_init = DVector::from_fn(nx, |_, _| rng.gen_range(-half..=half));
    Ok(OcpData {
        stages: vec![stage; cfg.horizon],
        terminal: TerminalData {
            q: DMatrix::identity(nx, nx),
            q_lin: DVector::zeros(nx),
            c: DMatrix::identity(nx, nx),
            lower: -&xb,
            upper: xb,
        },
        x_init,
    })
}

use nalgebra::{DMatrix, DVector};
use ocpqp::kkt::{compute_active_weights, StageFactorization, Variant};
use ocpqp::model::{DualIneqVector, OcpProblem, PrimalVector};
use ocpqp::parallel::WorkerPool;
use rand::Rng;

use super::ocp::{random_vector, Dense};

/// Random multipliers, penalties and point for a given instance.
pub struct Point {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub sigma: DVector<f64>,
    pub prox: DVector<f64>,
}

pub fn random_point(r: &mut impl Rng, d: &Dense) -> Point {
    let (n, m) = (d.q.nrows(), d.g.nrows());
    Point {
        x: random_vector(r, n) * 2.0,
        y: random_vector(r, m),
        sigma: DVector::from_fn(m, |_, _| r.gen_range(0.5..20.0)),
        prox: DVector::from_fn(n, |_, _| r.gen_range(1e-3..1e-1)),
    }
}

/// Elementwise active weights straight from the definition.
pub fn dense_weights(d: &Dense, pt: &Point) -> DVector<f64> {
    let z = &d.g * &pt.x + pt.y.component_div(&pt.sigma);
    DVector::from_fn(z.len(), |i, _| {
        if z[i] >= d.lower[i] && z[i] <= d.upper[i] {
            0.0
        } else {
            pt.sigma[i]
        }
    })
}

pub fn dense_h(d: &Dense, pt: &Point) -> DMatrix<f64> {
    let w = dense_weights(d, pt);
    &d.q + d.g.transpose() * DMatrix::from_diagonal(&w) * &d.g + DMatrix::from_diagonal(&pt.prox)
}

pub fn factorize(p: &OcpProblem, pt: &Point, variant: Variant, pool: &WorkerPool) -> StageFactorization {
    let dims = *p.dims();
    let w = compute_active_weights(
        p,
        &DualIneqVector::from_logical(&dims, pt.sigma.as_slice()).unwrap(),
        &DualIneqVector::from_logical(&dims, pt.y.as_slice()).unwrap(),
        &PrimalVector::from_logical(&dims, pt.x.as_slice()).unwrap(),
    );
    let prox = PrimalVector::from_logical(&dims, pt.prox.as_slice()).unwrap();
    let mut f = StageFactorization::new(&dims, variant).unwrap();
    f.factor(p, &w, &prox, pool).unwrap();
    f
}

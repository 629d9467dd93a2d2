//! One semismooth Newton system assembled and solved stage by stage, then
//! checked against the dense KKT matrix.

use nalgebra::{DMatrix, DVector};
use ocpqp::bench::{gen_random_ocp, DenseQp, RandomOcpConfig};
use ocpqp::kkt::{compute_active_weights, solve_newton, StageFactorization, Variant};
use ocpqp::model::{DualEqVector, DualIneqVector, OcpProblem, PrimalVector};
use ocpqp::parallel::WorkerPool;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RandomOcpConfig { horizon: 5, nx: 3, nu: 2, ny: 2, ny_terminal: 1 };
    let data = gen_random_ocp(&cfg, 9, 0.2)?;
    let problem = OcpProblem::new(&data, 4)?;
    let dims = *problem.dims();
    let (n, p, m) = (dims.n(), dims.p(), dims.m());

    // a point where some constraints are violated, so some rows are active
    let x = DVector::from_fn(n, |i, _| ((i * 7) % 5) as f64 - 2.0);
    let sigma = DVector::from_element(m, 10.0);
    let prox = DVector::from_element(n, 1e-2);
    let y = DVector::zeros(m);
    let w = compute_active_weights(
        &problem,
        &DualIneqVector::from_logical(&dims, sigma.as_slice())?,
        &DualIneqVector::from_logical(&dims, y.as_slice())?,
        &PrimalVector::from_logical(&dims, x.as_slice())?,
    );
    let mut f = StageFactorization::new(&dims, Variant::Dense)?;
    f.factor(&problem, &w, &PrimalVector::from_logical(&dims, prox.as_slice())?, &WorkerPool::serial())?;

    let g = DVector::from_fn(n, |i, _| (i as f64).sin());
    let lam = DVector::zeros(p);
    let e = DVector::from_fn(p, |i, _| (i as f64).cos());
    let (dx, dl) = solve_newton(
        &problem,
        &mut f,
        &PrimalVector::from_logical(&dims, g.as_slice())?,
        &DualEqVector::from_logical(&dims, lam.as_slice())?,
        &DualEqVector::from_logical(&dims, e.as_slice())?,
    )?;

    // dense [H Mᵀ; M 0] with H = Q + Gᵀ Σ_J G + prox
    let qp = DenseQp::from_data(&data);
    let z = &qp.g * &x + y.component_div(&sigma);
    let active = DVector::from_fn(m, |i, _| if z[i] < qp.lower[i] || z[i] > qp.upper[i] { sigma[i] } else { 0.0 });
    let h = &qp.q + qp.g.transpose() * DMatrix::from_diagonal(&active) * &qp.g + DMatrix::from_diagonal(&prox);
    let mut k = DMatrix::zeros(n + p, n + p);
    k.view_mut((0, 0), (n, n)).copy_from(&h);
    k.view_mut((0, n), (n, p)).copy_from(&qp.m.transpose());
    k.view_mut((n, 0), (p, n)).copy_from(&qp.m);
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&-(&g + qp.m.transpose() * &lam));
    rhs.rows_mut(n, p).copy_from(&-&e);
    let dense = k.lu().solve(&rhs).ok_or("singular KKT matrix")?;

    let got = DVector::from_iterator(n + p, dx.to_logical(&dims).into_iter().chain(dl.to_logical(&dims)));
    println!("{} of {m} rows active", active.iter().filter(|v| **v > 0.0).count());
    println!("structured vs dense solution: {:.2e}", (got - &dense).amax() / dense.amax());
    println!("Schur complement blocks: {}x{}", f.psi_dense().nrows(), f.psi_dense().ncols());
    Ok(())
}

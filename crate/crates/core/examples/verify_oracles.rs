//! Solutions checked three ways: KKT residuals, active-set enumeration on a
//! tiny constrained instance, and the Riccati recursion without bounds.

use ocpqp::alm::{Solver, SolverSettings};
use ocpqp::bench::{gen_random_ocp, verify_against_oracle, Oracle, RandomOcpConfig};
use ocpqp::model::{OcpData, OcpProblem};

fn check(name: &str, data: &OcpData, oracles: &[Oracle]) -> Result<(), Box<dyn std::error::Error>> {
    let mut solver = Solver::setup(&OcpProblem::new(data, 2)?, SolverSettings::default())?;
    let report = solver.solve(None)?;
    println!("{name}: {} after {} outer iterations", report.status, report.outer_iterations);
    for &oracle in oracles {
        let v = verify_against_oracle(data, &solver.solution(), oracle, 1e-8)?;
        println!(
            "  {oracle:?}: KKT {:.1e}, reference error {:?}, candidates {:?}, passed {}",
            v.residuals.max(),
            v.reference_error,
            v.candidates,
            v.passed
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tiny = RandomOcpConfig { horizon: 3, nx: 2, nu: 1, ny: 2, ny_terminal: 1 };
    check("constrained", &gen_random_ocp(&tiny, 4, 0.2)?, &[Oracle::Residual, Oracle::Enumerate])?;
    let free = RandomOcpConfig { horizon: 12, nx: 4, nu: 2, ny: 0, ny_terminal: 0 };
    check("unconstrained", &gen_random_ocp(&free, 4, f64::INFINITY)?, &[Oracle::Residual, Oracle::Riccati])?;
    Ok(())
}

//! Diagonal costs and box constraints let the stage factorization skip the
//! dense Cholesky. `Variant::Auto` detects the structure.

use std::time::Instant;

use ocpqp::alm::{Solver, SolverSettings};
use ocpqp::bench::{gen_spring_mass, SpringMassConfig};
use ocpqp::kkt::Variant;
use ocpqp::model::OcpProblem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = gen_spring_mass(&SpringMassConfig { masses: 20, horizon: 15, ..Default::default() })?;
    let problem = OcpProblem::new(&data, 4)?;
    let mut xs = Vec::new();
    for variant in [Variant::Dense, Variant::Auto] {
        let mut solver = Solver::setup(&problem, SolverSettings { variant, ..Default::default() })?;
        let t0 = Instant::now();
        let report = solver.solve(None)?;
        println!(
            "{variant} -> {}: {} in {:.1} ms, {} Newton steps",
            solver.variant(),
            report.status,
            t0.elapsed().as_secs_f64() * 1e3,
            report.inner_iterations
        );
        xs.push(solver.solution().x);
    }
    let diff = xs[0].iter().zip(&xs[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max difference between solutions {diff:.1e}");
    Ok(())
}

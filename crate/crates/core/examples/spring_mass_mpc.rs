//! Closed-loop MPC of a spring-mass chain: solve, apply the first input,
//! step the plant, update the initial state and warm-start the next solve.

use ocpqp::alm::{SolveStatus, Solver, SolverSettings};
use ocpqp::bench::{gen_spring_mass, SpringMassConfig};
use ocpqp::model::OcpProblem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SpringMassConfig { masses: 6, horizon: 20, seed: 1, ..Default::default() };
    let data = gen_spring_mass(&cfg)?;
    let (nx, nu) = (cfg.nx(), cfg.nu());
    let (a, b) = (&data.stages[0].a, &data.stages[0].b);

    let problem = OcpProblem::new(&data, 4)?;
    let mut solver = Solver::setup(&problem, SolverSettings::default())?;
    let mut x = data.x_init.clone();
    let mut warm = None;
    for step in 0..25 {
        solver.update_initial_state(x.as_slice())?;
        let report = solver.solve(warm.as_ref())?;
        if report.status != SolveStatus::Solved {
            return Err(format!("step {step}: {}", report.status).into());
        }
        let sol = solver.solution();
        let u = nalgebra::DVector::from_column_slice(&sol.x[nx..nx + nu]);
        x = a * &x + b * &u;
        println!(
            "step {step:2}  |x| {:8.5}  |u|inf {:.3}  outer {:2}  inner {:3}  {:7.1} us",
            x.norm(),
            u.amax(),
            report.outer_iterations,
            report.inner_iterations,
            report.timings.total.as_secs_f64() * 1e6
        );
        warm = Some(sol);
    }
    Ok(())
}

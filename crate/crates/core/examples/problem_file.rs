//! Problems round-trip through both file formats; the reader picks the
//! format from the first bytes.

use ocpqp::alm::{Solver, SolverSettings};
use ocpqp::bench::{gen_spring_mass, SpringMassConfig};
use ocpqp::model::{read_problem, write_problem_binary, write_problem_json, OcpProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = gen_spring_mass(&SpringMassConfig { masses: 3, horizon: 4, ..Default::default() })?;
    let dir = std::env::temp_dir();
    let (bin, json) = (dir.join("chain.ocpq"), dir.join("chain.json"));
    write_problem_binary(&data, std::fs::File::create(&bin)?)?;
    write_problem_json(&data, std::fs::File::create(&json)?)?;
    for path in [&bin, &json] {
        let back = read_problem(path)?;
        assert_eq!(format!("{back:?}"), format!("{data:?}"));
        let mut solver = Solver::setup(&OcpProblem::new(&back, 4)?, SolverSettings::default())?;
        let report = solver.solve(None)?;
        println!(
            "{}: {} bytes, {} with objective {:.6}",
            path.display(),
            std::fs::metadata(path)?.len(),
            report.status,
            report.objective
        );
    }
    Ok(())
}

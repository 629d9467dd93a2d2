use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ocpqp::alm::{SolveReport, SolveStatus, Solver, SolverSettings};
use ocpqp::bench::{
    bench_kernel, gen_random_ocp, gen_spring_mass, gnuplot_script, parse_sweep, run_case, scaling_check,
    verify_against_oracle, write_csv, Axis, BenchCase, BenchResult, Oracle, RandomOcpConfig, SpringMassConfig,
    SuiteSpec, KERNELS, PHASES,
};
use ocpqp::kkt::Variant;
use ocpqp::model::{read_problem, write_problem_binary, write_problem_json, OcpData, OcpProblem};

const SOLVER_FAILURE: u8 = 2;
const VERIFICATION_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "ocpqp", version, about = "Structured QP solver for optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Timed, verified benchmark sweeps.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Solve a problem file.
    Solve(SolveArgs),
    /// Batched kernel micro-benchmarks.
    #[command(subcommand)]
    Kernels(KernelsCommand),
    /// Solve a problem file and check the result against an oracle.
    Verify(VerifyArgs),
    /// Write a generated problem to a file.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Sweep the number of masses at a fixed horizon.
    SpringMass {
        #[arg(long, default_value = "10..70:10")]
        masses: String,
        #[arg(long, default_value_t = 15)]
        horizon: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep the horizon at a fixed number of masses and fit the growth rate.
    Scaling {
        #[arg(long, default_value_t = 30)]
        masses: usize,
        #[arg(long, default_value = "15..120:x2")]
        horizons: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Comma-separated list of dense, diagonal.
    #[arg(long, default_value = "dense", value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Comma-separated lane widths from 1, 2, 4, 8.
    #[arg(long, default_value = "4", value_delimiter = ',')]
    lanes: Vec<usize>,
    #[command(flatten)]
    workers: WorkerArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    eps_abs: f64,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Also write a gnuplot script for the CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[command(flatten)]
    physics: PhysicsArgs,
}

#[derive(Args)]
struct WorkerArg {
    /// Worker threads; OCPQP_WORKERS takes precedence.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl WorkerArg {
    fn resolve(&self) -> Result<usize, String> {
        match std::env::var("OCPQP_WORKERS") {
            Ok(v) => v.trim().parse().map_err(|_| format!("OCPQP_WORKERS={v:?} is not a worker count")),
            Err(_) => Ok(self.workers),
        }
    }
}

#[derive(Args)]
struct PhysicsArgs {
    #[arg(long, default_value_t = 1.0)]
    stiffness: f64,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 0.5)]
    sample_time: f64,
    #[arg(long, default_value_t = 0.5)]
    u_max: f64,
    #[arg(long, default_value_t = 4.0)]
    x_max: f64,
}

impl PhysicsArgs {
    fn config(&self, masses: usize, horizon: usize, seed: u64) -> SpringMassConfig {
        SpringMassConfig {
            masses,
            horizon,
            stiffness: self.stiffness,
            damping: self.damping,
            mass: self.mass,
            sample_time: self.sample_time,
            u_max: self.u_max,
            x_max: self.x_max,
            seed,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    eps_abs: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_rel: f64,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    #[arg(long, default_value = "auto")]
    variant: Variant,
    #[arg(long, default_value_t = 4)]
    lanes: usize,
    #[command(flatten)]
    workers: WorkerArg,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// JSON report with status, residuals, timings and the solution.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "residual")]
    oracle: Oracle,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Subcommand)]
enum KernelsCommand {
    /// Throughput of every kernel on square stage matrices.
    Bench {
        #[arg(long, default_value = "2,4,8,12,16,24")]
        shapes: String,
        #[arg(long, default_value = "1,4", value_delimiter = ',')]
        lanes: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        stages: usize,
        /// Minimum seconds per measurement.
        #[arg(long, default_value_t = 0.2)]
        min_time: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Binary,
    Json,
}

#[derive(Subcommand)]
enum GenCommand {
    SpringMass {
        #[arg(long, default_value_t = 10)]
        masses: usize,
        #[arg(long, default_value_t = 15)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Random stable dynamics with bounds around a feasible rollout.
    Random {
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 4)]
        nx: usize,
        #[arg(long, default_value_t = 2)]
        nu: usize,
        #[arg(long, default_value_t = 3)]
        ny: usize,
        #[arg(long, default_value_t = 2)]
        ny_terminal: usize,
        /// Bound distance from the rollout; `inf` for no bounds.
        #[arg(long, default_value_t = 0.3)]
        margin: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    format: Format,
}

type Outcome = Result<u8, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    // clap's own usage-error code 2 would collide with solver failure
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Bench(BenchCommand::SpringMass { masses, horizon, run }) => {
            parse_sweep(&masses).map_err(Into::into).and_then(|ms| {
                let sizes: Vec<_> = ms.into_iter().map(|m| (m, horizon)).collect();
                bench(&sizes, &run)
            })
        }
        Command::Bench(BenchCommand::Scaling { masses, horizons, run }) => scaling(masses, &horizons, &run),
        Command::Solve(args) => solve(&args),
        Command::Kernels(KernelsCommand::Bench { shapes, lanes, stages, min_time }) => {
            kernels(&shapes, &lanes, stages, min_time)
        }
        Command::Verify(args) => verify(&args),
        Command::Gen(g) => generate(g),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run_sweep(sizes: &[(usize, usize)], run: &RunArgs, axis: Axis) -> Result<Vec<BenchResult>, Box<dyn std::error::Error>> {
    let workers = run.workers.resolve()?;
    let mut cases = Vec::new();
    for &(masses, horizon) in sizes {
        for &variant in &run.variant {
            for &lanes in &run.lanes {
                cases.push(BenchCase { masses, horizon, variant, lanes, workers });
            }
        }
    }
    let spec = SuiteSpec {
        cases,
        runs: run.runs,
        base_seed: run.seed,
        physics: run.physics.config(0, 0, 0),
        eps_abs: run.eps_abs,
    };
    let mut results = Vec::with_capacity(spec.cases.len());
    println!(
        "{:>6} {:>5} {:>6} {:>8} {:>2} {:>3} {:>7} {:>12} {:>12} {:>12}",
        "M", "N", "n", "variant", "d", "w", "solved", "gmean[us]", "min[us]", "max[us]"
    );
    for case in &spec.cases {
        let r = run_case(&spec, case)?;
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}"));
        println!(
            "{:>6} {:>5} {:>6} {:>8} {:>2} {:>3} {:>3}/{:<3} {:>12} {:>12} {:>12}",
            case.masses,
            case.horizon,
            r.primal_dim,
            case.variant.to_string(),
            case.lanes,
            case.workers,
            r.successes(),
            spec.runs,
            cell(r.gmean_us()),
            cell(r.min_us()),
            cell(r.max_us()),
        );
        for f in &r.failures {
            eprintln!("  seed {}: {}", f.seed, f.reason);
        }
        results.push(r);
    }
    write_csv(&results, BufWriter::new(File::create(&run.out)?))?;
    if let Some(plot) = &run.plot {
        let csv = run.out.to_string_lossy();
        std::fs::write(plot, gnuplot_script(&csv, axis, &results))?;
    }
    Ok(results)
}

fn bench(sizes: &[(usize, usize)], run: &RunArgs) -> Outcome {
    let results = run_sweep(sizes, run, Axis::Masses)?;
    Ok(if results.iter().any(|r| !r.failures.is_empty()) { SOLVER_FAILURE } else { 0 })
}

fn scaling(masses: usize, horizons: &str, run: &RunArgs) -> Outcome {
    let hs = parse_sweep(horizons)?;
    let sizes: Vec<_> = hs.iter().map(|h| (masses, *h)).collect();
    let results = run_sweep(&sizes, run, Axis::Horizon)?;
    if results.iter().any(|r| !r.failures.is_empty()) {
        return Ok(SOLVER_FAILURE);
    }
    let mut code = 0;
    // one fit per (variant, lanes) configuration
    for variant in &run.variant {
        for lanes in &run.lanes {
            let rows: Vec<_> =
                results.iter().filter(|r| r.case.variant == *variant && r.case.lanes == *lanes).collect();
            let times: Vec<f64> = rows.iter().filter_map(|r| r.gmean_us()).collect();
            let check = scaling_check(&hs, &times)?;
            println!(
                "{variant} d={lanes}: log-log slope {:.3} ({})",
                check.slope,
                if check.passed { "at most mildly superlinear" } else { "superlinear" }
            );
            if !check.passed {
                code = VERIFICATION_FAILURE;
            }
        }
    }
    Ok(code)
}

fn settings(args: &SolverArgs) -> Result<SolverSettings, String> {
    Ok(SolverSettings {
        eps_abs: args.eps_abs,
        eps_rel: args.eps_rel,
        max_outer: args.max_outer,
        variant: args.variant,
        lanes: args.lanes,
        workers: args.workers.resolve()?,
        ..Default::default()
    })
}

fn run_solver(data: &OcpData, args: &SolverArgs) -> Result<(Solver, SolveReport), Box<dyn std::error::Error>> {
    let problem = OcpProblem::new(data, args.lanes)?;
    let mut solver = Solver::setup(&problem, settings(args)?)?;
    let report = solver.solve(None)?;
    Ok((solver, report))
}

fn summary(report: &SolveReport) {
    println!("status            {}", report.status);
    println!("outer/inner iters {}/{}", report.outer_iterations, report.inner_iterations);
    println!("objective         {:.12e}", report.objective);
    println!(
        "residuals         dual {:.2e}  eq {:.2e}  primal {:.2e}  compl {:.2e}",
        report.dual_residual, report.eq_residual, report.primal_residual, report.complementarity_residual
    );
    println!("solve time        {:.1} us", report.timings.total.as_secs_f64() * 1e6);
}

fn solve(args: &SolveArgs) -> Outcome {
    let data = read_problem(&args.problem)?;
    let (solver, report) = run_solver(&data, &args.solver)?;
    summary(&report);
    if let Some(path) = &args.report {
        let t = &report.timings;
        let us = |d: std::time::Duration| d.as_secs_f64() * 1e6;
        let phases: serde_json::Map<_, _> = PHASES
            .iter()
            .zip([t.assembly, t.stage_factor, t.psi_factor, t.substitution, t.line_search])
            .map(|(k, d)| (format!("{k}_us"), json!(us(d))))
            .collect();
        let doc = json!({
            "status": report.status.to_string(),
            "outer_iterations": report.outer_iterations,
            "inner_iterations": report.inner_iterations,
            "objective": report.objective,
            "residuals": {
                "dual": report.dual_residual,
                "eq": report.eq_residual,
                "primal": report.primal_residual,
                "complementarity": report.complementarity_residual,
            },
            "timings": { "total_us": us(t.total), "phases": phases },
            "solution": solver.solution(),
        });
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
    }
    Ok(if report.status == SolveStatus::Solved { 0 } else { SOLVER_FAILURE })
}

fn verify(args: &VerifyArgs) -> Outcome {
    let data = read_problem(&args.problem)?;
    let (solver, report) = run_solver(&data, &args.solver)?;
    summary(&report);
    if report.status != SolveStatus::Solved {
        return Ok(SOLVER_FAILURE);
    }
    let v = verify_against_oracle(&data, &solver.solution(), args.oracle, args.solver.eps_abs)?;
    println!("{}", serde_json::to_string_pretty(&v)?);
    println!("verification      {}", if v.passed { "passed" } else { "FAILED" });
    Ok(if v.passed { 0 } else { VERIFICATION_FAILURE })
}

fn kernels(shapes: &str, lanes: &[usize], stages: usize, min_time: f64) -> Outcome {
    let sizes = parse_sweep(shapes)?;
    println!("{:>6} {:>4} {:>2} {:>6} {:>14} {:>10}", "kernel", "n", "d", "stages", "ns/matrix", "GFLOP/s");
    for &n in &sizes {
        for &d in lanes {
            for k in KERNELS {
                let r = bench_kernel(k, n, d, stages, min_time)?;
                println!(
                    "{:>6} {:>4} {:>2} {:>6} {:>14.1} {:>10.3}",
                    k.to_string(),
                    n,
                    d,
                    stages,
                    r.ns_per_matrix,
                    r.gflops
                );
            }
        }
    }
    Ok(0)
}

fn write_problem(data: &OcpData, out: &OutArgs) -> Outcome {
    let w = BufWriter::new(File::create(&out.out)?);
    match out.format {
        Format::Binary => write_problem_binary(data, w)?,
        Format::Json => write_problem_json(data, w)?,
    }
    println!("wrote {}", out.out.display());
    Ok(0)
}

fn generate(g: GenCommand) -> Outcome {
    match g {
        GenCommand::SpringMass { masses, horizon, seed, physics, out } => {
            write_problem(&gen_spring_mass(&physics.config(masses, horizon, seed))?, &out)
        }
        GenCommand::Random { horizon, nx, nu, ny, ny_terminal, margin, seed, out } => {
            let cfg = RandomOcpConfig { horizon, nx, nu, ny, ny_terminal };
            write_problem(&gen_random_ocp(&cfg, seed, margin)?, &out)
        }
    }
}

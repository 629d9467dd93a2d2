//! Timed, verified benchmark runs over solver configurations.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::oracle::kkt_residuals;
use super::spring_mass::{gen_spring_mass, SpringMassConfig};
use super::BenchError;
use crate::alm::{PhaseTimings, SolveStatus, Solver, SolverSettings};
use crate::kkt::Variant;
use crate::model::OcpProblem;

/// One solver configuration on one spring-mass size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchCase {
    pub masses: usize,
    pub horizon: usize,
    pub variant: Variant,
    pub lanes: usize,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct SuiteSpec {
    pub cases: Vec<BenchCase>,
    /// Timed runs per case, each on its own seed.
    pub runs: usize,
    pub base_seed: u64,
    /// Physical parameters; `masses`, `horizon` and `seed` are overridden.
    pub physics: SpringMassConfig,
    pub eps_abs: f64,
}

impl SuiteSpec {
    pub fn new(cases: Vec<BenchCase>, runs: usize) -> Self {
        Self { cases, runs, base_seed: 0, physics: SpringMassConfig::default(), eps_abs: 1e-8 }
    }
}

/// A run that did not produce a verified solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub case: BenchCase,
    pub primal_dim: usize,
    /// Wall-clock time of every verified run.
    pub times: Vec<Duration>,
    pub phases: Vec<PhaseTimings>,
    pub outer_iterations: Vec<usize>,
    pub inner_iterations: Vec<usize>,
    pub max_residual: f64,
    pub failures: Vec<RunFailure>,
}

fn micros(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

/// Geometric mean, `None` for an empty or non-positive sample.
pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

impl BenchResult {
    pub fn successes(&self) -> usize {
        self.times.len()
    }

    /// Times of the verified runs in microseconds.
    pub fn times_us(&self) -> Vec<f64> {
        self.times.iter().map(|t| micros(*t)).collect()
    }

    pub fn gmean_us(&self) -> Option<f64> {
        geometric_mean(&self.times_us())
    }

    pub fn min_us(&self) -> Option<f64> {
        self.times.iter().min().map(|t| micros(*t))
    }

    pub fn max_us(&self) -> Option<f64> {
        self.times.iter().max().map(|t| micros(*t))
    }

    /// Mean time per phase in microseconds, in [`PHASES`] order.
    pub fn phase_means_us(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for p in &self.phases {
            for (o, d) in out.iter_mut().zip(phase_list(p)) {
                *o += micros(d);
            }
        }
        out.map(|v| v / self.phases.len().max(1) as f64)
    }

    fn row(&self) -> CsvRow {
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len().max(1) as f64;
        let p = self.phase_means_us();
        CsvRow {
            family: "spring-mass",
            masses: self.case.masses,
            horizon: self.case.horizon,
            n: self.primal_dim,
            variant: self.case.variant.to_string(),
            lanes: self.case.lanes,
            workers: self.case.workers,
            solved: self.successes(),
            failed: self.failures.len(),
            gmean_us: self.gmean_us(),
            min_us: self.min_us(),
            max_us: self.max_us(),
            assembly_us: p[0],
            stage_factor_us: p[1],
            psi_factor_us: p[2],
            substitution_us: p[3],
            line_search_us: p[4],
            mean_outer: mean(&self.outer_iterations),
            mean_inner: mean(&self.inner_iterations),
            max_kkt_residual: self.max_residual,
        }
    }
}

pub const PHASES: [&str; 5] = ["assembly", "stage_factor", "psi_factor", "substitution", "line_search"];

fn phase_list(p: &PhaseTimings) -> [Duration; 5] {
    [p.assembly, p.stage_factor, p.psi_factor, p.substitution, p.line_search]
}

#[derive(Serialize)]
struct CsvRow {
    family: &'static str,
    masses: usize,
    horizon: usize,
    n: usize,
    variant: String,
    lanes: usize,
    workers: usize,
    solved: usize,
    failed: usize,
    gmean_us: Option<f64>,
    min_us: Option<f64>,
    max_us: Option<f64>,
    assembly_us: f64,
    stage_factor_us: f64,
    psi_factor_us: f64,
    substitution_us: f64,
    line_search_us: f64,
    mean_outer: f64,
    mean_inner: f64,
    max_kkt_residual: f64,
}

struct Outcome {
    time: Duration,
    report: crate::alm::SolveReport,
    residual: f64,
}

fn solve_once(spec: &SuiteSpec, case: &BenchCase, seed: u64) -> Result<Result<Outcome, String>, BenchError> {
    let cfg = SpringMassConfig { masses: case.masses, horizon: case.horizon, seed, ..spec.physics.clone() };
    let data = gen_spring_mass(&cfg)?;
    let problem = OcpProblem::new(&data, case.lanes)?;
    let settings = SolverSettings {
        eps_abs: spec.eps_abs,
        lanes: case.lanes,
        workers: case.workers,
        variant: case.variant,
        ..Default::default()
    };
    let mut solver = Solver::setup(&problem, settings)?;
    let t0 = Instant::now();
    let report = match solver.solve(None) {
        Ok(r) => r,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let time = t0.elapsed();
    if report.status != SolveStatus::Solved {
        return Ok(Err(format!("status {}", report.status)));
    }
    // verified against residuals from a separately built scalar-layout problem
    let residual = kkt_residuals(&OcpProblem::new(&data, 1)?, &solver.solution())?.max();
    if !(residual <= spec.eps_abs) {
        return Ok(Err(format!("KKT residual {residual:e} above {:e}", spec.eps_abs)));
    }
    Ok(Ok(Outcome { time, report, residual }))
}

/// Runs one case: a discarded warm-up solve, then `runs` timed and verified
/// solves on seeds `base_seed..base_seed + runs`.
pub fn run_case(spec: &SuiteSpec, case: &BenchCase) -> Result<BenchResult, BenchError> {
    let physics = SpringMassConfig { masses: case.masses, horizon: case.horizon, ..spec.physics.clone() };
    physics.validate()?;
    let mut result = BenchResult {
        case: *case,
        primal_dim: physics.primal_dim(),
        times: Vec::with_capacity(spec.runs),
        phases: Vec::with_capacity(spec.runs),
        outer_iterations: Vec::with_capacity(spec.runs),
        inner_iterations: Vec::with_capacity(spec.runs),
        max_residual: 0.0,
        failures: Vec::new(),
    };
    let _ = solve_once(spec, case, spec.base_seed)?;
    for k in 0..spec.runs as u64 {
        let seed = spec.base_seed + k;
        match solve_once(spec, case, seed)? {
            Ok(o) => {
                result.times.push(o.time);
                result.phases.push(o.report.timings);
                result.outer_iterations.push(o.report.outer_iterations);
                result.inner_iterations.push(o.report.inner_iterations);
                result.max_residual = result.max_residual.max(o.residual);
            }
            Err(reason) => result.failures.push(RunFailure { seed, reason }),
        }
    }
    Ok(result)
}

/// Runs every case of the suite in order, one at a time.
pub fn run_benchmark(spec: &SuiteSpec) -> Result<Vec<BenchResult>, BenchError> {
    spec.cases.iter().map(|c| run_case(spec, c)).collect()
}

/// One CSV row per case; times in microseconds, empty cells when no run
/// succeeded.
pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r.row())?;
    }
    w.flush()?;
    Ok(())
}

/// Column plotted on the horizontal axis of [`gnuplot_script`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Masses,
    Horizon,
}

/// A gnuplot script drawing geometric-mean time with min/max bands from the
/// CSV written by [`write_csv`], one curve per (variant, lanes, workers).
pub fn gnuplot_script(csv_path: &str, axis: Axis, results: &[BenchResult]) -> String {
    let (col, label) = match axis {
        Axis::Masses => (2, "masses M"),
        Axis::Horizon => (3, "horizon N"),
    };
    let mut configs: Vec<(Variant, usize, usize)> =
        results.iter().map(|r| (r.case.variant, r.case.lanes, r.case.workers)).collect();
    configs.dedup();
    configs.sort_by_key(|c| (c.0.to_string(), c.1, c.2));
    configs.dedup();
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\nset key top left\n");
    s.push_str(&format!("set xlabel '{label}'\nset ylabel 'solve time [us]'\nset logscale y\n"));
    let curves: Vec<String> = configs
        .iter()
        .map(|(v, d, w)| {
            let sel = format!("(strcol(5) eq '{v}' && $6 == {d} && $7 == {w} ? $%s : 1/0)");
            format!(
                "'{csv_path}' using {col}:{}:{} with filledcurves fs transparent solid 0.2 notitle, \
                 '{csv_path}' using {col}:{} with linespoints title '{v} d={d} workers={w}'",
                sel.replace("%s", "12"),
                sel.replace("%s", "13"),
                sel.replace("%s", "11"),
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    s
}

/// Least-squares slope of `log t` against `log N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingCheck {
    pub horizons: Vec<usize>,
    pub times_us: Vec<f64>,
    pub slope: f64,
    /// Slope no larger than 1.5, i.e. no worse than mildly superlinear.
    pub passed: bool,
}

pub const MAX_SCALING_SLOPE: f64 = 1.5;

pub fn scaling_check(horizons: &[usize], times_us: &[f64]) -> Result<ScalingCheck, BenchError> {
    if horizons.len() != times_us.len() || horizons.len() < 2 || times_us.iter().any(|t| !(*t > 0.0)) {
        return Err(BenchError::InvalidConfig("scaling check needs two or more positive timings".into()));
    }
    let xs: Vec<f64> = horizons.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = times_us.iter().map(|t| t.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(ScalingCheck {
        horizons: horizons.to_vec(),
        times_us: times_us.to_vec(),
        slope,
        passed: slope <= MAX_SCALING_SLOPE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_mean_of_powers() {
        assert!((geometric_mean(&[1.0, 10.0, 100.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(geometric_mean(&[]), None);
        assert_eq!(geometric_mean(&[1.0, 0.0]), None);
    }

    #[test]
    fn slope_of_exact_power_laws() {
        let hs = [15, 30, 60, 120];
        let lin: Vec<f64> = hs.iter().map(|n| 3.0 * *n as f64).collect();
        let quad: Vec<f64> = hs.iter().map(|n| (*n * *n) as f64).collect();
        let a = scaling_check(&hs, &lin).unwrap();
        assert!((a.slope - 1.0).abs() < 1e-12 && a.passed);
        let b = scaling_check(&hs, &quad).unwrap();
        assert!((b.slope - 2.0).abs() < 1e-12 && !b.passed);
    }

    #[test]
    fn single_run_gives_one_row() {
        let case = BenchCase { masses: 3, horizon: 5, variant: Variant::Dense, lanes: 4, workers: 1 };
        let spec = SuiteSpec::new(vec![case], 1);
        let results = run_benchmark(&spec).unwrap();
        assert_eq!(results[0].successes(), 1, "{:?}", results[0].failures);
        assert!(results[0].gmean_us().unwrap() > 0.0);
        let mut buf = Vec::new();
        write_csv(&results, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("family,masses,horizon,n,variant,lanes,workers,solved,failed,gmean_us,min_us,max_us"));
        let script = gnuplot_script("out.csv", Axis::Masses, &results);
        assert!(script.contains("'out.csv' using 2:"));
    }
}

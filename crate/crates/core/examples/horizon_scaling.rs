//! A small benchmark sweep over the horizon: CSV on stdout, then the
//! log-log growth rate of the solve time.

use ocpqp::bench::{run_benchmark, scaling_check, write_csv, BenchCase, SuiteSpec};
use ocpqp::kkt::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let horizons = [15, 30, 60, 120];
    let cases =
        horizons.iter().map(|&horizon| BenchCase { masses: 6, horizon, variant: Variant::Dense, lanes: 4, workers: 1 });
    let spec = SuiteSpec::new(cases.collect(), 5);
    let results = run_benchmark(&spec)?;
    write_csv(&results, std::io::stdout())?;
    let times: Vec<f64> = results.iter().map(|r| r.gmean_us().ok_or("a run failed verification")).collect::<Result<_, _>>()?;
    let check = scaling_check(&horizons, &times)?;
    println!("slope {:.2} (limit 1.5): {}", check.slope, if check.passed { "ok" } else { "superlinear" });
    Ok(())
}

//! Problem generators, reference oracles and the benchmark runner.

mod kernels;
mod oracle;
mod random;
mod runner;
mod spring_mass;
mod sweep;

use thiserror::Error;

pub use kernels::{bench_kernel, Kernel, KernelBenchResult, KERNELS};
pub use oracle::{
    enumerate_active_sets, kkt_residuals, riccati, verify_against_oracle, DenseQp, Enumeration, KktResiduals, Oracle,
    VerificationReport, ENUMERATION_MAX_ROWS, ENUMERATION_MAX_VARS,
};
pub use random::{gen_random_ocp, RandomOcpConfig};
pub use runner::{
    geometric_mean, gnuplot_script, run_benchmark, run_case, scaling_check, write_csv, Axis, BenchCase, BenchResult,
    RunFailure, ScalingCheck, SuiteSpec, MAX_SCALING_SLOPE, PHASES,
};
pub use spring_mass::{gen_spring_mass, SpringMassConfig};
pub use sweep::parse_sweep;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("enumeration oracle intractable for {rows} inequality rows and {vars} variables")]
    OracleIntractable { rows: usize, vars: usize },
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Solver(#[from] crate::alm::AlmError),
    #[error(transparent)]
    Kernel(#[from] crate::compact::KernelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

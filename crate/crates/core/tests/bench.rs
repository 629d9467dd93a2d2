mod common;

use common::ocp::{dense, random_data};
use common::oracle::{enumerate, feasible_data, kkt_residual, riccati};
use common::rng;
use nalgebra::DVector;
use ocpqp::alm::{SolveStatus, Solver, SolverSettings};
use ocpqp::bench::{
    enumerate_active_sets, gen_random_ocp, gen_spring_mass, kkt_residuals, riccati as lib_riccati, run_benchmark,
    verify_against_oracle, BenchCase, BenchError, DenseQp, Oracle, RandomOcpConfig, SpringMassConfig, SuiteSpec,
};
use ocpqp::kkt::Variant;
use ocpqp::model::{OcpData, OcpProblem};
use proptest::prelude::*;

fn solve(data: &OcpData) -> Solver {
    let p = OcpProblem::new(data, 4).unwrap();
    let mut s = Solver::setup(&p, SolverSettings::default()).unwrap();
    assert_eq!(s.solve(None).unwrap().status, SolveStatus::Solved);
    s
}

#[test]
fn dense_assembly_matches_test_oracle() {
    let mut r = rng(1);
    let data = random_data(&mut r, 4, 3, 2, 2, 1);
    let (a, b) = (DenseQp::from_data(&data), dense(&data));
    assert_eq!(a.q, b.q);
    assert_eq!(a.q_lin, b.q_lin);
    assert_eq!(a.m, b.m);
    assert_eq!(a.b, b.b);
    assert_eq!(a.g, b.g);
    assert_eq!(a.lower, b.lower);
    assert_eq!(a.upper, b.upper);
}

#[test]
fn library_riccati_agrees_with_test_riccati() {
    let mut r = rng(2);
    for n in [1, 3, 9] {
        let data = random_data(&mut r, n, 3, 2, 0, 0);
        let diff = (lib_riccati(&data).unwrap() - riccati(&data)).amax();
        assert!(diff <= 1e-12, "{diff:e}");
    }
}

#[test]
fn library_enumeration_agrees_with_test_enumeration() {
    let mut r = rng(3);
    for _ in 0..15 {
        let data = feasible_data(&mut r, 3, 2, 1, 2, 1);
        let e = enumerate_active_sets(&data).unwrap();
        let diff = (&e.x - enumerate(&data)).amax();
        assert!(diff <= 1e-9, "{diff:e}");
        assert_eq!(e.candidates, 3u64.pow(7));
    }
}

#[test]
fn four_rows_give_81_candidates() {
    let mut r = rng(4);
    let data = feasible_data(&mut r, 3, 2, 1, 1, 1);
    assert_eq!(enumerate_active_sets(&data).unwrap().candidates, 81);
}

#[test]
fn oversized_enumeration_is_intractable() {
    let mut r = rng(5);
    let data = feasible_data(&mut r, 8, 2, 1, 2, 0);
    assert!(matches!(enumerate_active_sets(&data), Err(BenchError::OracleIntractable { rows: 16, .. })));
}

#[test]
fn library_residuals_agree_with_dense_residuals() {
    let mut r = rng(6);
    let data = feasible_data(&mut r, 6, 3, 2, 3, 2);
    let sol = solve(&data).solution();
    let v = |s: &[f64]| DVector::from_column_slice(s);
    let [dual, eq, primal, _] = kkt_residual(&dense(&data), &v(&sol.x), &v(&sol.y), &v(&sol.lam));
    let lib = kkt_residuals(&OcpProblem::new(&data, 1).unwrap(), &sol).unwrap();
    assert!((lib.dual - dual).abs() <= 1e-12);
    assert!((lib.eq - eq).abs() <= 1e-12);
    assert!((lib.primal - primal).abs() <= 1e-12);
}

#[test]
fn verification_passes_on_solutions_and_fails_on_perturbations() {
    let mut r = rng(7);
    let constrained = feasible_data(&mut r, 3, 2, 1, 2, 1);
    let free = random_data(&mut r, 5, 3, 2, 0, 0);
    for (data, oracle) in [(&constrained, Oracle::Enumerate), (&constrained, Oracle::Residual), (&free, Oracle::Riccati)] {
        let sol = solve(data).solution();
        assert!(verify_against_oracle(data, &sol, oracle, 1e-8).unwrap().passed, "{oracle:?}");
        let mut bad = sol.clone();
        bad.x[1] += 1e-3;
        assert!(!verify_against_oracle(data, &bad, oracle, 1e-8).unwrap().passed, "{oracle:?}");
    }
    let sol = solve(&constrained).solution();
    assert!(verify_against_oracle(&constrained, &sol, Oracle::Riccati, 1e-8).is_err());
}

#[test]
fn random_instances_are_feasible() {
    let cfg = RandomOcpConfig { horizon: 3, nx: 2, nu: 2, ny: 2, ny_terminal: 1 };
    for seed in 0..20 {
        let data = gen_random_ocp(&cfg, seed, 0.3).unwrap();
        let e = enumerate_active_sets(&data).unwrap();
        assert!(e.objective.is_finite());
        let sol = solve(&data).solution();
        let diff = (DVector::from_vec(sol.x) - e.x).amax();
        assert!(diff <= 1e-6, "seed {seed}: {diff:e}");
    }
}

#[test]
fn spring_mass_solves_verify() {
    for masses in [2, 5] {
        let data = gen_spring_mass(&SpringMassConfig { masses, horizon: 10, seed: 3, ..Default::default() }).unwrap();
        let sol = solve(&data).solution();
        assert!(verify_against_oracle(&data, &sol, Oracle::Residual, 1e-8).unwrap().passed);
    }
}

#[test]
fn suites_are_deterministic_apart_from_timings() {
    let cases = vec![
        BenchCase { masses: 4, horizon: 8, variant: Variant::Dense, lanes: 2, workers: 1 },
        BenchCase { masses: 4, horizon: 8, variant: Variant::Diagonal, lanes: 4, workers: 2 },
    ];
    let spec = SuiteSpec { base_seed: 11, ..SuiteSpec::new(cases, 3) };
    let (a, b) = (run_benchmark(&spec).unwrap(), run_benchmark(&spec).unwrap());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.successes(), 3);
        assert_eq!(x.outer_iterations, y.outer_iterations);
        assert_eq!(x.inner_iterations, y.inner_iterations);
        assert_eq!(x.max_residual, y.max_residual);
        assert!(x.max_residual <= spec.eps_abs);
    }
}

#[test]
fn unsolved_runs_are_recorded_as_failures() {
    let case = BenchCase { masses: 3, horizon: 6, variant: Variant::Dense, lanes: 1, workers: 1 };
    // tolerance the solver cannot certify within its iteration budget
    let spec = SuiteSpec { eps_abs: 1e-300, ..SuiteSpec::new(vec![case], 2) };
    let res = run_benchmark(&spec).unwrap();
    assert_eq!(res[0].successes(), 0);
    assert_eq!(res[0].failures.len(), 2);
    assert!(res[0].gmean_us().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generators_are_seeded(seed in any::<u64>(), masses in 2usize..6, horizon in 1usize..6) {
        let cfg = SpringMassConfig { masses, horizon, seed, ..Default::default() };
        let (a, b) = (gen_spring_mass(&cfg).unwrap(), gen_spring_mass(&cfg).unwrap());
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        prop_assert_eq!(a.horizon() * (a.nx() + a.nu()) + a.nx(), cfg.primal_dim());
        let rc = RandomOcpConfig { horizon, nx: masses, nu: 2, ny: 1, ny_terminal: 1 };
        let (c, d) = (gen_random_ocp(&rc, seed, 0.5).unwrap(), gen_random_ocp(&rc, seed, 0.5).unwrap());
        prop_assert_eq!(format!("{c:?}"), format!("{d:?}"));
        prop_assert!(c.validate().is_ok());
    }
}

mod common;

use common::ocp::{dense, random_data, random_diagonal_data, random_vector, Dense};
use common::oracle::{enumerate, feasible_data, kkt_residual, make_feasible, riccati};
use common::rng;
use nalgebra::{DMatrix, DVector};
use ocpqp::alm::{
    eval_grad_phi, eval_phi, exact_line_search, AlmError, AlmState, InitialSigma, Residuals, SolveReport,
    SolveStatus, Solver, SolverSettings,
};
use ocpqp::kkt::Variant;
use ocpqp::model::{DualEqVector, DualIneqVector, OcpData, OcpProblem, PrimalVector};
use proptest::prelude::*;
use rand::Rng;

/// An inner-problem state with explicit `y`, `Σy`, `Σx⁻¹` and center.
struct DenseState {
    y: DVector<f64>,
    sigma: DVector<f64>,
    prox: DVector<f64>,
    center: DVector<f64>,
}

fn random_state(rng: &mut impl Rng, d: &Dense) -> DenseState {
    let (n, m) = (d.q.nrows(), d.g.nrows());
    DenseState {
        y: random_vector(rng, m),
        sigma: DVector::from_fn(m, |_, _| rng.gen_range(0.5..20.0)),
        prox: DVector::from_fn(n, |_, _| rng.gen_range(0.0..2.0)),
        center: random_vector(rng, n),
    }
}

fn to_alm(p: &OcpProblem, s: &DenseState) -> AlmState {
    let dims = p.dims();
    let mut st = AlmState::new(dims, 1.0, 0.0);
    st.y.set_logical(dims, s.y.as_slice()).unwrap();
    st.sigma_y.set_logical(dims, s.sigma.as_slice()).unwrap();
    st.prox.set_logical(dims, s.prox.as_slice()).unwrap();
    st.center.set_logical(dims, s.center.as_slice()).unwrap();
    st
}

fn dense_z(d: &Dense, s: &DenseState, x: &DVector<f64>) -> DVector<f64> {
    let gx = &d.g * x;
    DVector::from_fn(gx.len(), |i, _| gx[i] + s.y[i] / s.sigma[i])
}

fn dense_phi(d: &Dense, s: &DenseState, x: &DVector<f64>) -> f64 {
    let z = dense_z(d, s, x);
    let mut f = 0.5 * x.dot(&(&d.q * x)) + d.q_lin.dot(x);
    for i in 0..z.len() {
        let e = z[i] - z[i].clamp(d.lower[i], d.upper[i]);
        f += 0.5 * s.sigma[i] * e * e;
    }
    let dx = x - &s.center;
    f + 0.5 * dx.component_mul(&s.prox).dot(&dx)
}

fn dense_grad(d: &Dense, s: &DenseState, x: &DVector<f64>) -> DVector<f64> {
    let z = dense_z(d, s, x);
    let e = DVector::from_fn(z.len(), |i, _| s.sigma[i] * (z[i] - z[i].clamp(d.lower[i], d.upper[i])));
    &d.q * x + &d.q_lin + d.g.transpose() * e + (x - &s.center).component_mul(&s.prox)
}

fn pv(p: &OcpProblem, x: &DVector<f64>) -> PrimalVector {
    PrimalVector::from_logical(p.dims(), x.as_slice()).unwrap()
}

fn settings(lanes: usize) -> SolverSettings {
    SolverSettings { lanes, ..Default::default() }
}

fn solve(data: &OcpData, s: SolverSettings) -> (Solver, SolveReport) {
    let p = OcpProblem::new(data, s.lanes).unwrap();
    let mut solver = Solver::setup(&p, s).unwrap();
    let report = solver.solve(None).unwrap();
    (solver, report)
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Checks the dense KKT residuals of the current solution.
fn assert_kkt(data: &OcpData, solver: &Solver, tol: f64) {
    let sol = solver.solution();
    let res = kkt_residual(&dense(data), &dvec(&sol.x), &dvec(&sol.y), &dvec(&sol.lam));
    assert!(res.iter().all(|r| *r <= tol), "kkt residuals {res:?}");
}

#[test]
fn phi_trivial_case_is_the_plain_quadratic() {
    let mut r = rng(1);
    let mut data = random_data(&mut r, 3, 2, 1, 2, 1);
    for st in data.stages.iter_mut() {
        st.lower.fill(f64::NEG_INFINITY);
        st.upper.fill(f64::INFINITY);
    }
    data.terminal.lower.fill(f64::NEG_INFINITY);
    data.terminal.upper.fill(f64::INFINITY);
    let p = OcpProblem::new(&data, 2).unwrap();
    let d = dense(&data);
    let x = random_vector(&mut r, d.q.nrows());
    let mut st = AlmState::new(p.dims(), 3.0, 5.0);
    st.center = pv(&p, &x);
    let f = eval_phi(&p, &st, &pv(&p, &x)).unwrap();
    let want = 0.5 * x.dot(&(&d.q * &x)) + d.q_lin.dot(&x);
    assert!((f - want).abs() <= 1e-13 * (1.0 + want.abs()));
    let g = dvec(&eval_grad_phi(&p, &st, &pv(&p, &x)).unwrap().to_logical(p.dims()));
    assert!((g - (&d.q * &x + &d.q_lin)).amax() <= 1e-13);
}

#[test]
fn phi_and_gradient_match_dense_evaluation() {
    let mut r = rng(2);
    for lanes in [1, 4] {
        for _ in 0..10 {
            let data = random_data(&mut r, 5, 3, 2, 2, 2);
            let p = OcpProblem::new(&data, lanes).unwrap();
            let d = dense(&data);
            let s = random_state(&mut r, &d);
            let st = to_alm(&p, &s);
            let x = random_vector(&mut r, d.q.nrows()) * 2.0;
            let f = eval_phi(&p, &st, &pv(&p, &x)).unwrap();
            let want = dense_phi(&d, &s, &x);
            assert!((f - want).abs() <= 1e-12 * (1.0 + want.abs()), "{f} vs {want}");
            let g = dvec(&eval_grad_phi(&p, &st, &pv(&p, &x)).unwrap().to_logical(p.dims()));
            let gw = dense_grad(&d, &s, &x);
            assert!((&g - &gw).amax() <= 1e-12 * (1.0 + gw.amax()));
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(3);
    let data = random_data(&mut r, 4, 3, 2, 3, 2);
    let p = OcpProblem::new(&data, 4).unwrap();
    let d = dense(&data);
    for _ in 0..10 {
        let s = random_state(&mut r, &d);
        let st = to_alm(&p, &s);
        let x = random_vector(&mut r, d.q.nrows()) * 2.0;
        let g = dvec(&eval_grad_phi(&p, &st, &pv(&p, &x)).unwrap().to_logical(p.dims()));
        let h = 1e-6 * (1.0 + x.amax());
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (eval_phi(&p, &st, &pv(&p, &xp)).unwrap() - eval_phi(&p, &st, &pv(&p, &xm)).unwrap()) / (2.0 * h);
            let err = (fd - g[k]).abs() / (1.0 + g[k].abs());
            assert!(err <= 1e-6, "component {k}: fd {fd} vs {}", g[k]);
        }
    }
}

#[test]
fn line_search_brackets_the_minimizer() {
    let mut r = rng(4);
    for lanes in [1, 2, 8] {
        for _ in 0..20 {
            let data = random_data(&mut r, 4, 3, 2, 3, 2);
            let p = OcpProblem::new(&data, lanes).unwrap();
            let d = dense(&data);
            let s = random_state(&mut r, &d);
            let st = to_alm(&p, &s);
            let x = random_vector(&mut r, d.q.nrows()) * 2.0;
            let g = dense_grad(&d, &s, &x);
            // a descent direction that is not parallel to the gradient
            let dir = -&g + random_vector(&mut r, g.len()) * (0.3 * g.norm() / (g.len() as f64).sqrt());
            if dir.dot(&g) >= 0.0 {
                continue;
            }
            let tau = exact_line_search(&p, &st, &pv(&p, &x), &pv(&p, &dir)).unwrap();
            assert!(tau > 0.0);
            let slope = |t: f64| dense_grad(&d, &s, &(&x + &dir * t)).dot(&dir);
            let scale = slope(0.0).abs();
            let eps = 1e-9 * tau.max(1.0);
            assert!(slope(tau - eps) <= 1e-7 * scale, "left slope {}", slope(tau - eps));
            assert!(slope(tau + eps) >= -1e-7 * scale, "right slope {}", slope(tau + eps));
            let f0 = dense_phi(&d, &s, &(&x + &dir * tau));
            for t in [0.5 * tau, 0.9 * tau, 1.1 * tau, 2.0 * tau] {
                assert!(f0 <= dense_phi(&d, &s, &(&x + &dir * t)) + 1e-12 * (1.0 + f0.abs()));
            }
        }
    }
}

#[test]
fn newton_direction_without_breakpoints_takes_unit_step() {
    let mut r = rng(5);
    let data = random_data(&mut r, 3, 2, 2, 0, 0);
    let p = OcpProblem::new(&data, 4).unwrap();
    let d = dense(&data);
    let st = AlmState::new(p.dims(), 1.0, 0.0);
    let x = random_vector(&mut r, d.q.nrows());
    // unconstrained Newton direction −Q⁻¹(Qx + q) restricted to M Δx = 0
    let (n, m) = (d.q.nrows(), d.m.nrows());
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&d.q);
    kkt.view_mut((n, 0), (m, n)).copy_from(&d.m);
    kkt.view_mut((0, n), (n, m)).copy_from(&d.m.transpose());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&-(&d.q * &x + &d.q_lin));
    let dir = kkt.lu().solve(&rhs).unwrap().rows(0, n).into_owned();
    let tau = exact_line_search(&p, &st, &pv(&p, &x), &pv(&p, &dir)).unwrap();
    assert!((tau - 1.0).abs() <= 1e-12, "{tau}");
}

#[test]
fn line_search_rejects_ascent_and_unbounded_directions() {
    let mut r = rng(6);
    let data = random_data(&mut r, 3, 2, 1, 2, 0);
    let p = OcpProblem::new(&data, 1).unwrap();
    let d = dense(&data);
    let s = random_state(&mut r, &d);
    let st = to_alm(&p, &s);
    let x = random_vector(&mut r, d.q.nrows());
    let g = dense_grad(&d, &s, &x);
    let err = exact_line_search(&p, &st, &pv(&p, &x), &pv(&p, &g)).unwrap_err();
    assert!(matches!(err, AlmError::NonDescentDirection { slope } if slope > 0.0));

    // zero curvature along the direction: no state cost, no bounds, no prox
    let mut flat = random_data(&mut r, 1, 1, 1, 0, 0);
    flat.stages[0].q.fill(0.0);
    flat.stages[0].s.fill(0.0);
    flat.stages[0].q_lin[0] = 1.0;
    let p = OcpProblem::new(&flat, 1).unwrap();
    let st = AlmState::new(p.dims(), 1.0, 0.0);
    let x = PrimalVector::zeros(p.dims());
    let dir = PrimalVector::from_logical(p.dims(), &[-1.0, 0.0, 0.0]).unwrap();
    assert!(matches!(exact_line_search(&p, &st, &x, &dir), Err(AlmError::UnboundedDirection)));
}

#[test]
fn unconstrained_lqr_matches_riccati() {
    let mut r = rng(7);
    for (k, lanes) in [1, 2, 4, 8].into_iter().cycle().take(12).enumerate() {
        let (nx, nu) = (1 + k % 3, 1 + k % 2);
        let mut data = random_data(&mut r, 3 + k, nx, nu, 2, 1);
        make_feasible(&mut r, &mut data, 1.0, 1.0);
        let (solver, report) = solve(&data, settings(lanes));
        assert_eq!(report.status, SolveStatus::Solved);
        let x = dvec(&solver.solution().x);
        let want = riccati(&data);
        assert!((&x - &want).amax() <= 1e-7, "lanes {lanes}: {:e}", (&x - &want).amax());
    }
}

#[test]
fn constrained_problems_match_enumeration() {
    let mut r = rng(8);
    let mut active = 0;
    for seed in 0..12 {
        let data = feasible_data(&mut r, 4, 2, 1, 2, 0);
        let (solver, report) = solve(&data, settings([1, 4][seed % 2]));
        assert_eq!(report.status, SolveStatus::Solved, "seed {seed}");
        assert_kkt(&data, &solver, 1e-8);
        let x = dvec(&solver.solution().x);
        let want = enumerate(&data);
        assert!((&x - &want).amax() <= 1e-6, "seed {seed}: {:e}", (&x - &want).amax());
        active += solver.solution().y.iter().filter(|y| **y != 0.0).count();
    }
    assert!(active > 0, "instances should have active constraints");
}

#[test]
fn solved_reports_meet_tolerance_independently() {
    let mut r = rng(9);
    for _ in 0..8 {
        let data = feasible_data(&mut r, 10, 4, 2, 3, 2);
        let (solver, report) = solve(&data, settings(4));
        assert_eq!(report.status, SolveStatus::Solved);
        assert_kkt(&data, &solver, 1e-8);
        let sol = solver.solution();
        let p = solver.problem();
        let res = Residuals::evaluate(
            p,
            &PrimalVector::from_logical(p.dims(), &sol.x).unwrap(),
            &DualIneqVector::from_logical(p.dims(), &sol.y).unwrap(),
            &DualEqVector::from_logical(p.dims(), &sol.lam).unwrap(),
        );
        assert_eq!(res.dual, report.dual_residual);
        assert_eq!(res.primal, report.primal_residual);
        assert_eq!(res.complementarity, report.complementarity_residual);
        assert!(report.timings.total > std::time::Duration::ZERO);
    }
}

#[test]
fn warm_start_at_solution_needs_one_outer_iteration() {
    let mut r = rng(10);
    let data = feasible_data(&mut r, 6, 3, 2, 3, 1);
    let (mut solver, report) = solve(&data, settings(4));
    assert_eq!(report.status, SolveStatus::Solved);
    assert!(report.outer_iterations > 1);
    let sol = solver.solution();
    let again = solver.solve(Some(&sol)).unwrap();
    assert_eq!(again.status, SolveStatus::Solved);
    assert_eq!(again.outer_iterations, 1);
}

#[test]
fn equality_only_problem_takes_one_newton_step() {
    let mut r = rng(11);
    let data = random_data(&mut r, 5, 3, 2, 0, 0);
    let s = SolverSettings { trace: true, ..settings(4) };
    let (solver, report) = solve(&data, s);
    assert_eq!(report.status, SolveStatus::Solved);
    let steps = |k: usize| report.trace.iter().filter(|t| t.outer == k && t.step > 0.0).count();
    assert_eq!(steps(1), 1);
    for k in 2..=report.outer_iterations {
        assert!(steps(k) <= 1);
    }
    let x = dvec(&solver.solution().x);
    assert!((&x - riccati(&data)).amax() <= 1e-7);
}

#[test]
fn inner_iterates_decrease_phi_and_keep_equalities() {
    let mut r = rng(12);
    for seed in 0..6 {
        let data = feasible_data(&mut r, 12, 4, 2, 4, 2);
        let s = SolverSettings { trace: true, ..settings(4) };
        let (_, report) = solve(&data, s);
        assert_eq!(report.status, SolveStatus::Solved);
        let b = dense(&data).b.amax();
        for w in report.trace.windows(2) {
            let (a, c) = (&w[0], &w[1]);
            if a.outer != c.outer || a.step == 0.0 {
                continue;
            }
            if c.inner >= 2 || a.eq_residual <= 1e-11 * (1.0 + b) {
                assert!(c.phi <= a.phi + 1e-12 * (1.0 + a.phi.abs()), "seed {seed}: φ rose {} -> {}", a.phi, c.phi);
            }
            if c.inner >= 1 {
                assert!(c.eq_residual <= 1e-11 * (1.0 + b), "seed {seed}: eq {:e}", c.eq_residual);
            }
        }
    }
}

#[test]
fn iterates_agree_across_lanes_and_workers() {
    let mut r = rng(13);
    let data = feasible_data(&mut r, 17, 4, 3, 4, 2);
    let run = |lanes, workers| {
        let s = SolverSettings { lanes, workers, trace: true, ..Default::default() };
        let (solver, report) = solve(&data, s);
        assert_eq!(report.status, SolveStatus::Solved);
        assert_kkt(&data, &solver, 1e-8);
        (solver.solution(), report)
    };
    let (s1, r1) = run(1, 1);
    let (s4, r4) = run(4, 1);
    let (s4w, r4w) = run(4, 4);
    assert_eq!(s4, s4w);
    assert_eq!(r4.trace, r4w.trace);
    assert_eq!(r1.outer_iterations, r4.outer_iterations);
    let diff = (dvec(&s1.x) - dvec(&s4.x)).amax();
    assert!(diff <= 1e-9, "{diff:e}");
}

#[test]
fn diagonal_variant_matches_dense() {
    let mut r = rng(14);
    for _ in 0..4 {
        let mut data = random_diagonal_data(&mut r, 8, 3, 2);
        make_feasible(&mut r, &mut data, 0.3, 0.0);
        let base = SolverSettings { trace: true, ..settings(4) };
        let (dense_s, dr) = solve(&data, base.clone());
        let (diag_s, gr) = solve(&data, SolverSettings { variant: Variant::Auto, ..base });
        assert_eq!(diag_s.variant(), Variant::Diagonal);
        assert_eq!(dr.status, SolveStatus::Solved);
        assert_eq!(gr.status, SolveStatus::Solved);
        let diff = (dvec(&dense_s.solution().x) - dvec(&diag_s.solution().x)).amax();
        assert!(diff <= 1e-9, "{diff:e}");
    }
}

#[test]
fn parameter_updates_match_fresh_solves() {
    let mut r = rng(15);
    let data = feasible_data(&mut r, 6, 3, 2, 2, 1);
    let (mut solver, _) = solve(&data, settings(2));

    let mut moved = data.clone();
    moved.x_init = random_vector(&mut r, 3) * 0.1;
    moved.stages[0].q_lin = random_vector(&mut r, 3);
    make_feasible(&mut r, &mut moved, 0.3, 0.0);
    let d = dense(&moved);
    solver.update_initial_state(moved.x_init.as_slice()).unwrap();
    solver.update_gradient(d.q_lin.as_slice()).unwrap();
    solver.update_bounds(d.lower.as_slice(), d.upper.as_slice()).unwrap();
    let report = solver.solve(None).unwrap();
    assert_eq!(report.status, SolveStatus::Solved);
    let (fresh, _) = solve(&moved, settings(2));
    assert_eq!(solver.solution(), fresh.solution());
    assert!(solver.update_bounds(&[0.0], &[1.0]).is_err());
}

#[test]
fn nonconvex_cost_reports_numerical_error() {
    let mut r = rng(16);
    let mut data = random_data(&mut r, 3, 2, 1, 0, 0);
    for st in data.stages.iter_mut() {
        st.q = -DMatrix::identity(2, 2) * 5.0;
        st.s.fill(0.0);
    }
    let (_, report) = solve(&data, settings(1));
    assert_eq!(report.status, SolveStatus::NumericalError);
}

#[test]
fn iteration_limit_reports_max_iter() {
    let mut r = rng(17);
    let data = feasible_data(&mut r, 6, 3, 2, 3, 1);
    let s = SolverSettings { max_outer: 1, initial_sigma: InitialSigma::Fixed(1e-3), ..settings(1) };
    let (_, report) = solve(&data, s);
    assert_eq!(report.status, SolveStatus::MaxIter);
    assert_eq!(report.outer_iterations, 1);
}

#[test]
fn mismatched_state_is_rejected() {
    let mut r = rng(18);
    let a = OcpProblem::new(&random_data(&mut r, 3, 2, 1, 1, 0), 1).unwrap();
    let b = OcpProblem::new(&random_data(&mut r, 4, 2, 1, 1, 0), 1).unwrap();
    let st = AlmState::new(a.dims(), 1.0, 0.0);
    let x = PrimalVector::zeros(b.dims());
    assert!(matches!(eval_phi(&b, &st, &x), Err(AlmError::DimensionMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_satisfy_kkt(seed in 0u64..10_000, n in 1usize..8, nx in 1usize..4, nu in 1usize..3, ny in 0usize..4) {
        let mut r = rng(seed);
        let data = feasible_data(&mut r, n, nx, nu, ny, 1);
        let (solver, report) = solve(&data, settings([1, 2, 4, 8][seed as usize % 4]));
        prop_assert_eq!(report.status, SolveStatus::Solved);
        let sol = solver.solution();
        let res = kkt_residual(&dense(&data), &dvec(&sol.x), &dvec(&sol.y), &dvec(&sol.lam));
        prop_assert!(res.iter().all(|r| *r <= 1e-8), "{:?}", res);
    }
}

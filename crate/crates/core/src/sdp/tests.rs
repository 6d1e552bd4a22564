use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

use super::*;

/// `max lambda s.t. A - lambda I PSD` written as `min -lambda` with
/// `X = A - lambda I`, i.e. `X_rc + lambda [r == c] = A_rc`.
pub(crate) fn min_eig_sdp(a: &DMatrix<f64>) -> SdpProblem {
    let d = a.nrows();
    let mut p = SdpProblem::new(vec![d], 1);
    p.objective.add_free(0, -1.0);
    for r in 0..d {
        for c in r..d {
            let mut f = LinearFunctional::new();
            f.add_entry(0, r, c, if r == c { 1.0 } else { 0.5 });
            if r == c {
                f.add_free(0, 1.0);
            }
            p.add_constraint(f, a[(r, c)]);
        }
    }
    p
}

fn random_symmetric(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

#[test]
fn trace_minimization_with_fixed_corner() {
    // min trace(X) s.t. X_11 = 1
    let mut p = SdpProblem::new(vec![2], 0);
    p.objective.add_entry(0, 0, 0, 1.0);
    p.objective.add_entry(0, 1, 1, 1.0);
    let mut f = LinearFunctional::new();
    f.add_entry(0, 0, 0, 1.0);
    p.add_constraint(f, 1.0);
    let sol = solve_sdp(&p, &SdpOptions::default());
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.primal_objective - 1.0).abs() < 1e-7, "{}", sol.primal_objective);
}

#[test]
fn smallest_eigenvalue_of_diagonal() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let sol = solve_sdp(&min_eig_sdp(&a), &SdpOptions::default());
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.free[0] - 1.0).abs() < 1e-7, "{}", sol.free[0]);
}

#[test]
fn random_min_eigenvalue_matches_eigensolver() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let a = random_symmetric(&mut rng, 5);
    let expect = a.clone().symmetric_eigenvalues().min();
    let sol = solve_sdp(&min_eig_sdp(&a), &SdpOptions::default());
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.free[0] - expect).abs() <= 1e-7, "{} vs {expect}", sol.free[0]);
}

#[test]
fn optimal_solutions_satisfy_kkt_tolerances() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let opts = SdpOptions::default();
    for d in 2..=6 {
        let a = random_symmetric(&mut rng, d);
        let p = min_eig_sdp(&a);
        let sol = solve_sdp(&p, &opts);
        assert_eq!(sol.status, SdpStatus::Optimal);
        // weak duality and gap
        assert!(sol.dual_objective <= sol.primal_objective + opts.gap_tol * (1.0 + sol.primal_objective.abs()));
        assert!(sol.gap <= opts.gap_tol * (1.0 + sol.primal_objective.abs()));
        // equality residuals
        let rhs_norm = p.constraints.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
        for c in &p.constraints {
            let r = c.lhs.eval(&sol.free, &sol.blocks) - c.rhs;
            assert!(r.abs() <= 1e-7 * (1.0 + rhs_norm), "residual {r}");
        }
        for x in &sol.blocks {
            assert!(x.clone().symmetric_eigenvalues().min() >= -opts.psd_tol);
        }
    }
}

#[test]
fn unbounded_problem_is_certified() {
    // min -t s.t. X_11 - t = 0 ... with X_22 unconstrained: t can grow without bound.
    let mut p = SdpProblem::new(vec![2], 1);
    p.objective.add_free(0, -1.0);
    let mut f = LinearFunctional::new();
    f.add_entry(0, 0, 0, 1.0);
    f.add_free(0, -1.0);
    p.add_constraint(f, 0.0);
    let sol = solve_sdp(&p, &SdpOptions::default());
    assert_eq!(sol.status, SdpStatus::DualInfeasibleOrUnbounded);
    assert!(sol.certificate_residual.unwrap() <= 1e-6);
}

#[test]
fn infeasible_problem_is_certified() {
    // X_11 = -1 with X PSD
    let mut p = SdpProblem::new(vec![2], 0);
    p.objective.add_entry(0, 1, 1, 1.0);
    let mut f = LinearFunctional::new();
    f.add_entry(0, 0, 0, 1.0);
    p.add_constraint(f, -1.0);
    let sol = solve_sdp(&p, &SdpOptions::default());
    assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    assert!(sol.certificate_residual.unwrap() <= 1e-6);
}

#[test]
fn presolve_detects_trivial_rays() {
    let mut p = SdpProblem::new(vec![1], 2);
    p.objective.add_free(1, 3.0);
    let mut f = LinearFunctional::new();
    f.add_free(0, 1.0);
    p.add_constraint(f, 1.0);
    let sol = solve_sdp(&p, &SdpOptions::default());
    assert_eq!(sol.status, SdpStatus::DualInfeasibleOrUnbounded);
    assert_eq!(sol.free[1], -1.0);

    let mut p = SdpProblem::new(vec![1], 0);
    p.add_constraint(LinearFunctional::new(), 2.0);
    assert_eq!(solve_sdp(&p, &SdpOptions::default()).status, SdpStatus::PrimalInfeasible);
}

#[test]
fn iteration_limit_is_reported() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let a = random_symmetric(&mut rng, 6);
    let opts = SdpOptions {
        max_iter: 2,
        ..SdpOptions::default()
    };
    assert_eq!(solve_sdp(&min_eig_sdp(&a), &opts).status, SdpStatus::IterationLimit);
}

#[test]
fn solves_are_deterministic() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    let a = random_symmetric(&mut rng, 7);
    let p = min_eig_sdp(&a);
    let s1 = solve_sdp(&p, &SdpOptions::default());
    let s2 = solve_sdp(&p, &SdpOptions::default());
    assert_eq!(s1.iterations, s2.iterations);
    assert_eq!(s1.status, s2.status);
    assert_eq!(s1.primal_objective.to_bits(), s2.primal_objective.to_bits());
}

#[test]
fn sdpa_dump_layout() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
    let text = write_sdpa(&min_eig_sdp(&a));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "3");
    assert_eq!(lines[2], "2");
    assert_eq!(lines[3], "2 -2");
    assert_eq!(
        lines[4],
        "2.0000000000000000e0 5.0000000000000000e-1 3.0000000000000000e0"
    );
    // objective -(-lambda) on the split free pair
    assert_eq!(lines[5], "0 2 1 1 1.0000000000000000e0");
    assert_eq!(lines[6], "0 2 2 2 -1.0000000000000000e0");
}

mod common;

use common::{gaussian, gaussian_sym, random_stiefel, rng};
use stiefel_relax::instances::{gen_procrustes, gen_random, ProblemClass};
use stiefel_relax::linalg::{sym_eigvals, DenseMatrix, SymMatrix};
use stiefel_relax::oracles::{oracle_for, procrustes_closed_form, trs_oracle, OracleMethod};
use stiefel_relax::relax::Relaxation;
use stiefel_relax::solver::{solve, SolverSettings};
use stiefel_relax::Error;

#[test]
fn exact_fit_is_recovered() {
    let mut r = rng("oracle-fit", 1);
    let a = gaussian(&mut r, 7, 4);
    let q = random_stiefel(&mut r, 4, 4);
    let b = a.matmul(&q).unwrap();
    let out = procrustes_closed_form(&a, &b).unwrap();
    assert!(out.minimizer.matrix().sub(&q).unwrap().max_abs() < 1e-10);
    // ‖AU − B‖² = value + ‖B‖² = 0.
    assert!((out.value + b.frobenius_sq()).abs() < 1e-10);
    assert_eq!(out.method, OracleMethod::ProcrustesSvd);
}

#[test]
fn procrustes_dominates_random_feasible_points() {
    let mut r = rng("oracle-procrustes", 2);
    for seed in 0..5 {
        let inst = gen_procrustes(4, 4, seed).unwrap();
        let out = oracle_for(&inst).unwrap().unwrap();
        let at_min = inst.eval_objective(out.minimizer.matrix()).unwrap();
        assert!((at_min - out.value).abs() <= 1e-10 * out.value.abs().max(1.0));
        let w = inst.aux().unwrap();
        let resid = w.residual_sq(out.minimizer.matrix()).unwrap();
        assert!((resid - (out.value + w.offset())).abs() < 1e-9);
        for _ in 0..1000 {
            let u = random_stiefel(&mut r, 4, 4);
            assert!(out.value <= inst.eval_objective(&u).unwrap() + 1e-12);
        }
    }
}

#[test]
fn procrustes_rejects_rectangular_unknowns() {
    let a = DenseMatrix::zeros(5, 4);
    let b = DenseMatrix::zeros(5, 3);
    assert!(matches!(
        procrustes_closed_form(&a, &b),
        Err(Error::Parameter(_))
    ));
    assert!(oracle_for(&gen_procrustes(4, 3, 0).unwrap()).is_none());
    assert!(oracle_for(&gen_random(4, 3, 0).unwrap()).is_none());
}

#[test]
fn trs_special_cases() {
    let mut r = rng("oracle-trs-special", 3);
    let h = gaussian_sym(&mut r, 6);
    let out = trs_oracle(&h, &[0.0; 6]).unwrap();
    let lmin = *sym_eigvals(&h).unwrap().last().unwrap();
    assert!((out.value - lmin).abs() < 1e-10);
    let u = out.minimizer.to_vec();
    let hu = h.matvec(&u);
    for (a, b) in hu.iter().zip(&u) {
        assert!((a - lmin * b).abs() < 1e-9);
    }

    let g: Vec<f64> = (0..6).map(|_| r.normal()).collect();
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let out = trs_oracle(&SymMatrix::zeros(6), &g).unwrap();
    assert!((out.value + 2.0 * gnorm).abs() < 1e-10);
    for (ui, gi) in out.minimizer.to_vec().iter().zip(&g) {
        assert!((ui + gi / gnorm).abs() < 1e-10);
    }
}

#[test]
fn trs_hard_case_with_degenerate_bottom_eigenspace() {
    // λ_min = −3 twice; g lives in the remaining eigenspace and is small.
    let h = SymMatrix::from_diag(&[-3.0, 1.0, -3.0, 2.0]);
    let g = [0.0, 0.5, 0.0, -0.4];
    let out = trs_oracle(&h, &g).unwrap();
    assert_eq!(out.method, OracleMethod::HardCase);
    // Pinned multiplier: u_1 = −0.5/4, u_3 = 0.4/5, rest on the bottom space.
    let (u1, u3) = (-0.125, 0.08);
    let rest = 1.0 - u1 * u1 - u3 * u3;
    let expected = -3.0 * rest + u1 * u1 + 2.0 * u3 * u3 + 2.0 * (0.5 * u1 - 0.4 * u3);
    assert!((out.value - expected).abs() < 1e-12);
}

#[test]
fn trs_beats_sampling_and_sits_above_the_shor_bound() {
    let mut r = rng("oracle-trs-random", 4);
    for seed in 0..5 {
        let inst = gen_random(8, 1, seed).unwrap();
        let out = oracle_for(&inst).unwrap().unwrap();
        assert!(matches!(
            out.method,
            OracleMethod::Secular | OracleMethod::HardCase
        ));
        let at_min = inst.eval_objective(out.minimizer.matrix()).unwrap();
        assert!((at_min - out.value).abs() <= 1e-10 * out.value.abs().max(1.0));

        let mut best = f64::INFINITY;
        for _ in 0..10_000 {
            let u = random_stiefel(&mut r, 8, 1);
            best = best.min(inst.eval_objective(&u).unwrap());
        }
        assert!(out.value <= best + 1e-12);

        let shor = solve(&Relaxation::Shor.build(&inst), &SolverSettings::default()).unwrap();
        assert!(shor.is_optimal());
        let tol = 1e-6 * out.value.abs().max(1.0);
        assert!(shor.primal_objective <= out.value + tol);
        // Shor is exact for p = 1.
        assert!((shor.primal_objective - out.value).abs() <= tol);
        assert_eq!(inst.class(), ProblemClass::Random);
    }
}

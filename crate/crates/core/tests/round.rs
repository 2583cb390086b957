mod common;

use common::{gaussian, random_stiefel, random_tangent, rng};
use stiefel_relax::instances::{gen_procrustes, generate, ProblemClass, QpsInstance};
use stiefel_relax::linalg::{vec, DenseMatrix, SymMatrix};
use stiefel_relax::oracles::procrustes_closed_form;
use stiefel_relax::round::{
    primal_value, refine, retract, riemannian_grad, round_to_stiefel, RefineSettings, StiefelPoint,
};

fn point(u: DenseMatrix) -> StiefelPoint {
    StiefelPoint::new(u).unwrap()
}

#[test]
fn rounding_fixes_stiefel_points_and_ignores_scale() {
    let mut r = rng("round-fixed", 1);
    for (n, p) in [(3, 1), (5, 3), (6, 6)] {
        let u = random_stiefel(&mut r, n, p);
        for alpha in [1.0, 2.0, 1e-3, 1e4] {
            let out = round_to_stiefel(&vec(&u.scale(alpha)), n, p).unwrap();
            assert!(out.matrix().sub(&u).unwrap().max_abs() < 1e-12);
        }
    }
}

#[test]
fn rounding_random_vectors_is_orthonormal_and_scale_invariant() {
    let mut r = rng("round-random", 2);
    for (n, p) in [(4, 2), (6, 3), (9, 5), (9, 8)] {
        for _ in 0..20 {
            let u: Vec<f64> = (0..n * p).map(|_| r.normal()).collect();
            let a = round_to_stiefel(&u, n, p).unwrap();
            assert!(a.matrix().orthonormality_residual() <= 1e-10);
            let scaled: Vec<f64> = u.iter().map(|v| 3.7 * v).collect();
            let b = round_to_stiefel(&scaled, n, p).unwrap();
            assert!(a.matrix().sub(b.matrix()).unwrap().max_abs() < 1e-12);
        }
    }
}

#[test]
fn rank_deficient_rounding_is_completed_deterministically() {
    // Second column is a multiple of the first.
    let u = [1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0];
    let a = round_to_stiefel(&u, 4, 2).unwrap();
    let b = round_to_stiefel(&u, 4, 2).unwrap();
    assert_eq!(a, b);
    assert!(a.matrix().orthonormality_residual() <= 1e-12);
    let zero = round_to_stiefel(&[0.0; 8], 4, 2).unwrap();
    assert!(zero.matrix().orthonormality_residual() <= 1e-12);
}

#[test]
fn rounding_rejects_bad_input() {
    assert!(round_to_stiefel(&[1.0; 6], 2, 3).is_err());
    assert!(round_to_stiefel(&[1.0; 5], 3, 2).is_err());
    assert!(round_to_stiefel(&[f64::NAN; 6], 3, 2).is_err());
}

#[test]
fn primal_value_delegates_to_the_instance() {
    let mut r = rng("round-value", 3);
    let inst = generate(ProblemClass::Penrose, 5, 2, 9).unwrap();
    let u = random_stiefel(&mut r, 5, 2);
    let direct = inst.eval_objective(&u).unwrap();
    assert_eq!(primal_value(&inst, &point(u)).unwrap(), direct);
}

#[test]
fn gradient_is_tangent_and_matches_finite_differences() {
    let mut r = rng("round-fd", 4);
    let h = 1e-5;
    for class in ProblemClass::ALL {
        for seed in 0..50 {
            let (n, p) = [(4, 2), (5, 3), (6, 1), (3, 3)][seed as usize % 4];
            let inst = generate(class, n, p, seed).unwrap();
            let u = random_stiefel(&mut r, n, p);
            let grad = riemannian_grad(&inst, &point(u.clone()));
            let utg = u.t_matmul(&grad).unwrap();
            let skew = utg.add(&utg.transpose()).unwrap().max_abs();
            assert!(skew <= 1e-10, "{class} {seed}: {skew:e}");

            let t = random_tangent(&mut r, &u);
            let f = |s: f64| inst.quadratic_form(&vec(&retract(&u, &t.scale(s)).unwrap()));
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let exact: f64 = grad
                .as_slice()
                .iter()
                .zip(t.as_slice())
                .map(|(a, b)| a * b)
                .sum();
            let rel = (fd - exact).abs() / exact.abs().max(1.0);
            assert!(rel <= 1e-6, "{class} {seed}: fd {fd} exact {exact}");
        }
    }
}

#[test]
fn constant_objective_is_left_alone() {
    let inst = QpsInstance::new(
        5,
        3,
        SymMatrix::identity(15),
        vec![0.0; 15],
        ProblemClass::Random,
        0,
        None,
    )
    .unwrap();
    let mut r = rng("round-const", 5);
    let start = point(random_stiefel(&mut r, 5, 3));
    assert!(riemannian_grad(&inst, &start).max_abs() < 1e-13);
    let out = refine(&inst, &start, &RefineSettings::default()).unwrap();
    assert_eq!(out.iterations, 0);
    assert!(out.converged);
    assert_eq!(out.point, start);
    assert!((out.value - 3.0).abs() < 1e-13);
}

#[test]
fn refinement_is_monotone_and_feasible() {
    let mut r = rng("round-monotone", 6);
    for class in ProblemClass::ALL {
        for seed in 0..10 {
            let inst = generate(class, 6, 3, seed).unwrap();
            let start = point(random_stiefel(&mut r, 6, 3));
            let out = refine(&inst, &start, &RefineSettings::default()).unwrap();
            assert!(out.value <= out.start_value + 1e-12);
            assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
            assert!(out.point.matrix().orthonormality_residual() <= 1e-10);
            assert!(out.history.len() == out.iterations + 1);
            if out.converged {
                assert!(out.grad_norm <= 1e-8);
            }
        }
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let inst = generate(ProblemClass::Random, 6, 3, 1).unwrap();
    let mut r = rng("round-cap", 7);
    let start = point(random_stiefel(&mut r, 6, 3));
    let settings = RefineSettings {
        max_iters: 2,
        ..RefineSettings::default()
    };
    let out = refine(&inst, &start, &settings).unwrap();
    assert!(!out.converged);
    assert!(out.iterations <= 2);
    assert!(out.value <= out.start_value);
}

#[test]
fn square_procrustes_reaches_the_closed_form_optimum() {
    let mut r = rng("round-procrustes", 8);
    for seed in 0..20 {
        let n = if seed % 2 == 0 { 4 } else { 6 };
        let inst = gen_procrustes(n, n, seed).unwrap();
        let w = inst.aux().unwrap();
        let oracle = procrustes_closed_form(&w.a, &w.b).unwrap();
        // Gradient flow cannot leave a connected component of O(n), and
        // within one component every local minimizer is global; start on
        // the optimizer's side of det = 0.
        let mut u = random_stiefel(&mut r, n, n);
        if det_sign(&u) != det_sign(oracle.minimizer.matrix()) {
            for i in 0..n {
                u[(i, 0)] = -u[(i, 0)];
            }
        }
        let out = refine(&inst, &point(u), &RefineSettings::default()).unwrap();
        assert!(
            (out.value - oracle.value).abs() <= 1e-6,
            "seed {seed}: {} vs {}",
            out.value,
            oracle.value
        );
    }
}

fn det_sign(u: &DenseMatrix) -> f64 {
    let n = u.rows();
    let mut a = u.clone();
    let mut sign = 1.0;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs()))
            .unwrap();
        if piv != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            sign = -sign;
        }
        if a[(k, k)] < 0.0 {
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    sign
}

#[test]
fn stiefel_point_validates() {
    let mut r = rng("round-validate", 9);
    assert!(StiefelPoint::new(gaussian(&mut r, 4, 2)).is_err());
    assert!(StiefelPoint::new(DenseMatrix::identity(3)).is_ok());
    assert!(StiefelPoint::new(DenseMatrix::zeros(2, 3)).is_err());
}

#[test]
fn degenerate_u_is_rounded_from_x() {
    use stiefel_relax::linalg::SymMatrix;
    use stiefel_relax::round::round_solution;
    let mut r = rng("round-even", 9);
    let inst = generate(ProblemClass::BlockDiag, 5, 2, 3).unwrap();
    let target = random_stiefel(&mut r, 5, 2);
    let t = vec(&target);
    let x = SymMatrix::from_upper_fn(10, |a, b| t[a] * t[b]);
    // u = 0 carries no direction; the rank-one X recovers ±target.
    let out = round_solution(&inst, &[0.0; 10], &x).unwrap();
    let err = out.matrix().sub(&target).unwrap().max_abs();
    let err_neg = out.matrix().add(&target).unwrap().max_abs();
    assert!(err.min(err_neg) < 1e-10);
    // A non-degenerate u is used as is.
    let out = round_solution(&inst, &t, &SymMatrix::zeros(10)).unwrap();
    assert!(out.matrix().sub(&target).unwrap().max_abs() < 1e-10);
}

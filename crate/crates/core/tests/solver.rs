use stiefel_relax::linalg::SymMatrix;
use stiefel_relax::solver::{
    kkt_residuals, solve, BlockLabel, ConicProgram, PsdBlock, SolveStatus, SolverSettings,
};

/// min C•X s.t. tr X = 1, X ⪰ 0; variables are the upper triangle of X.
fn min_eig_program(c: &[f64]) -> ConicProgram {
    let n = c.len();
    let mut prog = ConicProgram::new(n * (n + 1) / 2);
    let mut block = PsdBlock::new(BlockLabel::Other, n);
    let mut var = 0;
    let mut trace = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            block.push(i, j, var, 1.0);
            if i == j {
                prog.objective[var] = c[i];
                trace.push((var, 1.0));
            }
            var += 1;
        }
    }
    prog.add_equality(trace, 1.0);
    prog.blocks.push(block);
    prog
}

fn both() -> [SolverSettings; 2] {
    [
        SolverSettings::default(),
        SolverSettings::operator_splitting(),
    ]
}

#[test]
fn min_eigenvalue_sdp() {
    for settings in both() {
        let prog = min_eig_program(&[2.0, -1.0, 3.0]);
        let sol = solve(&prog, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", settings.algorithm);
        assert!(
            (sol.primal_objective + 1.0).abs() < 1e-7,
            "{}",
            sol.primal_objective
        );
        let x = &sol.primal_blocks[0];
        assert!((x.get(1, 1) - 1.0).abs() < 1e-6);
        assert!(x.get(0, 0).abs() < 1e-6 && x.get(2, 2).abs() < 1e-6);
        let r = kkt_residuals(&prog, &sol.x, &sol.eq_duals, &sol.dual_blocks).unwrap();
        assert!(r.max() <= 1e-8, "{r:?}");
    }
}

#[test]
fn contradictory_traces_are_primal_infeasible() {
    for settings in both() {
        let mut prog = min_eig_program(&[1.0, 1.0]);
        let trace = prog.equalities[0]
            .coeffs
            .iter()
            .map(|&(v, a)| (v as usize, a))
            .collect();
        prog.add_equality(trace, 2.0);
        let sol = solve(&prog, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    }
}

#[test]
fn unbounded_program_is_dual_infeasible() {
    // min −x s.t. [[x]] ⪰ 0.
    let mut prog = ConicProgram::new(1);
    prog.objective[0] = -1.0;
    let mut b = PsdBlock::new(BlockLabel::Other, 1);
    b.push(0, 0, 0, 1.0);
    prog.blocks.push(b);
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::DualInfeasible);
}

#[test]
fn repeated_coordinates_fail_validation() {
    let mut prog = min_eig_program(&[1.0, 2.0]);
    prog.blocks[0].push(0, 0, 0, 1.0);
    assert!(solve(&prog, &SolverSettings::default()).is_err());
}

#[test]
fn invalid_settings_are_rejected() {
    let prog = min_eig_program(&[1.0]);
    let mut s = SolverSettings::default();
    s.over_relaxation = 2.5;
    assert!(solve(&prog, &s).is_err());
    let s = SolverSettings::default().with_tolerance(0.0);
    assert!(solve(&prog, &s).is_err());
}

#[test]
fn solves_are_deterministic() {
    let c = [0.3, -1.2, 0.7, 2.0, -0.4];
    for settings in both() {
        let a = solve(&min_eig_program(&c), &settings).unwrap();
        let b = solve(&min_eig_program(&c), &settings).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.x, b.x);
        assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
    }
}

#[test]
fn dual_blocks_are_psd_and_bound_holds() {
    let sol = solve(
        &min_eig_program(&[4.0, 1.5, -0.25, 3.0]),
        &SolverSettings::default(),
    )
    .unwrap();
    assert!(sol.dual_blocks[0].min_eigenvalue().unwrap() >= -1e-9);
    assert!(sol.dual_objective <= sol.primal_objective + 1e-8);
    assert!((sol.dual_objective + 0.25).abs() < 1e-7);
}

#[test]
fn algorithms_agree_on_a_coupled_program() {
    // Two blocks sharing variables: X ⪰ 0 (order 3) and I − diag-part ⪰ 0.
    let c = SymMatrix::from_upper_fn(3, |i, j| {
        [[1.0, -0.5, 0.2], [0.0, -0.3, 0.9], [0.0, 0.0, 0.4]][i][j]
    });
    let mut prog = ConicProgram::new(6);
    let mut x = PsdBlock::new(BlockLabel::Other, 3);
    let mut slack = PsdBlock::new(BlockLabel::Other, 3);
    let mut var = 0;
    let mut trace = Vec::new();
    for j in 0..3 {
        for i in 0..=j {
            x.push(i, j, var, 1.0);
            slack.push(i, j, var, -1.0);
            prog.objective[var] = if i == j {
                c.get(i, j)
            } else {
                2.0 * c.get(i, j)
            };
            if i == j {
                trace.push((var, 1.0));
                slack.push_const(i, i, 0.6);
            }
            var += 1;
        }
    }
    prog.add_equality(trace, 1.5);
    prog.blocks.push(x);
    prog.blocks.push(slack);
    let a = solve(&prog, &SolverSettings::default()).unwrap();
    let b = solve(
        &prog,
        &SolverSettings::operator_splitting().with_tolerance(1e-8),
    )
    .unwrap();
    assert!(
        a.is_optimal() && b.is_optimal(),
        "{:?} {:?}",
        a.status,
        b.status
    );
    assert!((a.primal_objective - b.primal_objective).abs() < 1e-6);
}

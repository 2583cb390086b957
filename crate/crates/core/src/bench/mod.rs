//! Benchmark harness: per-instance bound/round/refine pipeline, suite runner
//! with a resumable CSV log, and report rendering.

mod config;
mod report;
mod suite;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::{ProblemClass, QpsInstance};
use crate::linalg::SymMatrix;
use crate::relax::{y_var, Relaxation};
use crate::round::{primal_value, refine, round_solution, RefineSettings};
use crate::solver::{solve, ConicProgram, ConicSolution, SolveStatus, SolverSettings};

pub use config::BenchConfig;
pub use report::{
    histogram, render_report, HistogramSpec, ReportFormat, ReportMode, HISTOGRAM_BUCKETS,
};
pub use suite::{instance_id, read_records, run_suite, suite_seed, write_records, SuiteSummary};

/// A relaxation "solves" an instance when its gap is below this.
pub const SOLVED_GAP: f64 = 1e-4;

/// Slack, relative to `max(1, |d|)`, by which a primal value may undercut
/// the bound before the pair is flagged as a numerical anomaly.
pub const ANOMALY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub gamma: f64,
    /// `p < d` beyond tolerance. `gamma` is clamped to 0 in that case.
    pub anomaly: bool,
}

/// `γ = (p − d) / max{1, |½(p + d)|}`.
pub fn relative_gap(p_val: f64, d_val: f64) -> Gap {
    if p_val < d_val - ANOMALY_TOL * d_val.abs().max(1.0) {
        return Gap {
            gamma: 0.0,
            anomaly: true,
        };
    }
    Gap {
        gamma: (p_val - d_val) / (0.5 * (p_val + d_val)).abs().max(1.0),
        anomaly: false,
    }
}

/// One row of the results file: one relaxation applied to one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance_id: String,
    pub class: ProblemClass,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub relaxation: Relaxation,
    /// Relaxation bound (primal objective of the conic program).
    pub d: Option<f64>,
    /// Objective at the rounded point.
    pub p_raw: Option<f64>,
    /// Objective after Riemannian refinement.
    pub p_refined: Option<f64>,
    /// Absent unless the solver reported `optimal`.
    pub gamma: Option<f64>,
    pub solved: bool,
    pub t_total: f64,
    pub t_solve: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl BenchRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Copy with both timing columns zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            t_total: 0.0,
            t_solve: 0.0,
            ..self.clone()
        }
    }

    /// Refined value below the bound by more than the anomaly tolerance.
    pub fn is_anomalous(&self) -> bool {
        match (self.p_refined, self.d) {
            (Some(p), Some(d)) => relative_gap(p, d).anomaly,
            _ => false,
        }
    }
}

/// Solves each selected relaxation of `inst`, rounds and refines its
/// solution, and reports the gap. Records follow the order of
/// `relaxations`.
pub fn run_instance(
    inst: &QpsInstance,
    instance_id: &str,
    relaxations: &[Relaxation],
    solver: &SolverSettings,
    refine_settings: &RefineSettings,
) -> Result<Vec<BenchRecord>> {
    run_instance_with(
        inst,
        instance_id,
        relaxations,
        solver,
        refine_settings,
        |_, _, _| {},
    )
}

/// [`run_instance`] that also hands each program and its raw solution to
/// `inspect`, for checks that need more than the recorded columns.
pub fn run_instance_with(
    inst: &QpsInstance,
    instance_id: &str,
    relaxations: &[Relaxation],
    solver: &SolverSettings,
    refine_settings: &RefineSettings,
    mut inspect: impl FnMut(Relaxation, &ConicProgram, &ConicSolution),
) -> Result<Vec<BenchRecord>> {
    relaxations
        .iter()
        .map(|&r| run_relaxation(inst, instance_id, r, solver, refine_settings, &mut inspect))
        .collect()
}

fn run_relaxation(
    inst: &QpsInstance,
    instance_id: &str,
    relaxation: Relaxation,
    solver: &SolverSettings,
    refine_settings: &RefineSettings,
    inspect: &mut impl FnMut(Relaxation, &ConicProgram, &ConicSolution),
) -> Result<BenchRecord> {
    let (n, p) = (inst.n(), inst.p());
    let start = Instant::now();
    let prog = relaxation.build(inst);
    let solve_start = Instant::now();
    let sol = solve(&prog, solver)?;
    let t_solve = solve_start.elapsed().as_secs_f64();

    let d = Some(sol.primal_objective).filter(|v| v.is_finite());
    let mut p_raw = None;
    let mut p_refined = None;
    let u: Vec<f64> = (0..n * p).map(|a| sol.x[y_var(0, 1 + a)]).collect();
    let x = SymMatrix::from_upper_fn(n * p, |a, b| sol.x[y_var(1 + a, 1 + b)]);
    if d.is_some() && sol.x.iter().all(|v| v.is_finite()) {
        let rounded = round_solution(inst, &u, &x)?;
        p_raw = Some(primal_value(inst, &rounded)?);
        p_refined = Some(refine(inst, &rounded, refine_settings)?.value);
    }
    let t_total = start.elapsed().as_secs_f64();
    inspect(relaxation, &prog, &sol);

    let gamma = match (sol.status, p_refined, d) {
        (SolveStatus::Optimal, Some(pv), Some(dv)) => Some(relative_gap(pv, dv).gamma),
        _ => None,
    };
    Ok(BenchRecord {
        instance_id: instance_id.to_string(),
        class: inst.class(),
        n,
        p,
        seed: inst.seed(),
        relaxation,
        d,
        p_raw,
        p_refined,
        gamma,
        solved: gamma.is_some_and(|g| g < SOLVED_GAP),
        t_total,
        t_solve,
        iterations: sol.iterations,
        status: sol.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_formula() {
        assert!((relative_gap(2.0, 1.0).gamma - 1.0 / 1.5).abs() < 1e-15);
        assert!((relative_gap(0.5, 0.4).gamma - 0.1).abs() < 1e-15);
        assert_eq!(relative_gap(3.0, 3.0).gamma, 0.0);
        assert!((relative_gap(-10.0, -12.0).gamma - 2.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn undercut_bound_is_flagged() {
        let g = relative_gap(1.0, 1.1);
        assert!(g.anomaly);
        assert_eq!(g.gamma, 0.0);
        assert!(!relative_gap(1.0, 1.0 + 1e-9).anomaly);
    }
}

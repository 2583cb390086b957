//! Embedded conic solver for [`ConicProgram`]s.
//!
//! Two algorithms share one program format and one solution format:
//!
//! * [`Algorithm::InteriorPoint`] (default): infeasible primal-dual
//!   path-following with the HKM search direction and Mehrotra
//!   predictor-corrector steps. It reaches 1e-9 relative accuracy in a few
//!   dozen iterations and is what the benchmark uses.
//! * [`Algorithm::OperatorSplitting`]: ADMM alternating between an affine
//!   projection (one cached factorization) and the PSD cone projection, with
//!   Ruiz equilibration, over-relaxation and adaptive penalty updates. It
//!   shares no code with the interior-point path beyond the cone data, which
//!   makes it a useful cross-check.

mod admm;
mod dualize;
mod equilibrate;
mod ipm;
mod kkt;
mod program;
mod reduce;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

pub use equilibrate::{ruiz_equilibrate, Equilibration};
pub use kkt::{kkt_residuals, KktResiduals};
pub use program::{BlockEntry, BlockLabel, ConicProgram, ConstEntry, EqualityRow, PsdBlock};
pub use reduce::{reduce_equalities, ReducedEqualities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    InteriorPoint,
    OperatorSplitting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub algorithm: Algorithm,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub eps_gap: f64,
    /// Iteration cap; `None` picks 100 for the interior-point method and
    /// 200,000 for operator splitting.
    pub max_iters: Option<usize>,
    /// ADMM relaxation parameter, in (1, 2).
    pub over_relaxation: f64,
    /// ADMM penalty rescaling.
    pub adaptive_penalty: bool,
    pub time_limit_seconds: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::InteriorPoint,
            eps_primal: 1e-9,
            eps_dual: 1e-9,
            eps_gap: 1e-9,
            max_iters: None,
            over_relaxation: 1.6,
            adaptive_penalty: true,
            time_limit_seconds: None,
        }
    }
}

impl SolverSettings {
    pub fn operator_splitting() -> Self {
        Self {
            algorithm: Algorithm::OperatorSplitting,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps_primal = eps;
        self.eps_dual = eps;
        self.eps_gap = eps;
        self
    }

    pub fn effective_max_iters(&self) -> usize {
        self.max_iters.unwrap_or(match self.algorithm {
            Algorithm::InteriorPoint => 100,
            Algorithm::OperatorSplitting => 200_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_primal", self.eps_primal),
            ("eps_dual", self.eps_dual),
            ("eps_gap", self.eps_gap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.over_relaxation > 1.0 && self.over_relaxation < 2.0) {
            return Err(Error::Config(format!(
                "over_relaxation must lie in (1, 2), got {}",
                self.over_relaxation
            )));
        }
        if self.max_iters == Some(0) {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if let Some(t) = self.time_limit_seconds {
            if !(t > 0.0) {
                return Err(Error::Config(format!(
                    "time limit must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    PrimalInfeasible,
    DualInfeasible,
    TimeLimit,
    /// The interior-point method could not make further progress (lost
    /// definiteness or vanishing steps) before reaching the tolerances.
    Stalled,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Stalled => "stalled",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "max_iters" => SolveStatus::MaxIters,
            "primal_infeasible" => SolveStatus::PrimalInfeasible,
            "dual_infeasible" => SolveStatus::DualInfeasible,
            "time_limit" => SolveStatus::TimeLimit,
            "stalled" => SolveStatus::Stalled,
            other => return Err(Error::Parameter(format!("unknown solver status `{other}`"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal variables.
    pub x: Vec<f64>,
    /// Block values `Z_k(x)`.
    pub primal_blocks: Vec<SymMatrix>,
    /// Multipliers for the equality rows, in the program's row order.
    pub eq_duals: Vec<f64>,
    /// Dual cone variables `W_k ⪰ 0`.
    pub dual_blocks: Vec<SymMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Residuals as measured by the solver at termination.
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub wall_time_seconds: f64,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Empty solution carrying only a status, for programs rejected before
    /// iterating (e.g. inconsistent equalities).
    pub(crate) fn certificate_only(prog: &ConicProgram, status: SolveStatus) -> Self {
        Self {
            status,
            x: vec![0.0; prog.num_vars],
            primal_blocks: prog
                .blocks
                .iter()
                .map(|b| SymMatrix::zeros(b.order))
                .collect(),
            eq_duals: vec![0.0; prog.equalities.len()],
            dual_blocks: prog
                .blocks
                .iter()
                .map(|b| SymMatrix::zeros(b.order))
                .collect(),
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            residuals: KktResiduals {
                primal: f64::INFINITY,
                dual: f64::INFINITY,
                gap: f64::INFINITY,
            },
            iterations: 0,
            wall_time_seconds: 0.0,
        }
    }
}

/// Solves `prog`. Structural problems (bad indices, repeated coordinates,
/// invalid settings) are reported as errors before any iteration; numerical
/// outcomes are reported through [`ConicSolution::status`].
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution> {
    settings.validate()?;
    prog.validate()?;
    match settings.algorithm {
        Algorithm::InteriorPoint => ipm::solve(prog, settings),
        Algorithm::OperatorSplitting => admm::solve(prog, settings),
    }
}

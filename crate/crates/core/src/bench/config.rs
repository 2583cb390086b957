use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::ProblemClass;
use crate::relax::Relaxation;
use crate::round::RefineSettings;
use crate::solver::SolverSettings;

/// Suite description, read from TOML.
///
/// ```toml
/// pairs = [[6, 2], [6, 3], [6, 5]]
/// classes = ["random", "blockdiag", "procrustes", "penrose"]
/// instances_per_cell = 50
/// base_seed = 0
/// relaxations = ["shor", "diagsum", "kron"]
/// output = "results.csv"
/// workers = 0          # 0 = one per available core
///
/// [solver]
/// eps_primal = 1e-9
///
/// [refine]
/// max_iters = 500
/// ```
///
/// Every field is optional; omitted ones take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub pairs: Vec<(usize, usize)>,
    pub classes: Vec<ProblemClass>,
    pub instances_per_cell: usize,
    pub base_seed: u64,
    pub relaxations: Vec<Relaxation>,
    pub solver: SolverSettings,
    pub refine: RefineSettings,
    pub output: PathBuf,
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            pairs: grid(&[6, 9]),
            classes: ProblemClass::ALL.to_vec(),
            instances_per_cell: 50,
            base_seed: 0,
            relaxations: vec![Relaxation::Shor, Relaxation::DiagSum, Relaxation::Kron],
            solver: SolverSettings::default(),
            refine: RefineSettings::default(),
            output: PathBuf::from("results.csv"),
            workers: 0,
        }
    }
}

/// `p ∈ {2, ⌈n/2⌉, n − 1}` for each `n`, without duplicates.
fn grid(ns: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for &n in ns {
        for p in [2, n.div_ceil(2), n - 1] {
            if !pairs.contains(&(n, p)) {
                pairs.push((n, p));
            }
        }
    }
    pairs
}

impl BenchConfig {
    /// 1,000 instances per class on the grid n ∈ {6, 9, 12}. The Kron
    /// relaxation at (12, 11) alone takes minutes per instance.
    pub fn full_scale() -> Self {
        Self {
            pairs: grid(&[6, 9, 12]),
            instances_per_cell: 1000,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances_per_cell == 0 {
            return Err(Error::Config(
                "instances_per_cell must be at least 1".into(),
            ));
        }
        if self.pairs.is_empty() || self.classes.is_empty() || self.relaxations.is_empty() {
            return Err(Error::Config(
                "pairs, classes and relaxations must be non-empty".into(),
            ));
        }
        for &(n, p) in &self.pairs {
            if p == 0 || p > n {
                return Err(Error::Config(format!(
                    "pair ({n}, {p}) violates 1 <= p <= n"
                )));
            }
        }
        for (i, r) in self.relaxations.iter().enumerate() {
            if self.relaxations[..i].contains(r) {
                return Err(Error::Config(format!("relaxation `{r}` listed twice")));
            }
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(Error::Config(format!("class `{c}` listed twice")));
            }
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if self.pairs[..i].contains(pair) {
                return Err(Error::Config(format!("pair {pair:?} listed twice")));
            }
        }
        self.solver.validate()?;
        self.refine
            .validate()
            .map_err(|e| Error::Config(format!("refine settings: {e}")))?;
        Ok(())
    }

    /// Relaxations in canonical order (Shor, DiagSum, Hadamard, Kron).
    pub fn ordered_relaxations(&self) -> Vec<Relaxation> {
        Relaxation::ALL
            .into_iter()
            .filter(|r| self.relaxations.contains(r))
            .collect()
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_stops_at_nine() {
        let cfg = BenchConfig::default();
        assert_eq!(
            cfg.pairs,
            vec![(6, 2), (6, 3), (6, 5), (9, 2), (9, 5), (9, 8)]
        );
        assert_eq!(BenchConfig::full_scale().pairs.len(), 9);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = BenchConfig {
            pairs: vec![(4, 2)],
            instances_per_cell: 3,
            ..BenchConfig::default()
        };
        let back = BenchConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg =
            BenchConfig::from_toml_str("pairs = [[5, 1]]\nclasses = [\"penrose\"]\n").unwrap();
        assert_eq!(cfg.instances_per_cell, 50);
        assert_eq!(cfg.classes, vec![ProblemClass::Penrose]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "instances_per_cell = 0",
            "pairs = [[2, 3]]",
            "relaxations = [\"shor\", \"shor\"]",
            "relaxations = [\"lovasz\"]",
            "unknown_key = 1",
            "[refine]\nbacktracking = 2.0",
        ] {
            assert!(
                matches!(BenchConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}

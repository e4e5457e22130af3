//! Reproducible experiments: density sweeps, threshold bisection and
//! solution-geometry studies.
//!
//! Every random draw descends from a master seed through [`mix_seed`], so
//! results depend only on the configuration, never on thread scheduling.

mod geometry_exp;
mod plot_data;
mod stats;
mod sweep;
mod threshold;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{decide_with_limit, Decision};
use crate::model::{constraints_for_density, ConfigError, Instance, ProblemKind};
use crate::solvers::{bp_decimation, greedy_color, unit_clause_solve, DecimationParams, SolverError, SolverOutcome};

pub use geometry_exp::{
    geometry_experiment, write_geometry_csv, write_geometry_json, FrozenMedian, GeometryConfig, GeometryPoint, GeometrySummary,
    InstanceGeometry,
};
pub use plot_data::{plot_data, read_sweep_csv, write_plot_csv, PlotDataError, PlotPoint};
pub use stats::{median, wilson_interval, WILSON_Z};
pub use sweep::{monotonicity_warnings, sweep, write_sweep_csv, write_sweep_json, SweepConfig, SweepRow, SWEEP_COLUMNS};
pub use threshold::{threshold_bisect, Evaluation, ThresholdConfig, ThresholdEstimate, ThresholdOutcome};

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `point`.
pub fn mix_seed(master: u64, point: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ point) ^ trial)
}

/// Seed of a solver's random choices, distinct from the instance seed it accompanies.
pub fn solver_seed(trial_seed: u64, solver: Solver) -> u64 {
    splitmix64(trial_seed ^ solver.salt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Oracle,
    UnitClause,
    GreedyColor,
    BpDecimation,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Oracle, Solver::UnitClause, Solver::GreedyColor, Solver::BpDecimation];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Oracle => "oracle",
            Solver::UnitClause => "unit-clause",
            Solver::GreedyColor => "greedy-color",
            Solver::BpDecimation => "bp-decimation",
        }
    }

    pub fn supports(self, kind: ProblemKind) -> bool {
        match self {
            Solver::Oracle | Solver::BpDecimation => true,
            Solver::UnitClause => kind == ProblemKind::KSat,
            Solver::GreedyColor => kind == ProblemKind::KColoring,
        }
    }

    fn salt(self) -> u64 {
        match self {
            Solver::Oracle => 0x6f72_6163_6c65,
            Solver::UnitClause => 0x756e_6974,
            Solver::GreedyColor => 0x6772_6565_6479,
            Solver::BpDecimation => 0x62_7064_6563,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown solver `{s}` (expected oracle, unit-clause, greedy-color or bp-decimation)"))
    }
}

/// Parameters shared by every solver invocation of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub decimation: DecimationParams,
    /// Search-node budget of the complete solver.
    pub oracle_budget: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { decimation: DecimationParams::default(), oracle_budget: crate::exact::DEFAULT_NODE_LIMIT }
    }
}

/// Result of one solver run on one instance.
#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Oracle(Decision),
    Local(SolverOutcome),
}

impl RunResult {
    /// A satisfying assignment was produced.
    pub fn succeeded(&self) -> bool {
        match self {
            RunResult::Oracle(d) => d.is_sat(),
            RunResult::Local(o) => o.is_success(),
        }
    }

    pub fn budget_exceeded(&self) -> bool {
        matches!(self, RunResult::Oracle(Decision::Budget))
    }
}

/// Runs `solver` on `inst`, drawing its random choices from `seed`.
pub fn run_solver(inst: &Instance, solver: Solver, settings: &SolverSettings, seed: u64) -> Result<RunResult, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match solver {
        Solver::Oracle => Ok(RunResult::Oracle(decide_with_limit(inst, settings.oracle_budget).0)),
        Solver::UnitClause => {
            let f = inst.as_formula().ok_or(SolverError::WrongKind { solver: "unit-clause", expected: "k-SAT" })?;
            unit_clause_solve(f, &mut rng).map(RunResult::Local)
        }
        Solver::GreedyColor => {
            let c = inst.as_coloring().ok_or(SolverError::WrongKind { solver: "greedy-color", expected: "coloring" })?;
            greedy_color(c.graph(), c.palette(), &mut rng).map(RunResult::Local)
        }
        Solver::BpDecimation => bp_decimation(inst, &settings.decimation, &mut rng).map(RunResult::Local),
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Density values or explicit constraint counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Grid {
    Densities(Vec<f64>),
    Counts(Vec<usize>),
}

/// One (n, m) point of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Position in the expanded grid; keys the point's seeds.
    pub index: u64,
    pub n: usize,
    pub m: usize,
    pub r: f64,
}

/// Expands `ns × grid` in order, dropping densities that round to an `m`
/// already present for the same `n`.
pub fn grid_points(ns: &[usize], grid: &Grid) -> Result<Vec<GridPoint>, HarnessError> {
    let mut out = Vec::new();
    for &n in ns {
        if n == 0 {
            return Err(HarnessError::Invalid("n must be positive".into()));
        }
        let ms: Vec<usize> = match grid {
            Grid::Densities(rs) => rs.iter().map(|&r| constraints_for_density(r, n)).collect::<Result<_, _>>()?,
            Grid::Counts(ms) => ms.clone(),
        };
        let mut seen = std::collections::HashSet::new();
        for m in ms {
            if seen.insert(m) {
                out.push(GridPoint { index: out.len() as u64, n, m, r: m as f64 / n as f64 });
            }
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Invalid("empty grid".into()));
    }
    Ok(out)
}

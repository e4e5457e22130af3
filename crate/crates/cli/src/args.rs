use std::path::PathBuf;

use clap::{Args, ValueEnum};
use randcsp::exact::{DEFAULT_NODE_LIMIT, DEFAULT_SOLUTION_CAP};
use randcsp::geometry::DEFAULT_FROZEN_SAMPLE;
use randcsp::harness::{Grid, Solver, SolverSettings};
use randcsp::model::{ConstraintModel, ProblemKind};
use randcsp::solvers::{CyclePolicy, DecimationParams, MarginalMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Problem family.
    #[arg(long, default_value = "ksat", value_name = "ksat|knae|kcol")]
    pub problem: ProblemKind,
    /// Clause width, or palette size for kcol.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Constraint model.
    #[arg(long, default_value = "iid", value_name = "iid|distinct")]
    pub model: ConstraintModel,
}

/// A single instance, read from a file or generated.
#[derive(Args, Debug, Clone)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Read the instance from a DIMACS file instead of generating it.
    #[arg(long = "in", value_name = "PATH", conflicts_with_all = ["n", "r", "m"])]
    pub input: Option<PathBuf>,
    #[arg(long, required_unless_present = "input")]
    pub n: Option<usize>,
    /// Density; m = round(r n).
    #[arg(long, conflicts_with = "m", required_unless_present_any = ["input", "m"])]
    pub r: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarginalsArg {
    Auto,
    Bp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnCycleArg {
    Proceed,
    GiveUp,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Neighborhood radius of bp-decimation, in factor-graph hops.
    #[arg(long)]
    pub omega: Option<usize>,
    /// Largest neighborhood (free variables) marginalized by enumeration.
    #[arg(long)]
    pub exact_cap: Option<usize>,
    /// Weight kept from the previous message on cyclic neighborhoods.
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub bp_tolerance: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long, value_enum)]
    pub marginals: Option<MarginalsArg>,
    /// Behaviour on cyclic neighborhoods too large to enumerate.
    #[arg(long, value_enum)]
    pub on_cycle: Option<OnCycleArg>,
    /// Recompute every marginal in every round.
    #[arg(long)]
    pub full_recompute: bool,
    /// Search-node budget of the oracle.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    pub budget: u64,
}

impl SolverArgs {
    pub fn settings(&self) -> SolverSettings {
        let d = DecimationParams::default();
        let decimation = DecimationParams {
            omega: self.omega.unwrap_or(d.omega),
            exact_cap: self.exact_cap.unwrap_or(d.exact_cap),
            bp: randcsp::solvers::BpParams {
                damping: self.damping.unwrap_or(d.bp.damping),
                tolerance: self.bp_tolerance.unwrap_or(d.bp.tolerance),
                max_sweeps: self.max_sweeps.unwrap_or(d.bp.max_sweeps),
            },
            method: match self.marginals {
                Some(MarginalsArg::Bp) => MarginalMethod::Bp,
                Some(MarginalsArg::Auto) | None => d.method,
            },
            on_cycle: match self.on_cycle {
                Some(OnCycleArg::GiveUp) => CyclePolicy::GiveUp,
                Some(OnCycleArg::Proceed) | None => d.on_cycle,
            },
            incremental: !self.full_recompute,
            parallel: d.parallel,
        };
        SolverSettings { decimation, oracle_budget: self.budget }
    }
}

/// Densities or constraint counts, crossed with one or more `n`.
#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Densities, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "m", required_unless_present = "m")]
    pub r: Vec<f64>,
    /// Constraint counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
}

impl GridArgs {
    pub fn grid(&self) -> Grid {
        if self.m.is_empty() {
            Grid::Densities(self.r.clone())
        } else {
            Grid::Counts(self.m.clone())
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value = "bp-decimation", value_name = "unit-clause|greedy-color|bp-decimation|oracle")]
    pub solver: Solver,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DecideArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Search-node budget.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    pub budget: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Stop after this many solutions.
    #[arg(long, default_value_t = DEFAULT_SOLUTION_CAP)]
    pub cap: usize,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Text export by default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Analyse one DIMACS file instead of running the experiment.
    #[arg(long = "in", value_name = "PATH", conflicts_with_all = ["n", "r", "m"])]
    pub input: Option<PathBuf>,
    #[arg(long, required_unless_present = "input")]
    pub n: Option<usize>,
    /// Densities, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "m")]
    pub r: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Frozen-variable distance fractions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub delta: Vec<f64>,
    /// Solvable instances per density.
    #[arg(long, default_value_t = 30)]
    pub instances: usize,
    /// Attempts per density; defaults to 20 times `--instances`.
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solution cap for enumeration.
    #[arg(long, default_value_t = DEFAULT_SOLUTION_CAP)]
    pub cap: usize,
    /// Reference solutions sampled for frozen-variable profiles.
    #[arg(long, default_value_t = DEFAULT_FROZEN_SAMPLE)]
    pub frozen_sample: usize,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the full JSON report here.
    #[arg(long, value_name = "PATH")]
    pub json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, conflicts_with = "m", required_unless_present = "m")]
    pub r: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solvers, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "oracle")]
    pub solver: Vec<Solver>,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Record wall time per row (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// One estimate per value, comma separated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub target: f64,
    /// Stop when the density bracket is at most this wide.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    /// Lower bracket end; default 0.
    #[arg(long)]
    pub lo: Option<f64>,
    /// Upper bracket end; default twice the first-moment density bound.
    #[arg(long)]
    pub hi: Option<f64>,
    /// Search-node budget of the oracle.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    pub budget: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct PlotDataArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value = "r")]
    pub x: String,
    #[arg(long, default_value = "sat_rate")]
    pub y: String,
    /// Grouping columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub group: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

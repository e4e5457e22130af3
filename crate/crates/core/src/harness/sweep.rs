use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grid_points, mix_seed, run_solver, solver_seed, Grid, HarnessError, Solver, SolverSettings};
use crate::model::{gen_instance, ConstraintModel, GeneratorConfig, ProblemKind};

/// A density sweep: every `n` crossed with every grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: ProblemKind,
    pub k: usize,
    pub ns: Vec<usize>,
    pub grid: Grid,
    pub trials: usize,
    pub master_seed: u64,
    /// Run in this order; duplicates are ignored.
    pub solvers: Vec<Solver>,
    pub settings: SolverSettings,
    pub model: ConstraintModel,
    /// Record solver wall time; otherwise `wall_ms` is 0 and output is reproducible byte for byte.
    pub timing: bool,
}

impl SweepConfig {
    pub fn new(kind: ProblemKind, k: usize, ns: Vec<usize>, grid: Grid, trials: usize, master_seed: u64) -> Self {
        SweepConfig {
            kind,
            k,
            ns,
            grid,
            trials,
            master_seed,
            solvers: vec![Solver::Oracle],
            settings: SolverSettings::default(),
            model: ConstraintModel::Iid,
            timing: false,
        }
    }

    pub fn solvers(mut self, solvers: Vec<Solver>) -> Self {
        self.solvers = solvers;
        self
    }

    fn distinct_solvers(&self) -> Vec<Solver> {
        let mut out: Vec<Solver> = Vec::new();
        for &s in &self.solvers {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 14] = [
    "kind",
    "k",
    "n",
    "m",
    "r",
    "trials",
    "master_seed",
    "sat_count",
    "sat_rate",
    "solver",
    "success_count",
    "success_rate",
    "budget_exceeded_count",
    "wall_ms",
];

/// One (point, solver) row.
///
/// `sat_count`, `sat_rate` and `budget_exceeded_count` describe the oracle
/// at the point and are repeated on every solver's row; the first two are
/// empty when the oracle was not run. Trials that hit the oracle budget
/// count as not satisfiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: ProblemKind,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub sat_count: Option<usize>,
    pub sat_rate: Option<f64>,
    pub solver: Solver,
    pub success_count: usize,
    pub success_rate: f64,
    pub budget_exceeded_count: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    success: usize,
    budget: usize,
    ms: f64,
}

pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::Invalid("trials must be at least 1".into()));
    }
    let solvers = cfg.distinct_solvers();
    if solvers.is_empty() {
        return Err(HarnessError::Invalid("no solver selected".into()));
    }
    if let Some(s) = solvers.iter().find(|s| !s.supports(cfg.kind)) {
        return Err(HarnessError::Invalid(format!("{s} does not apply to {}", cfg.kind)));
    }
    let points = grid_points(&cfg.ns, &cfg.grid)?;
    for p in &points {
        GeneratorConfig::new(cfg.kind, p.n, cfg.k, p.m, 0).model(cfg.model).validate()?;
    }

    let tasks: Vec<(usize, u64)> =
        (0..points.len()).flat_map(|p| (0..cfg.trials as u64).map(move |t| (p, t))).collect();
    let outcomes: Vec<Vec<Tally>> = tasks
        .par_iter()
        .map(|&(p, t)| {
            let point = &points[p];
            let seed = mix_seed(cfg.master_seed, point.index, t);
            let inst = gen_instance(&GeneratorConfig::new(cfg.kind, point.n, cfg.k, point.m, seed).model(cfg.model))?;
            solvers
                .iter()
                .map(|&s| {
                    let start = cfg.timing.then(Instant::now);
                    let run = run_solver(&inst, s, &cfg.settings, solver_seed(seed, s))?;
                    Ok(Tally {
                        success: run.succeeded() as usize,
                        budget: run.budget_exceeded() as usize,
                        ms: start.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3),
                    })
                })
                .collect()
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rows = Vec::with_capacity(points.len() * solvers.len());
    for (p, point) in points.iter().enumerate() {
        let mut totals = vec![Tally::default(); solvers.len()];
        for trial in &outcomes[p * cfg.trials..(p + 1) * cfg.trials] {
            for (acc, t) in totals.iter_mut().zip(trial) {
                acc.success += t.success;
                acc.budget += t.budget;
                acc.ms += t.ms;
            }
        }
        let oracle = solvers.iter().position(|&s| s == Solver::Oracle).map(|i| totals[i]);
        let rate = |c: usize| c as f64 / cfg.trials as f64;
        for (&solver, total) in solvers.iter().zip(&totals) {
            rows.push(SweepRow {
                kind: cfg.kind,
                k: cfg.k,
                n: point.n,
                m: point.m,
                r: point.r,
                trials: cfg.trials,
                master_seed: cfg.master_seed,
                sat_count: oracle.map(|o| o.success),
                sat_rate: oracle.map(|o| rate(o.success)),
                solver,
                success_count: total.success,
                success_rate: rate(total.success),
                budget_exceeded_count: oracle.map_or(0, |o| o.budget),
                wall_ms: if cfg.timing { (total.ms * 1e3).round() / 1e3 } else { 0.0 },
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(SWEEP_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_json<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}

/// Places where a rate rises along the density grid by more than three
/// pooled standard errors, checked on consecutive points of each
/// `(n, solver)` series. Oracle series use `sat_rate`, others `success_rate`.
pub fn monotonicity_warnings(rows: &[SweepRow]) -> Vec<String> {
    let mut series: Vec<((usize, Solver), Vec<&SweepRow>)> = Vec::new();
    for row in rows {
        let key = (row.n, row.solver);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row),
            None => series.push((key, vec![row])),
        }
    }
    let mut out = Vec::new();
    for ((n, solver), mut pts) in series {
        pts.sort_by_key(|r| r.m);
        for pair in pts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mut check = |name: &str, ca: usize, cb: usize| {
                let (pa, pb) = (ca as f64 / a.trials as f64, cb as f64 / b.trials as f64);
                let pooled = (ca + cb) as f64 / (a.trials + b.trials) as f64;
                let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
                if pb - pa > 3.0 * se {
                    out.push(format!("n={n} {solver}: {name} rises from {pa:.3} at m={} to {pb:.3} at m={}", a.m, b.m));
                }
            };
            match (solver, a.sat_count, b.sat_count) {
                (Solver::Oracle, Some(ca), Some(cb)) => check("sat_rate", ca, cb),
                _ => check("success_rate", a.success_count, b.success_count),
            }
        }
    }
    out
}

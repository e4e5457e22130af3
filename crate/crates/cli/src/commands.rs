use std::fs;
use std::io::Write as _;

use anyhow::{bail, Context, Result};
use randcsp::exact::{decide_with_limit, enumerate_solutions, format_solution, DecisionReport};
use randcsp::geometry::GeometryReport;
use randcsp::harness::{
    self, geometry_experiment, monotonicity_warnings, run_solver, solver_seed, threshold_bisect, write_geometry_csv,
    write_geometry_json, write_plot_csv, write_sweep_csv, write_sweep_json, GeometryConfig, Grid, RunResult, Solver,
    SweepConfig, ThresholdConfig, ThresholdOutcome,
};
use randcsp::model::{constraints_for_density, gen_instance, parse_dimacs, write_dimacs, GeneratorConfig, Instance};
use randcsp::moments::{algorithmic_density, MomentReport};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::output;

fn load_instance(a: &InstanceArgs) -> Result<Instance> {
    if let Some(path) = &a.input {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        return parse_dimacs(&text).with_context(|| format!("{}", path.display()));
    }
    let n = a.n.expect("clap requires --n");
    let m = match (a.m, a.r) {
        (Some(m), _) => m,
        (None, Some(r)) => constraints_for_density(r, n)?,
        (None, None) => unreachable!("clap requires --r or --m"),
    };
    let p = &a.problem;
    Ok(gen_instance(&GeneratorConfig::new(p.problem, n, p.k, m, a.seed).model(p.model))?)
}

pub fn gen(a: GenArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let mut out = output::open(a.out.as_deref())?;
    out.write_all(write_dimacs(&inst).as_bytes())?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SolveReport {
    kind: String,
    n: usize,
    m: usize,
    k: usize,
    solver: Solver,
    seed: u64,
    status: &'static str,
    steps: usize,
    failure: Option<String>,
    assignment: Option<String>,
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    if !a.solver.supports(inst.kind()) {
        bail!("{} does not apply to {}", a.solver, inst.kind());
    }
    let seed = a.instance.seed;
    let run = run_solver(&inst, a.solver, &a.solver_args.settings(), solver_seed(seed, a.solver))?;
    let show = |s| format_solution(inst.kind(), inst.k(), s);
    let (steps, failure, assignment) = match &run {
        RunResult::Oracle(d) => match d {
            randcsp::exact::Decision::Sat(s) => (inst.n(), None, Some(show(s))),
            other => (0, Some(other.label().to_lowercase()), None),
        },
        RunResult::Local(o) => (o.trace.steps(), o.trace.failure.as_ref().map(|f| f.to_string()), o.assignment.as_ref().map(show)),
    };
    let report = SolveReport {
        kind: inst.kind().to_string(),
        n: inst.n(),
        m: inst.m(),
        k: inst.k(),
        solver: a.solver,
        seed,
        status: if run.succeeded() { "success" } else { "failure" },
        steps,
        failure,
        assignment,
    };
    emit_one(&report, &a.output, Format::Json)
}

pub fn decide(a: DecideArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let (decision, stats) = decide_with_limit(&inst, a.budget);
    emit_one(&DecisionReport::new(&inst, &decision, stats), &a.output, Format::Json)
}

pub fn enumerate(a: EnumerateArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let set = enumerate_solutions(&inst, a.cap);
    let mut out = output::open(a.out.as_deref())?;
    let lines: Vec<String> = set.solutions.iter().map(|s| format_solution(set.kind, set.k, s)).collect();
    match a.format {
        None => out.write_all(set.to_text().as_bytes())?,
        Some(Format::Json) => output::json(
            &json!({
                "kind": set.kind, "n": set.n, "k": set.k, "count": set.len(),
                "exhaustive": set.exhaustive, "cap": set.cap, "solutions": lines,
            }),
            &mut out,
        )?,
        Some(Format::Csv) => {
            writeln!(out, "solution")?;
            for l in &lines {
                writeln!(out, "{l}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn geometry(a: GeometryArgs) -> Result<()> {
    if let Some(path) = &a.input {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let inst = parse_dimacs(&text).with_context(|| format!("{}", path.display()))?;
        return geometry_single(&inst, &a);
    }
    let grid = match (a.r.is_empty(), a.m.is_empty()) {
        (false, _) => Grid::Densities(a.r.clone()),
        (true, false) => Grid::Counts(a.m.clone()),
        (true, true) => bail!("the geometry experiment needs --r or --m"),
    };
    let p = &a.problem;
    let mut cfg = GeometryConfig::new(p.problem, p.k, a.n.expect("clap requires --n"), grid, a.instances, a.seed);
    cfg.max_attempts = a.max_attempts.unwrap_or(cfg.max_attempts);
    cfg.deltas = a.delta.clone();
    cfg.solution_cap = a.cap;
    cfg.frozen_sample = a.frozen_sample;
    cfg.model = p.model;
    let summary = geometry_experiment(&cfg)?;
    let mut out = output::open(a.output.out.as_deref())?;
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => write_geometry_csv(&summary, &mut out)?,
        Format::Json => write_geometry_json(&summary, &mut out)?,
    }
    out.flush()?;
    if let Some(path) = &a.json_out {
        let mut extra = output::open(Some(path))?;
        write_geometry_json(&summary, &mut extra)?;
        extra.flush()?;
    }
    Ok(())
}

fn geometry_single(inst: &Instance, a: &GeometryArgs) -> Result<()> {
    let set = enumerate_solutions(inst, a.cap);
    let status = if !set.exhaustive {
        "cap-overflow"
    } else if set.is_empty() {
        "unsat"
    } else {
        "ok"
    };
    let report = match status {
        "ok" => Some(GeometryReport::compute(&set, &a.delta, a.frozen_sample, a.seed)?),
        _ => None,
    };
    let mut out = output::open(a.output.out.as_deref())?;
    match a.output.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&json!({ "status": status, "report": report }), &mut out)?,
        Format::Csv => {
            let mut row = serde_json::Map::new();
            row.insert("status".into(), json!(status));
            row.insert("solution_count".into(), json!(set.len()));
            row.insert("components".into(), json!(report.as_ref().map(|r| r.components)));
            row.insert("dominant_fraction".into(), json!(report.as_ref().map(|r| r.dominant_fraction)));
            row.insert("separation".into(), json!(report.as_ref().and_then(|r| r.separation)));
            row.insert("essentially_connected".into(), json!(report.as_ref().map(|r| r.essentially_connected)));
            for (i, d) in a.delta.iter().enumerate() {
                row.insert(format!("frozen_{d}"), json!(report.as_ref().map(|r| r.frozen[i].fraction)));
            }
            output::csv_rows(&[row], &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BoundsReport {
    #[serde(flatten)]
    moments: MomentReport,
    r: f64,
    algorithmic_density: f64,
}

pub fn bounds(a: BoundsArgs) -> Result<()> {
    let m = match (a.m, a.r) {
        (Some(m), _) => m,
        (None, Some(r)) => constraints_for_density(r, a.n)?,
        (None, None) => unreachable!("clap requires --r or --m"),
    };
    let p = &a.problem;
    let cfg = GeneratorConfig::new(p.problem, a.n, p.k, m, 0).model(p.model);
    cfg.validate()?;
    let moments = MomentReport::for_config(&cfg)
        .with_context(|| "no closed form for this configuration; `sweep` with the oracle gives a Monte Carlo estimate")?;
    let report = BoundsReport { moments, r: m as f64 / a.n as f64, algorithmic_density: algorithmic_density(p.problem, p.k) };
    emit_one(&report, &a.output, Format::Json)
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let p = &a.problem;
    let mut cfg = SweepConfig::new(p.problem, p.k, a.grid.n.clone(), a.grid.grid(), a.trials, a.seed).solvers(a.solver.clone());
    cfg.settings = a.solver_args.settings();
    cfg.model = p.model;
    cfg.timing = a.timing;
    let rows = harness::sweep(&cfg)?;
    for w in monotonicity_warnings(&rows) {
        eprintln!("warning: {w}");
    }
    let mut out = output::open(a.output.out.as_deref())?;
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => write_sweep_csv(&rows, &mut out)?,
        Format::Json => write_sweep_json(&rows, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub fn threshold(a: ThresholdArgs) -> Result<()> {
    let p = &a.problem;
    let mut results = Vec::new();
    for &n in &a.n {
        let mut cfg = ThresholdConfig::new(p.problem, p.k, n, a.trials, a.seed);
        cfg.target = a.target;
        cfg.tolerance = a.tol;
        cfg.model = p.model;
        cfg.settings.oracle_budget = a.budget;
        let (lo, hi) = cfg.bracket();
        cfg.bracket = Some((a.lo.unwrap_or(lo), a.hi.unwrap_or(hi)));
        results.push((n, threshold_bisect(&cfg)?));
    }
    let mut out = output::open(a.output.out.as_deref())?;
    match a.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let items: Vec<_> = results.iter().map(|(n, o)| json!({ "kind": p.problem, "k": p.k, "n": n, "outcome": o })).collect();
            output::json(&items, &mut out)?
        }
        Format::Csv => {
            let rows: Vec<_> = results
                .iter()
                .map(|(n, o)| {
                    let e = o.estimate();
                    let (lo, hi) = match o {
                        ThresholdOutcome::NoBracket { lo, hi } => (Some(lo.sat_rate), Some(hi.sat_rate)),
                        ThresholdOutcome::Estimate(_) => (None, None),
                    };
                    json!({
                        "kind": p.problem,
                        "k": p.k,
                        "n": n,
                        "trials": a.trials,
                        "master_seed": a.seed,
                        "target": a.target,
                        "result": if e.is_some() { "estimate" } else { "no-bracket" },
                        "r_hat": e.map(|e| e.r_hat),
                        "bracket_half_width": e.map(|e| e.bracket_half_width),
                        "r_lo": e.map(|e| e.r_lo),
                        "r_hi": e.map(|e| e.r_hi),
                        "final_m": e.map(|e| e.final_point.m),
                        "final_sat_rate": e.map(|e| e.final_point.sat_rate),
                        "rate_half_width": e.map(|e| e.rate_half_width),
                        "evaluations": e.map(|e| e.evaluations.len()),
                        "lo_sat_rate": lo,
                        "hi_sat_rate": hi,
                    })
                })
                .collect();
            output::csv_rows(&rows, &mut out)?
        }
    }
    out.flush()?;
    Ok(())
}

pub fn plot_data(a: PlotDataArgs) -> Result<()> {
    let file = fs::File::open(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let points = harness::plot_data(file, &a.x, &a.y, &a.group)?;
    let mut out = output::open(a.output.out.as_deref())?;
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => write_plot_csv(&points, &mut out)?,
        Format::Json => output::json(&points, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn emit_one<T: Serialize>(value: &T, o: &OutputArgs, default: Format) -> Result<()> {
    let mut out = output::open(o.out.as_deref())?;
    match o.format.unwrap_or(default) {
        Format::Json => output::json(value, &mut out)?,
        Format::Csv => output::csv_rows(std::slice::from_ref(value), &mut out)?,
    }
    out.flush()?;
    Ok(())
}

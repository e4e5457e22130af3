use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{grid_points, median, mix_seed, splitmix64, Grid, HarnessError};
use crate::exact::{enumerate_solutions, DEFAULT_SOLUTION_CAP};
use crate::geometry::{GeometryReport, DEFAULT_FROZEN_SAMPLE, MAX_GEOMETRY_VARS};
use crate::model::{gen_instance, ConstraintModel, GeneratorConfig, ProblemKind};

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub kind: ProblemKind,
    pub k: usize,
    pub n: usize,
    pub grid: Grid,
    /// Solvable instances analysed per point.
    pub instances: usize,
    /// Instances drawn per point before giving up on reaching `instances`.
    pub max_attempts: usize,
    pub master_seed: u64,
    pub deltas: Vec<f64>,
    pub solution_cap: usize,
    pub frozen_sample: usize,
    pub model: ConstraintModel,
}

impl GeometryConfig {
    pub fn new(kind: ProblemKind, k: usize, n: usize, grid: Grid, instances: usize, master_seed: u64) -> Self {
        GeometryConfig {
            kind,
            k,
            n,
            grid,
            instances,
            max_attempts: instances.saturating_mul(20),
            master_seed,
            deltas: vec![0.2],
            solution_cap: DEFAULT_SOLUTION_CAP,
            frozen_sample: DEFAULT_FROZEN_SAMPLE,
            model: ConstraintModel::Iid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceGeometry {
    pub attempt: usize,
    pub seed: u64,
    pub report: GeometryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrozenMedian {
    pub delta: f64,
    pub median_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryPoint {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub attempts: usize,
    /// Instances analysed; excludes unsatisfiable and over-cap ones.
    pub solvable: usize,
    pub unsat: usize,
    pub cap_overflow: usize,
    pub median_solutions: Option<f64>,
    pub median_components: Option<f64>,
    pub median_dominant_fraction: Option<f64>,
    /// Share of analysed instances whose largest component dominates.
    pub connected_fraction: Option<f64>,
    pub frozen: Vec<FrozenMedian>,
    pub instances: Vec<InstanceGeometry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySummary {
    pub kind: ProblemKind,
    pub k: usize,
    pub n: usize,
    pub master_seed: u64,
    pub deltas: Vec<f64>,
    pub solution_cap: usize,
    pub points: Vec<GeometryPoint>,
}

enum Attempt {
    Unsat,
    Overflow,
    Solved(GeometryReport),
}

/// Per density point, draws instances until `instances` of them have a
/// nonempty, fully enumerated solution set, and summarizes their geometry.
///
/// Attempt `a` at grid point `p` uses seed `mix_seed(master_seed, p, a)`.
/// Attempts run in parallel batches but are consumed in order, so the
/// analysed instances are the first solvable ones by attempt index.
pub fn geometry_experiment(cfg: &GeometryConfig) -> Result<GeometrySummary, HarnessError> {
    if cfg.n > MAX_GEOMETRY_VARS {
        return Err(HarnessError::Invalid(format!("geometry needs n <= {MAX_GEOMETRY_VARS}, got {}", cfg.n)));
    }
    if cfg.instances == 0 || cfg.max_attempts < cfg.instances {
        return Err(HarnessError::Invalid("need 1 <= instances <= max_attempts".into()));
    }
    if let Some(d) = cfg.deltas.iter().find(|d| !(d.is_finite() && **d > 0.0 && **d <= 1.0)) {
        return Err(HarnessError::Invalid(format!("delta {d} must lie in (0, 1]")));
    }
    let points = grid_points(&[cfg.n], &cfg.grid)?;
    for p in &points {
        GeneratorConfig::new(cfg.kind, p.n, cfg.k, p.m, 0).model(cfg.model).validate()?;
    }

    let mut out = Vec::with_capacity(points.len());
    for point in &points {
        let mut analysed = Vec::new();
        let (mut unsat, mut overflow, mut attempts) = (0, 0, 0);
        while analysed.len() < cfg.instances && attempts < cfg.max_attempts {
            let batch = (cfg.instances - analysed.len()).max(rayon::current_num_threads()).min(cfg.max_attempts - attempts);
            let results: Vec<(usize, u64, Attempt)> = (attempts..attempts + batch)
                .into_par_iter()
                .map(|a| {
                    let seed = mix_seed(cfg.master_seed, point.index, a as u64);
                    let inst = gen_instance(&GeneratorConfig::new(cfg.kind, cfg.n, cfg.k, point.m, seed).model(cfg.model))?;
                    let set = enumerate_solutions(&inst, cfg.solution_cap);
                    let result = if !set.exhaustive {
                        Attempt::Overflow
                    } else if set.is_empty() {
                        Attempt::Unsat
                    } else {
                        let report = GeometryReport::compute(&set, &cfg.deltas, cfg.frozen_sample, splitmix64(seed))
                            .map_err(|e| HarnessError::Invalid(e.to_string()))?;
                        Attempt::Solved(report)
                    };
                    Ok((a, seed, result))
                })
                .collect::<Result<_, HarnessError>>()?;
            for (attempt, seed, result) in results {
                if analysed.len() == cfg.instances {
                    break;
                }
                attempts = attempt + 1;
                match result {
                    Attempt::Unsat => unsat += 1,
                    Attempt::Overflow => overflow += 1,
                    Attempt::Solved(report) => analysed.push(InstanceGeometry { attempt, seed, report }),
                }
            }
        }
        out.push(summarize(point.n, point.m, point.r, attempts, unsat, overflow, &cfg.deltas, analysed));
    }
    Ok(GeometrySummary {
        kind: cfg.kind,
        k: cfg.k,
        n: cfg.n,
        master_seed: cfg.master_seed,
        deltas: cfg.deltas.clone(),
        solution_cap: cfg.solution_cap,
        points: out,
    })
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    n: usize,
    m: usize,
    r: f64,
    attempts: usize,
    unsat: usize,
    cap_overflow: usize,
    deltas: &[f64],
    instances: Vec<InstanceGeometry>,
) -> GeometryPoint {
    let stat = |f: &dyn Fn(&GeometryReport) -> f64| median(&instances.iter().map(|i| f(&i.report)).collect::<Vec<_>>());
    let connected = instances.iter().filter(|i| i.report.essentially_connected).count();
    GeometryPoint {
        n,
        m,
        r,
        attempts,
        solvable: instances.len(),
        unsat,
        cap_overflow,
        median_solutions: stat(&|g| g.solution_count as f64),
        median_components: stat(&|g| g.components as f64),
        median_dominant_fraction: stat(&|g| g.dominant_fraction),
        connected_fraction: (!instances.is_empty()).then(|| connected as f64 / instances.len() as f64),
        frozen: deltas
            .iter()
            .enumerate()
            .map(|(i, &delta)| FrozenMedian { delta, median_fraction: stat(&|g| g.frozen[i].fraction) })
            .collect(),
        instances,
    }
}

pub fn write_geometry_json<W: Write>(summary: &GeometrySummary, mut out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    Ok(())
}

/// One row per density point; one `median_frozen_<delta>` column per delta.
pub fn write_geometry_csv<W: Write>(summary: &GeometrySummary, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "kind",
        "k",
        "n",
        "m",
        "r",
        "master_seed",
        "attempts",
        "solvable",
        "unsat",
        "cap_overflow",
        "median_solutions",
        "median_components",
        "median_dominant_fraction",
        "connected_fraction",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(summary.deltas.iter().map(|d| format!("median_frozen_{d}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for p in &summary.points {
        let mut rec = vec![
            summary.kind.tag().to_string(),
            summary.k.to_string(),
            p.n.to_string(),
            p.m.to_string(),
            p.r.to_string(),
            summary.master_seed.to_string(),
            p.attempts.to_string(),
            p.solvable.to_string(),
            p.unsat.to_string(),
            p.cap_overflow.to_string(),
            opt(p.median_solutions),
            opt(p.median_components),
            opt(p.median_dominant_fraction),
            opt(p.connected_fraction),
        ];
        rec.extend(p.frozen.iter().map(|f| opt(f.median_fraction)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_instances_form_one_unfrozen_component() {
        let mut cfg = GeometryConfig::new(ProblemKind::KNae, 3, 8, Grid::Densities(vec![0.0]), 3, 1);
        cfg.deltas = vec![0.2, 0.5];
        let s = geometry_experiment(&cfg).unwrap();
        let p = &s.points[0];
        assert_eq!((p.solvable, p.unsat, p.cap_overflow, p.attempts), (3, 0, 0, 3));
        assert_eq!(p.median_components, Some(1.0));
        assert_eq!(p.median_solutions, Some(256.0));
        assert!(p.frozen.iter().all(|f| f.median_fraction == Some(0.0)));
    }

    #[test]
    fn unsat_and_overflow_are_counted_and_skipped() {
        let mut cfg = GeometryConfig::new(ProblemKind::KColoring, 2, 6, Grid::Counts(vec![12]), 2, 3);
        cfg.max_attempts = 10;
        let s = geometry_experiment(&cfg).unwrap();
        let p = &s.points[0];
        assert_eq!(p.unsat + p.solvable, p.attempts);
        assert!(p.unsat > 0);

        let mut cfg = GeometryConfig::new(ProblemKind::KSat, 3, 10, Grid::Counts(vec![0]), 2, 3);
        cfg.solution_cap = 100;
        cfg.max_attempts = 4;
        let p = &geometry_experiment(&cfg).unwrap().points[0];
        assert_eq!((p.cap_overflow, p.solvable, p.median_components), (4, 0, None));
    }

    #[test]
    fn output_is_reproducible() {
        let cfg = GeometryConfig::new(ProblemKind::KNae, 3, 10, Grid::Densities(vec![0.5, 1.5]), 4, 9);
        let a = geometry_experiment(&cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| geometry_experiment(&cfg).unwrap());
        assert_eq!(a, b);
        let mut csv_bytes = Vec::new();
        write_geometry_csv(&a, &mut csv_bytes).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        assert!(text.lines().next().unwrap().ends_with("connected_fraction,median_frozen_0.2"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn rejects_oversized_n() {
        let cfg = GeometryConfig::new(ProblemKind::KSat, 3, 200, Grid::Counts(vec![1]), 1, 0);
        assert!(geometry_experiment(&cfg).is_err());
    }
}

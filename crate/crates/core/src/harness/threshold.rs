use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{mix_seed, run_solver, solver_seed, stats::wilson_interval, HarnessError, Solver, SolverSettings, WILSON_Z};
use crate::model::{constraints_for_density, gen_instance, ConstraintModel, GeneratorConfig, ProblemKind};
use crate::moments::first_moment_density_bound;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    pub kind: ProblemKind,
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub target: f64,
    /// Stop once the density bracket is at most this wide.
    pub tolerance: f64,
    /// Density bracket; defaults to `[0, 2 * first_moment_density_bound]`.
    pub bracket: Option<(f64, f64)>,
    pub settings: SolverSettings,
    pub model: ConstraintModel,
}

impl ThresholdConfig {
    pub fn new(kind: ProblemKind, k: usize, n: usize, trials: usize, master_seed: u64) -> Self {
        ThresholdConfig {
            kind,
            k,
            n,
            trials,
            master_seed,
            target: 0.5,
            tolerance: 0.02,
            bracket: None,
            settings: SolverSettings::default(),
            model: ConstraintModel::Iid,
        }
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.bracket.unwrap_or((0.0, 2.0 * first_moment_density_bound(self.kind, self.k)))
    }
}

/// Oracle results at one constraint count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub m: usize,
    pub r: f64,
    pub trials: usize,
    pub sat_count: usize,
    pub budget_exceeded_count: usize,
    pub sat_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub r_hat: f64,
    /// Half-width of the final density bracket.
    pub bracket_half_width: f64,
    /// Final bracket: `sat_rate >= target` at `r_lo`, below it at `r_hi`.
    pub r_lo: f64,
    pub r_hi: f64,
    /// Last point evaluated by the bisection.
    pub final_point: Evaluation,
    /// Wilson 95% interval of `sat_rate` at the final point, and its half-width.
    pub rate_interval: (f64, f64),
    pub rate_half_width: f64,
    /// Every point evaluated, by increasing `m`.
    pub evaluations: Vec<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum ThresholdOutcome {
    Estimate(ThresholdEstimate),
    /// The rate does not cross `target` between the bracket ends.
    NoBracket { lo: Evaluation, hi: Evaluation },
}

impl ThresholdOutcome {
    pub fn estimate(&self) -> Option<&ThresholdEstimate> {
        match self {
            ThresholdOutcome::Estimate(e) => Some(e),
            ThresholdOutcome::NoBracket { .. } => None,
        }
    }
}

/// Bisection for the density where the empirical satisfiability rate drops
/// below `target`.
///
/// The search runs over integer constraint counts. Trial `t` at count `m`
/// uses seed `mix_seed(master_seed, m, t)`, so revisiting a count replays
/// the same instances. Budget-exhausted trials count as unsatisfiable.
pub fn threshold_bisect(cfg: &ThresholdConfig) -> Result<ThresholdOutcome, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::Invalid("trials must be at least 1".into()));
    }
    if !(cfg.target > 0.0 && cfg.target < 1.0) {
        return Err(HarnessError::Invalid(format!("target {} must lie strictly between 0 and 1", cfg.target)));
    }
    if cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 {
        return Err(HarnessError::Invalid("tolerance must be positive".into()));
    }
    let (lo, hi) = cfg.bracket();
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(HarnessError::Invalid(format!("empty bracket [{lo}, {hi}]")));
    }
    let (mut m_lo, mut m_hi) = (constraints_for_density(lo, cfg.n)?, constraints_for_density(hi, cfg.n)?);
    GeneratorConfig::new(cfg.kind, cfg.n, cfg.k, m_hi, 0).model(cfg.model).validate()?;

    let mut seen = BTreeMap::new();
    let mut eval = |m: usize| -> Result<Evaluation, HarnessError> {
        if let Some(&e) = seen.get(&m) {
            return Ok(e);
        }
        let e = evaluate(cfg, m)?;
        seen.insert(m, e);
        Ok(e)
    };
    let (at_lo, at_hi) = (eval(m_lo)?, eval(m_hi)?);
    if at_lo.sat_rate < cfg.target || at_hi.sat_rate >= cfg.target {
        return Ok(ThresholdOutcome::NoBracket { lo: at_lo, hi: at_hi });
    }
    let mut last = at_hi;
    while m_hi - m_lo > 1 && (m_hi - m_lo) as f64 / cfg.n as f64 > cfg.tolerance {
        let mid = m_lo + (m_hi - m_lo) / 2;
        last = eval(mid)?;
        if last.sat_rate >= cfg.target {
            m_lo = mid;
        } else {
            m_hi = mid;
        }
    }
    let n = cfg.n as f64;
    let rate_interval = wilson_interval(last.sat_count, last.trials, WILSON_Z);
    Ok(ThresholdOutcome::Estimate(ThresholdEstimate {
        r_hat: (m_lo + m_hi) as f64 / (2.0 * n),
        bracket_half_width: (m_hi - m_lo) as f64 / (2.0 * n),
        r_lo: m_lo as f64 / n,
        r_hi: m_hi as f64 / n,
        final_point: last,
        rate_interval,
        rate_half_width: 0.5 * (rate_interval.1 - rate_interval.0),
        evaluations: seen.into_values().collect(),
    }))
}

fn evaluate(cfg: &ThresholdConfig, m: usize) -> Result<Evaluation, HarnessError> {
    let results: Vec<(bool, bool)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = mix_seed(cfg.master_seed, m as u64, t);
            let inst = gen_instance(&GeneratorConfig::new(cfg.kind, cfg.n, cfg.k, m, seed).model(cfg.model))?;
            let run = run_solver(&inst, Solver::Oracle, &cfg.settings, solver_seed(seed, Solver::Oracle))?;
            Ok((run.succeeded(), run.budget_exceeded()))
        })
        .collect::<Result<_, HarnessError>>()?;
    let sat_count = results.iter().filter(|r| r.0).count();
    Ok(Evaluation {
        m,
        r: m as f64 / cfg.n as f64,
        trials: cfg.trials,
        sat_count,
        budget_exceeded_count: results.iter().filter(|r| r.1).count(),
        sat_rate: sat_count as f64 / cfg.trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coloring_with_enough_colors_has_no_bracket() {
        let cfg = ThresholdConfig::new(ProblemKind::KColoring, 8, 6, 20, 1);
        let out = threshold_bisect(&cfg).unwrap();
        match out {
            ThresholdOutcome::NoBracket { lo, hi } => {
                assert_eq!(lo.sat_rate, 1.0);
                assert_eq!(hi.sat_rate, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bisection_brackets_the_estimate() {
        let cfg = ThresholdConfig { tolerance: 0.1, ..ThresholdConfig::new(ProblemKind::KSat, 2, 40, 40, 7) };
        let e = threshold_bisect(&cfg).unwrap().estimate().cloned().expect("bracket");
        assert!(e.r_hi - e.r_lo <= 0.1 + 1e-12 || e.r_hi - e.r_lo <= 1.0 / 40.0 + 1e-12);
        assert!(e.r_lo <= e.r_hat && e.r_hat <= e.r_hi);
        assert!(e.rate_interval.0 <= e.final_point.sat_rate && e.final_point.sat_rate <= e.rate_interval.1);
        let lo = e.evaluations.iter().find(|v| v.r == e.r_lo).unwrap();
        let hi = e.evaluations.iter().find(|v| v.r == e.r_hi).unwrap();
        assert!(lo.sat_rate >= 0.5 && hi.sat_rate < 0.5);
        assert!(e.evaluations.windows(2).all(|w| w[0].m < w[1].m));
        // identical configuration, identical result
        assert_eq!(threshold_bisect(&cfg).unwrap().estimate(), Some(&e));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let base = ThresholdConfig::new(ProblemKind::KSat, 3, 20, 10, 0);
        assert!(threshold_bisect(&ThresholdConfig { trials: 0, ..base.clone() }).is_err());
        assert!(threshold_bisect(&ThresholdConfig { target: 1.0, ..base.clone() }).is_err());
        assert!(threshold_bisect(&ThresholdConfig { tolerance: 0.0, ..base.clone() }).is_err());
        assert!(threshold_bisect(&ThresholdConfig { bracket: Some((2.0, 1.0)), ..base }).is_err());
    }
}

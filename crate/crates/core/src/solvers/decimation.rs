use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;

use super::marginal::{bp_marginal, exact_marginal, BpParams, Marginal, MarginalError, MarginalQuery, DEFAULT_EXACT_CAP};
use super::{FailureReason, SolverError, SolverOutcome};
use crate::factor_graph::FactorGraph;
use crate::model::{Assignment, Csp, Factor, Instance, Rule, Status, UNASSIGNED};

/// Biases and probabilities closer than this count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginalMethod {
    /// Enumeration when the neighborhood fits the cap, belief propagation otherwise.
    #[default]
    Auto,
    Bp,
}

/// What to do when a neighborhood is cyclic and too large to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CyclePolicy {
    /// Use loopy belief propagation.
    #[default]
    Proceed,
    /// Fail the run.
    GiveUp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecimationParams {
    pub omega: usize,
    pub exact_cap: usize,
    pub bp: BpParams,
    pub method: MarginalMethod,
    pub on_cycle: CyclePolicy,
    /// Recompute only marginals whose neighborhood the last step could have changed.
    pub incremental: bool,
    pub parallel: bool,
}

impl Default for DecimationParams {
    fn default() -> Self {
        DecimationParams {
            omega: 2,
            exact_cap: DEFAULT_EXACT_CAP,
            bp: BpParams::default(),
            method: MarginalMethod::Auto,
            on_cycle: CyclePolicy::Proceed,
            incremental: true,
            parallel: true,
        }
    }
}

impl DecimationParams {
    pub fn with_omega(omega: usize) -> Self {
        DecimationParams { omega, ..Self::default() }
    }
}

/// Decimation guided by neighborhood marginals.
///
/// Each round computes, for every unassigned variable, its marginal on the
/// radius-`omega` neighborhood of the current simplified instance with the
/// assigned variables pinned. The variable of largest bias takes its most
/// likely value; ties are broken uniformly. The simplified instance drops
/// satisfied constraints and, for k-SAT, falsified literals; NAE clauses
/// and edges keep assigned variables as pinned members.
pub fn bp_decimation<R: Rng + ?Sized>(
    inst: &Instance,
    params: &DecimationParams,
    rng: &mut R,
) -> Result<SolverOutcome, SolverError> {
    if inst.kind().is_formula() && params.omega < 2 {
        return Err(SolverError::RadiusTooSmall(params.omega));
    }
    let base = inst.to_csp();
    let n = base.n;
    let d = base.domain_size();
    let occ = base.occurrences();
    let mut values = vec![UNASSIGNED; n];
    let mut alive = vec![true; base.m()];
    let mut cache: Vec<Option<Marginal>> = vec![None; n];
    let mut dirty: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);

    for _ in 0..n {
        let residual = FactorGraph::from_csp(simplify(&base, &values, &alive), inst.k());
        let compute = |&x: &usize| (x, neighborhood_marginal(&residual, &values, x, params));
        let fresh: Vec<(usize, Result<Marginal, FailureReason>)> =
            if params.parallel { dirty.par_iter().map(compute).collect() } else { dirty.iter().map(compute).collect() };
        for (x, result) in fresh {
            match result {
                Ok(m) => cache[x] = Some(m),
                Err(reason) => return Ok(SolverOutcome::failure(order, reason)),
            }
        }

        let unassigned = (0..n).filter(|&v| values[v] == UNASSIGNED);
        let best = unassigned.clone().map(|v| cache[v].as_ref().expect("fresh").bias()).fold(f64::NEG_INFINITY, f64::max);
        let candidates: Vec<usize> =
            unassigned.filter(|&v| cache[v].as_ref().expect("fresh").bias() >= best - TIE_TOLERANCE).collect();
        let x = candidates[rng.gen_range(0..candidates.len())];
        let majority = cache[x].take().expect("fresh").majority_values(TIE_TOLERANCE);
        values[x] = majority[rng.gen_range(0..majority.len())];
        order.push(x);

        for &f in &occ[x] {
            if !alive[f] {
                continue;
            }
            match base.status(&base.factors[f], &values) {
                Status::Satisfied => alive[f] = false,
                Status::Violated => {
                    return Ok(SolverOutcome::failure(order, FailureReason::ViolatedConstraint { constraint: f }))
                }
                Status::Undetermined => {}
            }
        }

        dirty = if params.incremental {
            within(&residual, x, params.omega + 2).into_iter().filter(|&v| values[v] == UNASSIGNED).collect()
        } else {
            (0..n).filter(|&v| values[v] == UNASSIGNED).collect()
        };
    }

    debug_assert!(base.is_solution(&values));
    Ok(SolverOutcome::success(Assignment::from_raw(d, values), order))
}

/// The live constraints of `base` under the partial assignment `values`.
fn simplify(base: &Csp, values: &[u8], alive: &[bool]) -> Csp {
    let factors = base
        .factors
        .iter()
        .zip(alive)
        .filter(|(_, &a)| a)
        .map(|(f, _)| match base.rule {
            Rule::Sat => {
                let (vars, signs) = f.vars.iter().zip(&f.signs).filter(|(&v, _)| values[v] == UNASSIGNED).unzip();
                Factor::clause(vars, signs)
            }
            _ => f.clone(),
        })
        .collect();
    Csp::new(base.rule, base.n, factors)
}

fn neighborhood_marginal(
    graph: &FactorGraph,
    values: &[u8],
    x: usize,
    params: &DecimationParams,
) -> Result<Marginal, FailureReason> {
    let sub = graph.neighborhood(x, params.omega);
    let q = MarginalQuery::on_sub(&sub, values, x).expect("x is unassigned and inside its own neighborhood");
    let inconsistent = |_| FailureReason::InconsistentNeighborhood { var: x };
    let bp = |q: &MarginalQuery<'_>| {
        if params.on_cycle == CyclePolicy::GiveUp && !sub.is_tree() {
            return Err(FailureReason::CyclicNeighborhood { var: x });
        }
        bp_marginal(q, &params.bp).map_err(inconsistent)
    };
    match params.method {
        MarginalMethod::Bp => bp(&q),
        MarginalMethod::Auto => match exact_marginal(&q, params.exact_cap) {
            Err(MarginalError::Capacity { .. }) => bp(&q),
            other => other.map_err(inconsistent),
        },
    }
}

/// Variables within factor-graph distance `radius` of variable `x`.
fn within(graph: &FactorGraph, x: usize, radius: usize) -> Vec<usize> {
    let mut var_dist = vec![usize::MAX; graph.num_vars()];
    let mut con_seen = vec![false; graph.num_constraints()];
    var_dist[x] = 0;
    let mut queue = VecDeque::from([x]);
    let mut found = vec![x];
    while let Some(v) = queue.pop_front() {
        if var_dist[v] + 2 > radius {
            continue;
        }
        for &c in graph.constraints_of(v) {
            if std::mem::replace(&mut con_seen[c], true) {
                continue;
            }
            for &w in graph.vars_of(c) {
                if var_dist[w] == usize::MAX {
                    var_dist[w] = var_dist[v] + 2;
                    found.push(w);
                    queue.push_back(w);
                }
            }
        }
    }
    found.sort_unstable();
    found
}

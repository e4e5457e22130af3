use thiserror::Error;

use crate::factor_graph::{is_forest, SubInstance};
use crate::model::{Csp, Factor, Rule, UNASSIGNED};

/// Largest number of unpinned variables [`exact_marginal`] will enumerate.
pub const DEFAULT_EXACT_CAP: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarginalError {
    #[error("no solution is consistent with the pinned values")]
    Inconsistent,
    #[error("{free} unpinned variables exceed the enumeration cap {cap}")]
    Capacity { free: usize, cap: usize },
    #[error("target variable {0} is out of range")]
    BadTarget(usize),
    #[error("target variable {0} is pinned")]
    TargetPinned(usize),
    #[error("expected {expected} pinned entries, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("pinned value {value} outside domain of size {domain}")]
    BadValue { value: u8, domain: usize },
}

/// Distribution of one variable over the solutions of a small network with
/// some variables held fixed.
#[derive(Debug, Clone)]
pub struct MarginalQuery<'a> {
    csp: &'a Csp,
    pinned: Vec<u8>,
    target: usize,
}

impl<'a> MarginalQuery<'a> {
    /// `pinned[i]` is a value code, or `u8::MAX` for a free variable.
    pub fn new(csp: &'a Csp, pinned: Vec<u8>, target: usize) -> Result<Self, MarginalError> {
        if pinned.len() != csp.n {
            return Err(MarginalError::LengthMismatch { expected: csp.n, found: pinned.len() });
        }
        if target >= csp.n {
            return Err(MarginalError::BadTarget(target));
        }
        if pinned[target] != UNASSIGNED {
            return Err(MarginalError::TargetPinned(target));
        }
        let domain = csp.domain_size();
        if let Some(&value) = pinned.iter().find(|&&v| v != UNASSIGNED && v as usize >= domain) {
            return Err(MarginalError::BadValue { value, domain });
        }
        Ok(MarginalQuery { csp, pinned, target })
    }

    /// Query with nothing pinned.
    pub fn free(csp: &'a Csp, target: usize) -> Result<Self, MarginalError> {
        MarginalQuery::new(csp, vec![UNASSIGNED; csp.n], target)
    }

    /// Query on an extracted neighborhood; `values` and `target` use source indices.
    pub fn on_sub(sub: &'a SubInstance, values: &[u8], target: usize) -> Result<Self, MarginalError> {
        let local = sub.local(target).ok_or(MarginalError::BadTarget(target))?;
        let pinned = sub.vars.iter().map(|&v| values[v]).collect();
        MarginalQuery::new(&sub.csp, pinned, local)
    }

    pub fn csp(&self) -> &Csp {
        self.csp
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Factors whose variables are all pinned but which fail under the pins.
    fn pinned_conflict(&self) -> bool {
        self.csp
            .factors
            .iter()
            .any(|f| f.vars.iter().all(|&v| self.pinned[v] != UNASSIGNED) && !self.csp.holds(f, &self.pinned))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    /// `probs[c]` is the probability of value code `c`.
    pub probs: Vec<f64>,
    /// Always true for exact results.
    pub converged: bool,
    pub sweeps: usize,
}

impl Marginal {
    fn uniform(d: usize) -> Self {
        Marginal { probs: vec![1.0 / d as f64; d], converged: true, sweeps: 0 }
    }

    /// Distance of the largest probability from uniform.
    pub fn bias(&self) -> f64 {
        let max = self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max - 1.0 / self.probs.len() as f64
    }

    /// Value codes whose probability is within `tol` of the maximum, ascending.
    pub fn majority_values(&self, tol: f64) -> Vec<u8> {
        let max = self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..self.probs.len()).filter(|&c| self.probs[c] >= max - tol).map(|c| c as u8).collect()
    }
}

/// Exact marginal by enumeration.
///
/// With the target fixed, the free variables split into independent
/// components whose solution counts multiply, so only components are
/// enumerated. Free variables outside every factor are not counted against
/// `cap`.
pub fn exact_marginal(q: &MarginalQuery<'_>, cap: usize) -> Result<Marginal, MarginalError> {
    let csp = q.csp;
    let d = csp.domain_size();
    let occ = csp.occurrences();
    let free: Vec<usize> = (0..csp.n).filter(|&v| q.pinned[v] == UNASSIGNED && (v == q.target || !occ[v].is_empty())).collect();
    if free.len() > cap {
        return Err(MarginalError::Capacity { free: free.len(), cap });
    }
    if q.pinned_conflict() {
        return Err(MarginalError::Inconsistent);
    }
    if occ[q.target].is_empty() {
        // the target is independent of everything else
        return count_all(csp, &q.pinned, &occ).map_or(Err(MarginalError::Inconsistent), |_| Ok(Marginal::uniform(d)));
    }

    let mut counts = vec![0u64; d];
    let mut values = q.pinned.clone();
    for (t, count) in counts.iter_mut().enumerate() {
        values[q.target] = t as u8;
        *count = count_all(csp, &values, &occ).unwrap_or(0);
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MarginalError::Inconsistent);
    }
    let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(Marginal { probs, converged: true, sweeps: 0 })
}

/// Number of completions of `values`, or `None` when there are none.
fn count_all(csp: &Csp, values: &[u8], occ: &[Vec<usize>]) -> Option<u64> {
    if csp.factors.iter().any(|f| f.vars.iter().all(|&v| values[v] != UNASSIGNED) && !csp.holds(f, values)) {
        return None;
    }
    let mut seen = vec![false; csp.n];
    let mut total: u64 = 1;
    for start in 0..csp.n {
        if seen[start] || values[start] != UNASSIGNED || occ[start].is_empty() {
            continue;
        }
        // breadth-first order through free variables so factors close early
        let mut order = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &f in &occ[v] {
                for &w in &csp.factors[f].vars {
                    if !seen[w] && values[w] == UNASSIGNED {
                        seen[w] = true;
                        order.push(w);
                    }
                }
            }
        }
        let c = count_component(csp, values, occ, &order);
        if c == 0 {
            return None;
        }
        total = total.saturating_mul(c);
    }
    Some(total)
}

fn count_component(csp: &Csp, values: &[u8], occ: &[Vec<usize>], order: &[usize]) -> u64 {
    let mut position = vec![usize::MAX; csp.n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut closing: Vec<Vec<&Factor>> = vec![Vec::new(); order.len()];
    let mut listed = vec![false; csp.m()];
    for &v in order {
        for &f in &occ[v] {
            if std::mem::replace(&mut listed[f], true) {
                continue;
            }
            let factor = &csp.factors[f];
            let last = factor.vars.iter().filter(|&&w| position[w] != usize::MAX).map(|&w| position[w]).max();
            closing[last.expect("factor touches the component")].push(factor);
        }
    }

    fn rec(csp: &Csp, values: &mut [u8], order: &[usize], closing: &[Vec<&Factor>], depth: usize) -> u64 {
        if depth == order.len() {
            return 1;
        }
        let v = order[depth];
        let mut total = 0;
        for c in 0..csp.domain_size() as u8 {
            values[v] = c;
            if closing[depth].iter().all(|f| csp.holds(f, values)) {
                total += rec(csp, values, order, closing, depth + 1);
            }
        }
        values[v] = UNASSIGNED;
        total
    }
    let mut scratch = values.to_vec();
    rec(csp, &mut scratch, order, &closing, 0)
}

/// Sum-product schedule for [`bp_marginal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpParams {
    /// Weight kept from the previous variable-to-factor message on cyclic networks.
    pub damping: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for BpParams {
    fn default() -> Self {
        BpParams { damping: 0.5, tolerance: 1e-7, max_sweeps: 100 }
    }
}

/// Sum-product belief propagation with pinned variables clamped.
///
/// On acyclic networks messages run undamped until they stop changing,
/// which makes the result exact. Cyclic networks use `params`.
pub fn bp_marginal(q: &MarginalQuery<'_>, params: &BpParams) -> Result<Marginal, MarginalError> {
    let csp = q.csp;
    let d = csp.domain_size();
    if q.pinned_conflict() {
        return Err(MarginalError::Inconsistent);
    }
    let tree = is_forest(csp);
    let (damping, tolerance, max_sweeps) =
        if tree { (0.0, 0.0, csp.n + csp.m() + 2) } else { (params.damping, params.tolerance, params.max_sweeps) };

    // edge e = (factor a, slot i) lives at offset[a] + i
    let mut offset = Vec::with_capacity(csp.m() + 1);
    offset.push(0);
    for f in &csp.factors {
        offset.push(offset.last().unwrap() + f.width());
    }
    let edges = *offset.last().unwrap();
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); csp.n];
    for (a, f) in csp.factors.iter().enumerate() {
        for (i, &v) in f.vars.iter().enumerate() {
            var_edges[v].push(offset[a] + i);
        }
    }
    let clamp = |v: usize| -> Option<u8> { Some(q.pinned[v]).filter(|&c| c != UNASSIGNED) };

    let mut to_factor = vec![1.0 / d as f64; edges * d];
    for (v, es) in var_edges.iter().enumerate() {
        if let Some(c) = clamp(v) {
            for &e in es {
                indicator(&mut to_factor[e * d..(e + 1) * d], c);
            }
        }
    }
    let mut to_var = vec![1.0 / d as f64; edges * d];
    let mut next = vec![0.0; edges * d];
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < max_sweeps {
        sweeps += 1;
        for (a, f) in csp.factors.iter().enumerate() {
            factor_messages(csp.rule, f, &to_factor[offset[a] * d..offset[a + 1] * d], &mut next[offset[a] * d..offset[a + 1] * d], d);
        }
        for e in 0..edges {
            if !normalize(&mut next[e * d..(e + 1) * d]) {
                return Err(MarginalError::Inconsistent);
            }
        }
        let change = next.iter().zip(&to_var).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut to_var, &mut next);
        if sweeps > 1 && change <= tolerance {
            converged = true;
            break;
        }

        let mut msg = vec![0.0; d];
        for (v, es) in var_edges.iter().enumerate() {
            if clamp(v).is_some() {
                continue;
            }
            for &e in es {
                msg.iter_mut().for_each(|x| *x = 1.0);
                for &other in es.iter().filter(|&&o| o != e) {
                    for (x, r) in msg.iter_mut().zip(&to_var[other * d..(other + 1) * d]) {
                        *x *= r;
                    }
                }
                if !normalize(&mut msg) {
                    return Err(MarginalError::Inconsistent);
                }
                for (old, new) in to_factor[e * d..(e + 1) * d].iter_mut().zip(&msg) {
                    *old = damping * *old + (1.0 - damping) * new;
                }
            }
        }
    }

    // every free belief must be non-zero, not just the target's
    let mut target = None;
    for v in (0..csp.n).filter(|&v| clamp(v).is_none()) {
        let mut belief = vec![1.0; d];
        for &e in &var_edges[v] {
            for (x, r) in belief.iter_mut().zip(&to_var[e * d..(e + 1) * d]) {
                *x *= r;
            }
        }
        if !normalize(&mut belief) {
            return Err(MarginalError::Inconsistent);
        }
        if v == q.target {
            target = Some(belief);
        }
    }
    Ok(Marginal { probs: target.expect("the target is unpinned"), converged, sweeps })
}

fn indicator(slot: &mut [f64], c: u8) {
    slot.iter_mut().enumerate().for_each(|(i, x)| *x = if i == c as usize { 1.0 } else { 0.0 });
}

/// Scales to unit sum; false when the vector is all zero.
fn normalize(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if s <= 0.0 || !s.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= s);
    true
}

/// Factor-to-variable messages for every slot of `f`, from the incoming
/// variable-to-factor messages. Both slices are `width * d` long.
fn factor_messages(rule: Rule, f: &Factor, incoming: &[f64], out: &mut [f64], d: usize) {
    let w = f.width();
    let slot = |i: usize| &incoming[i * d..(i + 1) * d];
    match rule {
        Rule::Coloring { .. } => {
            for i in 0..2 {
                let other = slot(1 - i);
                let s: f64 = other.iter().sum();
                for x in 0..d {
                    out[i * d + x] = s - other[x];
                }
            }
        }
        Rule::Sat | Rule::Nae => {
            // code making literal j take truth value `t`
            let code = |j: usize, t: bool| (t == f.signs[j]) as usize;
            for i in 0..w {
                let others = (0..w).filter(|&j| j != i);
                let all: f64 = others.clone().map(|j| slot(j).iter().sum::<f64>()).product();
                for x in 0..2 {
                    let truth = (x == 1) == f.signs[i];
                    let violating = match rule {
                        Rule::Sat if truth => 0.0,
                        Rule::Sat => others.clone().map(|j| slot(j)[code(j, false)]).product(),
                        _ => others.clone().map(|j| slot(j)[code(j, truth)]).product(),
                    };
                    out[i * d + x] = (all - violating).max(0.0);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clause_csp(rule: Rule, n: usize, clauses: &[&[i64]]) -> Csp {
        let factors = clauses
            .iter()
            .map(|c| Factor::clause(c.iter().map(|l| l.unsigned_abs() as usize - 1).collect(), c.iter().map(|&l| l > 0).collect()))
            .collect();
        Csp::new(rule, n, factors)
    }

    fn both(q: &MarginalQuery<'_>) -> (Marginal, Marginal) {
        (exact_marginal(q, DEFAULT_EXACT_CAP).unwrap(), bp_marginal(q, &BpParams::default()).unwrap())
    }

    #[test]
    fn single_sat_clause_is_four_sevenths() {
        let csp = clause_csp(Rule::Sat, 3, &[&[1, 2, 3]]);
        let q = MarginalQuery::free(&csp, 0).unwrap();
        let (ex, bp) = both(&q);
        assert!((ex.probs[1] - 4.0 / 7.0).abs() < 1e-15);
        assert!((bp.probs[1] - 4.0 / 7.0).abs() < 1e-12 && bp.converged);
        assert!((ex.bias() - 1.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn nae_clause_and_isolated_variable_are_uniform() {
        let csp = clause_csp(Rule::Nae, 4, &[&[1, 2, 3]]);
        for target in [0, 3] {
            let (ex, bp) = both(&MarginalQuery::free(&csp, target).unwrap());
            assert_eq!(ex.probs, vec![0.5, 0.5]);
            assert!((bp.probs[0] - 0.5).abs() < 1e-15);
        }
        let empty = Csp::new(Rule::Sat, 1, vec![]);
        let (ex, bp) = both(&MarginalQuery::free(&empty, 0).unwrap());
        assert_eq!((ex.probs.clone(), bp.probs.clone()), (vec![0.5, 0.5], vec![0.5, 0.5]));
        assert_eq!(ex.majority_values(1e-12), vec![0, 1]);
    }

    #[test]
    fn pinning_conditions_the_count() {
        let csp = clause_csp(Rule::Sat, 3, &[&[1, 2, 3]]);
        let q = MarginalQuery::new(&csp, vec![UNASSIGNED, 0, 0], 0).unwrap();
        let (ex, bp) = both(&q);
        assert_eq!(ex.probs, vec![0.0, 1.0]);
        assert!((bp.probs[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn contradictions_are_reported() {
        let bad = clause_csp(Rule::Sat, 3, &[&[1, 2], &[1, 3], &[-1, 2]]);
        let q = MarginalQuery::new(&bad, vec![UNASSIGNED, 0, UNASSIGNED], 2).unwrap();
        assert_eq!(exact_marginal(&q, 25), Err(MarginalError::Inconsistent));
        assert_eq!(bp_marginal(&q, &BpParams::default()), Err(MarginalError::Inconsistent));
        let pinned_pair = clause_csp(Rule::Sat, 3, &[&[1, 2]]);
        let q = MarginalQuery::new(&pinned_pair, vec![0, 0, UNASSIGNED], 2).unwrap();
        assert_eq!(exact_marginal(&q, 25), Err(MarginalError::Inconsistent));
        assert_eq!(bp_marginal(&q, &BpParams::default()), Err(MarginalError::Inconsistent));
        let tri = Csp::new(Rule::Coloring { palette: 2 }, 3, vec![Factor::edge(0, 1), Factor::edge(1, 2), Factor::edge(0, 2)]);
        let q = MarginalQuery::free(&tri, 0).unwrap();
        assert_eq!(exact_marginal(&q, 25), Err(MarginalError::Inconsistent));
    }

    #[test]
    fn capacity_and_validation() {
        let csp = clause_csp(Rule::Sat, 4, &[&[1, 2, 3, 4]]);
        let q = MarginalQuery::free(&csp, 0).unwrap();
        assert_eq!(exact_marginal(&q, 3), Err(MarginalError::Capacity { free: 4, cap: 3 }));
        assert_eq!(MarginalQuery::new(&csp, vec![0; 4], 0).unwrap_err(), MarginalError::TargetPinned(0));
        assert_eq!(MarginalQuery::free(&csp, 9).unwrap_err(), MarginalError::BadTarget(9));
        assert!(matches!(MarginalQuery::new(&csp, vec![UNASSIGNED, 2, 0, 0], 0), Err(MarginalError::BadValue { .. })));
    }

    #[test]
    fn coloring_path_marginals() {
        // path 0-1-2 with 3 colors, vertex 0 pinned to color 0
        let csp = Csp::new(Rule::Coloring { palette: 3 }, 3, vec![Factor::edge(0, 1), Factor::edge(1, 2)]);
        let q = MarginalQuery::new(&csp, vec![0, UNASSIGNED, UNASSIGNED], 2).unwrap();
        let (ex, bp) = both(&q);
        // vertex 1 ∈ {1,2}; vertex 2 avoids it: counts 2,1,1
        assert_eq!(ex.probs, vec![0.5, 0.25, 0.25]);
        for c in 0..3 {
            assert!((ex.probs[c] - bp.probs[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn loopy_bp_reports_convergence() {
        // 4-cycle of NAE clauses of width 2 (x ≠ y) is bipartite and consistent
        let csp = clause_csp(Rule::Nae, 4, &[&[1, 2], &[2, 3], &[3, 4], &[4, 1]]);
        let m = bp_marginal(&MarginalQuery::free(&csp, 0).unwrap(), &BpParams::default()).unwrap();
        assert!(m.converged);
        assert!((m.probs[0] - 0.5).abs() < 1e-9);
    }
}

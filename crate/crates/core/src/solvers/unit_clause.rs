use rand::Rng;

use super::{FailureReason, IndexedSet, SolverError, SolverOutcome};
use crate::model::{Assignment, Formula, Semantics, UNASSIGNED};

/// UnitClause for k-SAT.
///
/// Each step assigns one variable for good. While some clause has no true
/// literal and exactly one unassigned variable, a variable is drawn
/// uniformly among those occurring in such unit clauses and set to satisfy
/// one of its unit clauses (drawn uniformly). Otherwise a uniformly random
/// unassigned variable gets a uniformly random value. The run fails as soon
/// as a clause is violated.
pub fn unit_clause_solve<R: Rng + ?Sized>(f: &Formula, rng: &mut R) -> Result<SolverOutcome, SolverError> {
    if f.semantics() != Semantics::Sat {
        return Err(SolverError::WrongKind { solver: "unit-clause", expected: "k-SAT" });
    }
    let n = f.n();
    let clauses = f.clauses();
    let mut occ: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for (c, clause) in clauses.iter().enumerate() {
        for lit in clause.literals() {
            occ[lit.var() - 1].push((c, lit.is_positive()));
        }
    }

    let mut values = vec![UNASSIGNED; n];
    let mut n_false = vec![0usize; clauses.len()];
    let mut satisfied = vec![false; clauses.len()];
    let mut unassigned = IndexedSet::full(n);
    let mut unit_vars = IndexedSet::empty(n);
    let mut order = Vec::with_capacity(n);
    let is_unit = |c: usize, n_false: &[usize], satisfied: &[bool]| !satisfied[c] && n_false[c] + 1 == clauses[c].width();

    while !unassigned.is_empty() {
        let (var, value) = if unit_vars.is_empty() {
            let var = unassigned.get(rng.gen_range(0..unassigned.len()));
            (var, rng.gen_range(0..2u8))
        } else {
            let var = unit_vars.get(rng.gen_range(0..unit_vars.len()));
            let units: Vec<bool> =
                occ[var].iter().filter(|(c, _)| is_unit(*c, &n_false, &satisfied)).map(|&(_, sign)| sign).collect();
            (var, units[rng.gen_range(0..units.len())] as u8)
        };

        values[var] = value;
        unassigned.remove(var);
        unit_vars.remove(var);
        order.push(var);

        for &(c, sign) in &occ[var] {
            if satisfied[c] {
                continue;
            }
            if (value == 1) == sign {
                satisfied[c] = true;
                continue;
            }
            n_false[c] += 1;
            let width = clauses[c].width();
            if n_false[c] == width {
                return Ok(SolverOutcome::failure(order, FailureReason::ViolatedConstraint { constraint: c }));
            }
            if n_false[c] + 1 == width {
                let open = clauses[c].vars().map(|v| v - 1).find(|&v| values[v] == UNASSIGNED).expect("one open variable");
                unit_vars.insert(open);
            }
        }
    }

    let assignment = Assignment::from_raw(2, values);
    debug_assert!(clauses.iter().enumerate().all(|(c, _)| satisfied[c]));
    Ok(SolverOutcome::success(assignment, order))
}

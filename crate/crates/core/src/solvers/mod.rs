//! Local, non-backtracking algorithms: UnitClause for k-SAT, randomized greedy
//! coloring, and decimation guided by neighborhood marginals.
//!
//! Every solver assigns each variable exactly once and gives up on the first
//! violated constraint.

mod decimation;
mod greedy;
mod marginal;
mod unit_clause;

use serde::Serialize;
use thiserror::Error;

use crate::model::Assignment;

pub use decimation::{bp_decimation, CyclePolicy, DecimationParams, MarginalMethod};
pub use greedy::greedy_color;
pub use marginal::{bp_marginal, exact_marginal, BpParams, Marginal, MarginalError, MarginalQuery, DEFAULT_EXACT_CAP};
pub use unit_clause::unit_clause_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Success,
    Failure,
}

/// Why a run gave up. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FailureReason {
    ViolatedConstraint { constraint: usize },
    NoColorAvailable { vertex: usize },
    InconsistentNeighborhood { var: usize },
    CyclicNeighborhood { var: usize },
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::ViolatedConstraint { constraint } => write!(f, "violated constraint {constraint}"),
            FailureReason::NoColorAvailable { vertex } => write!(f, "no color available for vertex {vertex}"),
            FailureReason::InconsistentNeighborhood { var } => write!(f, "inconsistent neighborhood at variable {var}"),
            FailureReason::CyclicNeighborhood { var } => write!(f, "cyclic neighborhood at variable {var}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    /// Variables in the order they were assigned (0-based).
    pub order: Vec<usize>,
    pub failure: Option<FailureReason>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.order.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    /// Present exactly when the run succeeded.
    pub assignment: Option<Assignment>,
    pub trace: Trace,
}

impl SolverOutcome {
    pub(crate) fn success(assignment: Assignment, order: Vec<usize>) -> Self {
        SolverOutcome { status: SolverStatus::Success, assignment: Some(assignment), trace: Trace { order, failure: None } }
    }

    pub(crate) fn failure(order: Vec<usize>, reason: FailureReason) -> Self {
        SolverOutcome { status: SolverStatus::Failure, assignment: None, trace: Trace { order, failure: Some(reason) } }
    }

    pub fn is_success(&self) -> bool {
        self.status == SolverStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("{solver} needs {expected} instances")]
    WrongKind { solver: &'static str, expected: &'static str },
    #[error("palette size {0} unsupported")]
    BadPalette(usize),
    #[error("neighborhood radius {0} contains no whole clause; use at least 2")]
    RadiusTooSmall(usize),
}

/// Swap-remove set over `0..n` with O(1) insert, remove and uniform sampling.
#[derive(Debug, Clone)]
pub(crate) struct IndexedSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl IndexedSet {
    const ABSENT: usize = usize::MAX;

    pub fn empty(n: usize) -> Self {
        IndexedSet { items: Vec::new(), pos: vec![Self::ABSENT; n] }
    }

    pub fn full(n: usize) -> Self {
        IndexedSet { items: (0..n).collect(), pos: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn insert(&mut self, x: usize) {
        if self.pos[x] == Self::ABSENT {
            self.pos[x] = self.items.len();
            self.items.push(x);
        }
    }

    pub fn remove(&mut self, x: usize) {
        let p = self.pos[x];
        if p == Self::ABSENT {
            return;
        }
        let last = self.items.pop().expect("nonempty");
        if last != x {
            self.items[p] = last;
            self.pos[last] = p;
        }
        self.pos[x] = Self::ABSENT;
    }

    pub fn get(&self, i: usize) -> usize {
        self.items[i]
    }
}

#[cfg(test)]
mod tests {
    use super::IndexedSet;

    #[test]
    fn indexed_set_tracks_membership() {
        let mut s = IndexedSet::full(5);
        s.remove(2);
        s.remove(2);
        s.remove(4);
        assert_eq!(s.len(), 3);
        let mut items: Vec<_> = (0..s.len()).map(|i| s.get(i)).collect();
        items.sort();
        assert_eq!(items, vec![0, 1, 3]);
        s.insert(4);
        s.insert(4);
        assert_eq!(s.len(), 4);
        let mut e = IndexedSet::empty(3);
        assert!(e.is_empty());
        e.insert(1);
        assert_eq!(e.get(0), 1);
    }
}

use serde::{Deserialize, Serialize};

use super::{Instance, Status, UNASSIGNED};

/// Constraint semantics shared by every factor of a [`Csp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    Sat,
    Nae,
    /// Both endpoints of an edge must receive different colors.
    Coloring { palette: usize },
}

impl Rule {
    pub fn domain_size(self) -> usize {
        match self {
            Rule::Sat | Rule::Nae => 2,
            Rule::Coloring { palette } => palette,
        }
    }

    pub fn is_formula(self) -> bool {
        !matches!(self, Rule::Coloring { .. })
    }
}

/// One constraint in 0-indexed form: its scope and, for clauses, the literal signs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factor {
    pub vars: Vec<usize>,
    /// `signs[i]` is the polarity of the literal on `vars[i]`; empty for edges.
    pub signs: Vec<bool>,
}

impl Factor {
    pub fn clause(vars: Vec<usize>, signs: Vec<bool>) -> Self {
        debug_assert_eq!(vars.len(), signs.len());
        Factor { vars, signs }
    }

    pub fn edge(u: usize, v: usize) -> Self {
        Factor { vars: vec![u, v], signs: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.vars.len()
    }
}

/// Flat constraint network: `n` variables indexed `0..n`, factors over them.
///
/// Unlike [`Instance`], factor widths may differ, which is what simplified
/// and extracted sub-problems need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csp {
    pub rule: Rule,
    pub n: usize,
    pub factors: Vec<Factor>,
}

impl Csp {
    pub fn new(rule: Rule, n: usize, factors: Vec<Factor>) -> Self {
        debug_assert!(factors.iter().all(|f| f.vars.iter().all(|&v| v < n)));
        Csp { rule, n, factors }
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let factors = match inst {
            Instance::Formula(f) => f
                .clauses()
                .iter()
                .map(|c| {
                    let vars = c.literals().iter().map(|l| l.var() - 1).collect();
                    let signs = c.literals().iter().map(|l| l.is_positive()).collect();
                    Factor::clause(vars, signs)
                })
                .collect(),
            Instance::Coloring(c) => c.graph().edges().iter().map(|&(u, v)| Factor::edge(u - 1, v - 1)).collect(),
        };
        Csp::new(inst.rule(), inst.n(), factors)
    }

    pub fn domain_size(&self) -> usize {
        self.rule.domain_size()
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    /// For every variable, the indices of the factors containing it.
    pub fn occurrences(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.n];
        for (i, f) in self.factors.iter().enumerate() {
            for &v in &f.vars {
                occ[v].push(i);
            }
        }
        occ
    }

    /// Status of `factor` when variable `i` holds `values[i]` (`u8::MAX` = unassigned).
    pub fn status(&self, factor: &Factor, values: &[u8]) -> Status {
        match self.rule {
            Rule::Sat | Rule::Nae => {
                let lits = factor.vars.iter().zip(&factor.signs).map(|(&v, &s)| match values[v] {
                    UNASSIGNED => None,
                    code => Some((code == 1) == s),
                });
                clause_status(self.rule, factor.width(), lits)
            }
            Rule::Coloring { .. } => {
                let get = |v: usize| Some(values[v]).filter(|&c| c != UNASSIGNED);
                edge_status(self.rule, get(factor.vars[0]), get(factor.vars[1]))
            }
        }
    }

    /// Whether the factor holds under a total assignment.
    #[inline]
    pub fn holds(&self, factor: &Factor, values: &[u8]) -> bool {
        match self.rule {
            Rule::Sat => factor.vars.iter().zip(&factor.signs).any(|(&v, &s)| (values[v] == 1) == s),
            Rule::Nae => {
                let mut seen = [false; 2];
                for (&v, &s) in factor.vars.iter().zip(&factor.signs) {
                    seen[((values[v] == 1) == s) as usize] = true;
                }
                seen[0] && seen[1]
            }
            Rule::Coloring { .. } => values[factor.vars[0]] != values[factor.vars[1]],
        }
    }

    pub fn is_solution(&self, values: &[u8]) -> bool {
        self.factors.iter().all(|f| self.holds(f, values))
    }
}

/// Status of a clause from its literal truth values (`None` = unassigned).
pub(crate) fn clause_status(rule: Rule, width: usize, literals: impl Iterator<Item = Option<bool>>) -> Status {
    let mut seen_true = false;
    let mut seen_false = false;
    let mut open = false;
    for lit in literals {
        match lit {
            Some(true) => seen_true = true,
            Some(false) => seen_false = true,
            None => open = true,
        }
    }
    match rule {
        Rule::Sat if seen_true => Status::Satisfied,
        Rule::Nae if width < 2 => Status::Violated,
        Rule::Nae if seen_true && seen_false => Status::Satisfied,
        Rule::Sat | Rule::Nae if open => Status::Undetermined,
        Rule::Sat | Rule::Nae => Status::Violated,
        Rule::Coloring { .. } => panic!("clause evaluated under coloring semantics"),
    }
}

pub(crate) fn edge_status(rule: Rule, a: Option<u8>, b: Option<u8>) -> Status {
    let palette = rule.domain_size();
    match (a, b) {
        _ if palette < 2 => Status::Violated,
        (Some(x), Some(y)) if x == y => Status::Violated,
        (Some(_), Some(_)) => Status::Satisfied,
        _ => Status::Undetermined,
    }
}

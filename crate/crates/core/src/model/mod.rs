//! CSP instances, assignments and constraint semantics.
//!
//! Three problem families share one representation: k-SAT and k-NAE are
//! [`Formula`]s that differ only in their [`Semantics`], and k-coloring is a
//! [`Graph`] paired with a palette size. Variables (and vertices) are
//! 1-indexed everywhere in the public API, matching DIMACS.

mod csp;
mod dimacs;
mod generate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csp::{Csp, Factor, Rule};
pub use dimacs::{parse_dimacs, write_dimacs, ParseError, ParseErrorKind};
pub use generate::{constraint_space, constraints_for_density, gen_instance, random_tree_csp, ConfigError, ConstraintModel, GeneratorConfig};

/// Largest palette supported by the coloring code paths (domains are `u64` bitmasks).
pub const MAX_PALETTE: usize = 64;

/// Sentinel stored in [`Assignment`] for an unassigned variable.
pub(crate) const UNASSIGNED: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "ksat")]
    KSat,
    #[serde(rename = "knae")]
    KNae,
    #[serde(rename = "kcol")]
    KColoring,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::KSat, ProblemKind::KNae, ProblemKind::KColoring];

    /// Short tag used in DIMACS comments, CSV files and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            ProblemKind::KSat => "ksat",
            ProblemKind::KNae => "knae",
            ProblemKind::KColoring => "kcol",
        }
    }

    pub fn is_formula(self) -> bool {
        !matches!(self, ProblemKind::KColoring)
    }

    pub fn semantics(self) -> Option<Semantics> {
        match self {
            ProblemKind::KSat => Some(Semantics::Sat),
            ProblemKind::KNae => Some(Semantics::Nae),
            ProblemKind::KColoring => None,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ksat" => Ok(ProblemKind::KSat),
            "knae" => Ok(ProblemKind::KNae),
            "kcol" => Ok(ProblemKind::KColoring),
            other => Err(format!("unknown problem kind `{other}` (expected ksat, knae or kcol)")),
        }
    }
}

/// How a clause is read: ordinary disjunction or not-all-equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Semantics {
    Sat,
    Nae,
}

impl Semantics {
    pub fn kind(self) -> ProblemKind {
        match self {
            Semantics::Sat => ProblemKind::KSat,
            Semantics::Nae => ProblemKind::KNae,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("variable indices start at 1")]
    ZeroVariable,
    #[error("variable {var} out of range 1..={n}")]
    VariableOutOfRange { var: usize, n: usize },
    #[error("variable {0} appears twice in one clause")]
    RepeatedVariable(usize),
    #[error("clause {index} has {found} literals, expected {expected}")]
    WidthMismatch { index: usize, expected: usize, found: usize },
    #[error("clause width must be at least 2, got {0}")]
    WidthTooSmall(usize),
    #[error("empty clause")]
    EmptyClause,
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("palette size must be in 2..={max}, got {0}", max = MAX_PALETTE)]
    BadPalette(usize),
    #[error("assignment is partial")]
    PartialAssignment,
    #[error("assignment has {found} variables, instance has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value {value} outside the domain of size {domain}")]
    ValueOutOfDomain { value: usize, domain: usize },
}

/// A variable together with a polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    var: usize,
    positive: bool,
}

impl Literal {
    pub fn new(var: usize, positive: bool) -> Self {
        Literal { var, positive }
    }

    pub fn pos(var: usize) -> Self {
        Literal::new(var, true)
    }

    pub fn neg(var: usize) -> Self {
        Literal::new(var, false)
    }

    pub fn var(self) -> usize {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// Parses a signed DIMACS literal; `0` is not a literal.
    pub fn from_dimacs(lit: i64) -> Option<Self> {
        if lit == 0 {
            return None;
        }
        Some(Literal::new(lit.unsigned_abs() as usize, lit > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "¬x{}", self.var)
        }
    }
}

/// A clause over pairwise distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Result<Self, ModelError> {
        if literals.is_empty() {
            return Err(ModelError::EmptyClause);
        }
        for (i, lit) in literals.iter().enumerate() {
            if lit.var == 0 {
                return Err(ModelError::ZeroVariable);
            }
            if literals[..i].iter().any(|l| l.var == lit.var) {
                return Err(ModelError::RepeatedVariable(lit.var));
            }
        }
        Ok(Clause { literals })
    }

    /// Builds a clause from signed DIMACS integers, e.g. `[1, 2, -3]`.
    pub fn from_dimacs(lits: &[i64]) -> Result<Self, ModelError> {
        let literals = lits
            .iter()
            .map(|&l| Literal::from_dimacs(l).ok_or(ModelError::ZeroVariable))
            .collect::<Result<Vec<_>, _>>()?;
        Clause::new(literals)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn width(&self) -> usize {
        self.literals.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals.iter().map(|l| l.var)
    }
}

/// A CNF formula with exactly `k` literals per clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    n: usize,
    k: usize,
    clauses: Vec<Clause>,
    semantics: Semantics,
}

impl Formula {
    pub fn new(n: usize, k: usize, clauses: Vec<Clause>, semantics: Semantics) -> Result<Self, ModelError> {
        if k < 2 {
            return Err(ModelError::WidthTooSmall(k));
        }
        for (index, clause) in clauses.iter().enumerate() {
            if clause.width() != k {
                return Err(ModelError::WidthMismatch { index, expected: k, found: clause.width() });
            }
            if let Some(var) = clause.vars().find(|&v| v > n) {
                return Err(ModelError::VariableOutOfRange { var, n });
            }
        }
        Ok(Formula { n, k, clauses, semantics })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }
}

/// An undirected graph without self-loops.
///
/// Multi-edges are representable: independent edge draws may repeat a pair,
/// and the edge count `m` keeps every draw. [`Graph::is_simple`] reports
/// whether any pair repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Endpoints are normalized so that `u < v`.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        let mut normalized = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == 0 || v == 0 {
                return Err(ModelError::ZeroVariable);
            }
            if u == v {
                return Err(ModelError::SelfLoop(u));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if b > n {
                return Err(ModelError::VariableOutOfRange { var: b, n });
            }
            normalized.push((a, b));
        }
        Ok(Graph { n, edges: normalized })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.edges.len());
        self.edges.iter().all(|e| seen.insert(*e))
    }

    /// The complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let edges = (1..=n).flat_map(|u| (u + 1..=n).map(move |v| (u, v))).collect();
        Graph { n, edges }
    }

    /// The path `1 - 2 - ... - n`.
    pub fn path(n: usize) -> Self {
        let edges = (1..n).map(|u| (u, u + 1)).collect();
        Graph { n, edges }
    }
}

/// A graph together with the number of available colors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    graph: Graph,
    palette: usize,
}

impl Coloring {
    pub fn new(graph: Graph, palette: usize) -> Result<Self, ModelError> {
        if !(2..=MAX_PALETTE).contains(&palette) {
            return Err(ModelError::BadPalette(palette));
        }
        Ok(Coloring { graph, palette })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn palette(&self) -> usize {
        self.palette
    }
}

/// Outcome of evaluating a total assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
}

/// Status of a single constraint under a possibly partial assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Every completion satisfies the constraint.
    Satisfied,
    /// No completion satisfies the constraint.
    Violated,
    Undetermined,
}

/// Borrowed view of one constraint of an [`Instance`].
#[derive(Debug, Clone, Copy)]
pub enum ConstraintRef<'a> {
    Clause(&'a Clause),
    Edge(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instance {
    Formula(Formula),
    Coloring(Coloring),
}

impl Instance {
    pub fn formula(n: usize, k: usize, clauses: Vec<Clause>, semantics: Semantics) -> Result<Self, ModelError> {
        Formula::new(n, k, clauses, semantics).map(Instance::Formula)
    }

    pub fn coloring(graph: Graph, palette: usize) -> Result<Self, ModelError> {
        Coloring::new(graph, palette).map(Instance::Coloring)
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Formula(f) => f.semantics.kind(),
            Instance::Coloring(_) => ProblemKind::KColoring,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Instance::Formula(f) => f.n,
            Instance::Coloring(c) => c.graph.n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Instance::Formula(f) => f.m(),
            Instance::Coloring(c) => c.graph.m(),
        }
    }

    /// Clause width for formulas, palette size for colorings.
    pub fn k(&self) -> usize {
        match self {
            Instance::Formula(f) => f.k,
            Instance::Coloring(c) => c.palette,
        }
    }

    /// Constraint density `m / n`.
    pub fn density(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    pub fn rule(&self) -> Rule {
        match self {
            Instance::Formula(f) => match f.semantics {
                Semantics::Sat => Rule::Sat,
                Semantics::Nae => Rule::Nae,
            },
            Instance::Coloring(c) => Rule::Coloring { palette: c.palette },
        }
    }

    /// Number of values each variable can take: 2 for formulas, `k` for colorings.
    pub fn domain_size(&self) -> usize {
        self.rule().domain_size()
    }

    pub fn constraint(&self, index: usize) -> ConstraintRef<'_> {
        match self {
            Instance::Formula(f) => ConstraintRef::Clause(&f.clauses[index]),
            Instance::Coloring(c) => {
                let (u, v) = c.graph.edges[index];
                ConstraintRef::Edge(u, v)
            }
        }
    }

    pub fn constraints(&self) -> impl Iterator<Item = ConstraintRef<'_>> + '_ {
        (0..self.m()).map(move |i| self.constraint(i))
    }

    pub fn as_formula(&self) -> Option<&Formula> {
        match self {
            Instance::Formula(f) => Some(f),
            Instance::Coloring(_) => None,
        }
    }

    pub fn as_coloring(&self) -> Option<&Coloring> {
        match self {
            Instance::Coloring(c) => Some(c),
            Instance::Formula(_) => None,
        }
    }

    /// An empty total-assignment template of the right shape.
    pub fn empty_assignment(&self) -> Assignment {
        Assignment::unassigned(self.n(), self.domain_size())
    }

    /// Flat 0-indexed view used by the solvers.
    pub fn to_csp(&self) -> Csp {
        Csp::from_instance(self)
    }

    /// Whether a total assignment satisfies every constraint.
    pub fn evaluate(&self, a: &Assignment) -> Result<Verdict, ModelError> {
        self.check_shape(a)?;
        if !a.is_total() {
            return Err(ModelError::PartialAssignment);
        }
        let rule = self.rule();
        let ok = self.constraints().all(|c| constraint_status(c, a, rule) == Status::Satisfied);
        Ok(if ok { Verdict::Satisfied } else { Verdict::Violated })
    }

    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        matches!(self.evaluate(a), Ok(Verdict::Satisfied))
    }

    fn check_shape(&self, a: &Assignment) -> Result<(), ModelError> {
        if a.n() != self.n() {
            return Err(ModelError::LengthMismatch { expected: self.n(), found: a.n() });
        }
        if a.domain_size() != self.domain_size() {
            return Err(ModelError::ValueOutOfDomain { value: a.domain_size(), domain: self.domain_size() });
        }
        Ok(())
    }
}

/// Status of one constraint under a possibly partial assignment.
pub fn constraint_status(c: ConstraintRef<'_>, a: &Assignment, rule: Rule) -> Status {
    match c {
        ConstraintRef::Clause(clause) => {
            let values = clause.literals().iter().map(|lit| a.bool_value(lit.var()).map(|v| lit.eval(v)));
            csp::clause_status(rule, clause.width(), values)
        }
        ConstraintRef::Edge(u, v) => csp::edge_status(rule, a.get(u), a.get(v)),
    }
}

/// A partial or total map from variables to values.
///
/// Values are stored as codes `0..domain`: for formulas `0` is false and `1`
/// is true, for colorings code `c` is color `c + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    domain: u8,
    values: Vec<u8>,
}

impl Assignment {
    pub fn unassigned(n: usize, domain: usize) -> Self {
        assert!((1..=MAX_PALETTE).contains(&domain), "domain size {domain} unsupported");
        Assignment { domain: domain as u8, values: vec![UNASSIGNED; n] }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        Assignment { domain: 2, values: values.iter().map(|&b| b as u8).collect() }
    }

    /// Builds a coloring from 1-based colors.
    pub fn from_colors(palette: usize, colors: &[usize]) -> Result<Self, ModelError> {
        let mut a = Assignment::unassigned(colors.len(), palette);
        for (i, &c) in colors.iter().enumerate() {
            if c == 0 || c > palette {
                return Err(ModelError::ValueOutOfDomain { value: c, domain: palette });
            }
            a.values[i] = (c - 1) as u8;
        }
        Ok(a)
    }

    /// Builds a total assignment from raw value codes.
    pub fn from_codes(domain: usize, codes: Vec<u8>) -> Result<Self, ModelError> {
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= domain) {
            return Err(ModelError::ValueOutOfDomain { value: bad as usize, domain });
        }
        Ok(Assignment { domain: domain as u8, values: codes })
    }

    pub(crate) fn from_raw(domain: usize, values: Vec<u8>) -> Self {
        Assignment { domain: domain as u8, values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn domain_size(&self) -> usize {
        self.domain as usize
    }

    /// Value code of `var` (1-based).
    pub fn get(&self, var: usize) -> Option<u8> {
        match self.values.get(var.wrapping_sub(1)) {
            Some(&v) if v != UNASSIGNED => Some(v),
            _ => None,
        }
    }

    pub fn bool_value(&self, var: usize) -> Option<bool> {
        self.get(var).map(|v| v == 1)
    }

    /// 1-based color of `var`.
    pub fn color(&self, var: usize) -> Option<usize> {
        self.get(var).map(|v| v as usize + 1)
    }

    pub fn set(&mut self, var: usize, code: u8) {
        assert!(code < self.domain, "value code {code} outside domain {}", self.domain);
        self.values[var - 1] = code;
    }

    pub fn unset(&mut self, var: usize) {
        self.values[var - 1] = UNASSIGNED;
    }

    pub fn is_assigned(&self, var: usize) -> bool {
        self.get(var).is_some()
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(|&v| v != UNASSIGNED)
    }

    pub fn assigned_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != UNASSIGNED).count()
    }

    /// Raw codes, 0-indexed by variable; unassigned entries hold `u8::MAX`.
    pub fn codes(&self) -> &[u8] {
        &self.values
    }

    /// Flips every Boolean value. Only meaningful for formulas.
    pub fn complement(&self) -> Assignment {
        debug_assert_eq!(self.domain, 2);
        let values = self.values.iter().map(|&v| if v == UNASSIGNED { v } else { 1 - v }).collect();
        Assignment { domain: self.domain, values }
    }

    /// Relabels colors: code `c` becomes `perm[c]`.
    pub fn permute_values(&self, perm: &[u8]) -> Assignment {
        let values = self.values.iter().map(|&v| if v == UNASSIGNED { v } else { perm[v as usize] }).collect();
        Assignment { domain: self.domain, values }
    }

    /// Number of variables on which two assignments differ.
    pub fn hamming(&self, other: &Assignment) -> usize {
        self.values.iter().zip(&other.values).filter(|(a, b)| a != b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clause(lits: &[i64]) -> Clause {
        Clause::from_dimacs(lits).unwrap()
    }

    fn partial(n: usize, vals: &[(usize, bool)]) -> Assignment {
        let mut a = Assignment::unassigned(n, 2);
        for &(v, b) in vals {
            a.set(v, b as u8);
        }
        a
    }

    #[test]
    fn sat_clause_first_literal_true() {
        let f = Instance::formula(3, 3, vec![clause(&[1, 2, -3])], Semantics::Sat).unwrap();
        let a = Assignment::from_bools(&[true, true, true]);
        assert_eq!(f.evaluate(&a).unwrap(), Verdict::Satisfied);
    }

    #[test]
    fn nae_clause_all_true_is_violated() {
        let f = Instance::formula(3, 3, vec![clause(&[1, 2, 3])], Semantics::Nae).unwrap();
        let a = Assignment::from_bools(&[true, true, true]);
        assert_eq!(f.evaluate(&a).unwrap(), Verdict::Violated);
    }

    #[test]
    fn triangle_proper_coloring() {
        let g = Instance::coloring(Graph::complete(3), 3).unwrap();
        let a = Assignment::from_colors(3, &[1, 2, 3]).unwrap();
        assert_eq!(g.evaluate(&a).unwrap(), Verdict::Satisfied);
        let bad = Assignment::from_colors(3, &[1, 2, 1]).unwrap();
        assert_eq!(g.evaluate(&bad).unwrap(), Verdict::Violated);
    }

    #[test]
    fn evaluate_rejects_partial() {
        let f = Instance::formula(3, 3, vec![clause(&[1, 2, 3])], Semantics::Sat).unwrap();
        let a = partial(3, &[(1, true)]);
        assert_eq!(f.evaluate(&a), Err(ModelError::PartialAssignment));
    }

    #[test]
    fn partial_status() {
        let c = clause(&[1, 2, 3]);
        let a = partial(3, &[(1, false), (2, false)]);
        assert_eq!(constraint_status(ConstraintRef::Clause(&c), &a, Rule::Sat), Status::Undetermined);
        let a = partial(3, &[(1, false), (2, false), (3, false)]);
        assert_eq!(constraint_status(ConstraintRef::Clause(&c), &a, Rule::Sat), Status::Violated);
        let a = partial(3, &[(1, true), (2, false)]);
        assert_eq!(constraint_status(ConstraintRef::Clause(&c), &a, Rule::Nae), Status::Satisfied);
        let a = partial(3, &[(1, true), (2, true)]);
        assert_eq!(constraint_status(ConstraintRef::Clause(&c), &a, Rule::Nae), Status::Undetermined);
        let a = partial(3, &[(3, false)]);
        assert_eq!(constraint_status(ConstraintRef::Clause(&c), &a, Rule::Sat), Status::Undetermined);
    }

    #[test]
    fn edge_status_with_single_color_palette() {
        let mut a = Assignment::unassigned(2, 1);
        assert_eq!(csp::edge_status(Rule::Coloring { palette: 1 }, a.get(1), a.get(2)), Status::Violated);
        a.set(1, 0);
        assert_eq!(csp::edge_status(Rule::Coloring { palette: 1 }, a.get(1), a.get(2)), Status::Violated);
        let a = Assignment::unassigned(2, 2);
        assert_eq!(csp::edge_status(Rule::Coloring { palette: 2 }, a.get(1), a.get(2)), Status::Undetermined);
    }

    #[test]
    fn clause_validation() {
        assert_eq!(Clause::from_dimacs(&[1, -1, 2]), Err(ModelError::RepeatedVariable(1)));
        assert!(matches!(
            Formula::new(3, 3, vec![clause(&[1, 2])], Semantics::Sat),
            Err(ModelError::WidthMismatch { .. })
        ));
        assert!(matches!(
            Formula::new(2, 2, vec![clause(&[1, 3])], Semantics::Sat),
            Err(ModelError::VariableOutOfRange { var: 3, n: 2 })
        ));
    }

    #[test]
    fn graph_validation() {
        assert_eq!(Graph::new(3, vec![(2, 2)]), Err(ModelError::SelfLoop(2)));
        assert!(Graph::new(3, vec![(1, 4)]).is_err());
        let g = Graph::new(3, vec![(3, 1), (1, 3)]).unwrap();
        assert_eq!(g.edges(), &[(1, 3), (1, 3)]);
        assert!(!g.is_simple());
        assert!(Graph::complete(4).is_simple());
    }

    #[test]
    fn density_is_m_over_n() {
        let g = Instance::coloring(Graph::complete(4), 3).unwrap();
        assert_eq!(g.density(), 1.5);
    }

    #[test]
    fn kind_round_trips_through_tag() {
        for kind in ProblemKind::ALL {
            assert_eq!(kind.tag().parse::<ProblemKind>().unwrap(), kind);
        }
    }
}

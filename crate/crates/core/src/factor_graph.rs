//! Bipartite variable/constraint graph, radius-ω neighborhoods and girth.
//!
//! Indices in this module are 0-based: variable `i` is DIMACS variable
//! `i + 1`, and constraint `j` is the `j`-th clause or edge. Distances count
//! factor-graph edges, so a variable reaches the other variables of its
//! clauses at distance 2.

use std::collections::{HashMap, VecDeque};

use crate::model::{Clause, Coloring, Csp, Formula, Graph, Instance, Literal, ModelError, Rule, Semantics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Var(usize),
    Constraint(usize),
}

/// The factor graph of a constraint network.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    csp: Csp,
    var_adj: Vec<Vec<usize>>,
    /// Clause width for formulas, palette size for colorings.
    nominal_k: usize,
}

impl FactorGraph {
    pub fn build(inst: &Instance) -> Self {
        FactorGraph::from_csp(inst.to_csp(), inst.k())
    }

    pub fn from_csp(csp: Csp, nominal_k: usize) -> Self {
        let var_adj = csp.occurrences();
        FactorGraph { csp, var_adj, nominal_k }
    }

    pub fn csp(&self) -> &Csp {
        &self.csp
    }

    pub fn num_vars(&self) -> usize {
        self.csp.n
    }

    pub fn num_constraints(&self) -> usize {
        self.csp.m()
    }

    /// Constraints containing variable `v`.
    pub fn constraints_of(&self, v: usize) -> &[usize] {
        &self.var_adj[v]
    }

    /// Variables of constraint `c`.
    pub fn vars_of(&self, c: usize) -> &[usize] {
        &self.csp.factors[c].vars
    }

    pub fn neighbors(&self, node: Node) -> Vec<Node> {
        match node {
            Node::Var(v) => self.var_adj[v].iter().map(|&c| Node::Constraint(c)).collect(),
            Node::Constraint(c) => self.vars_of(c).iter().map(|&v| Node::Var(v)).collect(),
        }
    }

    /// Distances from variable `x` to every node within `radius`.
    fn ball(&self, x: usize, radius: usize) -> (Vec<usize>, Vec<usize>) {
        let mut var_seen: HashMap<usize, usize> = HashMap::from([(x, 0)]);
        let mut con_seen: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([(Node::Var(x), 0usize)]);
        while let Some((node, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            match node {
                Node::Var(v) => {
                    for &c in &self.var_adj[v] {
                        if let std::collections::hash_map::Entry::Vacant(e) = con_seen.entry(c) {
                            e.insert(d + 1);
                            queue.push_back((Node::Constraint(c), d + 1));
                        }
                    }
                }
                Node::Constraint(c) => {
                    for &v in self.vars_of(c) {
                        if let std::collections::hash_map::Entry::Vacant(e) = var_seen.entry(v) {
                            e.insert(d + 1);
                            queue.push_back((Node::Var(v), d + 1));
                        }
                    }
                }
            }
        }
        let mut vars: Vec<usize> = var_seen.into_keys().collect();
        let mut cons: Vec<usize> = con_seen.into_keys().collect();
        vars.sort_unstable();
        cons.sort_unstable();
        (vars, cons)
    }

    /// Sub-instance spanned by the nodes within distance `omega` of variable `x`.
    ///
    /// A constraint is kept only when all of its variables are within reach.
    pub fn neighborhood(&self, x: usize, omega: usize) -> SubInstance {
        let (vars, cons) = self.ball(x, omega);
        self.induced(vars, cons)
    }

    /// Restriction to `vars`, keeping the listed constraints whose scope lies inside `vars`.
    pub fn induced(&self, vars: Vec<usize>, candidates: Vec<usize>) -> SubInstance {
        let local: HashMap<usize, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut factors = Vec::new();
        let mut constraints = Vec::new();
        for c in candidates {
            let f = &self.csp.factors[c];
            let Some(scope) = f.vars.iter().map(|v| local.get(v).copied()).collect::<Option<Vec<_>>>() else {
                continue;
            };
            factors.push(crate::model::Factor { vars: scope, signs: f.signs.clone() });
            constraints.push(c);
        }
        SubInstance { csp: Csp::new(self.csp.rule, vars.len(), factors), vars, constraints, nominal_k: self.nominal_k }
    }

    /// Length of the shortest cycle, or `None` if the graph is a forest.
    pub fn girth(&self) -> Option<usize> {
        let n = self.num_vars();
        let total = n + self.num_constraints();
        let adj = |node: usize| -> Box<dyn Iterator<Item = usize> + '_> {
            if node < n {
                Box::new(self.var_adj[node].iter().map(move |&c| c + n))
            } else {
                Box::new(self.vars_of(node - n).iter().copied())
            }
        };
        let mut best = usize::MAX;
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        let mut touched = Vec::new();
        let mut queue = VecDeque::new();
        for source in 0..total {
            dist[source] = 0;
            touched.push(source);
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                // every cycle found from here on is at least 2 * dist[u] long
                if 2 * dist[u] >= best {
                    break;
                }
                for w in adj(u) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        touched.push(w);
                        queue.push_back(w);
                    } else if w != parent[u] {
                        best = best.min(dist[u] + dist[w] + 1);
                    }
                }
            }
            for t in touched.drain(..) {
                dist[t] = usize::MAX;
                parent[t] = usize::MAX;
            }
            queue.clear();
        }
        (best != usize::MAX).then_some(best)
    }
}

/// An extracted sub-problem together with its mapping back to the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubInstance {
    /// Local network; variable `i` is source variable `vars[i]`.
    pub csp: Csp,
    pub vars: Vec<usize>,
    /// Source index of every local factor, in local order.
    pub constraints: Vec<usize>,
    nominal_k: usize,
}

impl SubInstance {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Local index of source variable `v`.
    pub fn local(&self, v: usize) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    /// Whether this sub-instance is contained in `other` (same source).
    pub fn is_contained_in(&self, other: &SubInstance) -> bool {
        self.vars.iter().all(|&v| other.local(v).is_some())
            && self.constraints.iter().all(|c| other.constraints.binary_search(c).is_ok())
    }

    /// Whether the factor graph is acyclic.
    pub fn is_tree(&self) -> bool {
        is_forest(&self.csp)
    }

    /// The sub-instance as a standalone (re-indexed) [`Instance`] of the source kind.
    pub fn to_instance(&self) -> Result<Instance, ModelError> {
        let n = self.num_vars();
        match self.csp.rule {
            Rule::Sat | Rule::Nae => {
                let semantics = if self.csp.rule == Rule::Sat { Semantics::Sat } else { Semantics::Nae };
                let clauses = self
                    .csp
                    .factors
                    .iter()
                    .map(|f| Clause::new(f.vars.iter().zip(&f.signs).map(|(&v, &s)| Literal::new(v + 1, s)).collect()))
                    .collect::<Result<Vec<_>, _>>()?;
                Formula::new(n, self.nominal_k, clauses, semantics).map(Instance::Formula)
            }
            Rule::Coloring { palette } => {
                let edges = self.csp.factors.iter().map(|f| (f.vars[0] + 1, f.vars[1] + 1)).collect();
                Coloring::new(Graph::new(n, edges)?, palette).map(Instance::Coloring)
            }
        }
    }
}

/// Acyclicity of a network's factor graph: edges = nodes - components.
pub fn is_forest(csp: &Csp) -> bool {
    let n = csp.n;
    let mut parent: Vec<usize> = (0..n + csp.m()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (c, f) in csp.factors.iter().enumerate() {
        for &v in &f.vars {
            let (a, b) = (find(&mut parent, n + c), find(&mut parent, v));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
    }
    true
}

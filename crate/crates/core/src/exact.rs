//! Complete oracles: a backtracking decision procedure and an exhaustive
//! solution enumerator for small instances.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Assignment, Csp, Instance, ProblemKind, Rule, UNASSIGNED};

/// Default search-node limit for [`decide`].
pub const DEFAULT_NODE_LIMIT: u64 = 20_000_000;

/// Default solution cap for [`enumerate_solutions`].
pub const DEFAULT_SOLUTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Sat(Assignment),
    Unsat,
    /// The node limit was reached before the search finished.
    Budget,
}

impl Decision {
    pub fn is_sat(&self) -> bool {
        matches!(self, Decision::Sat(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Decision::Sat(_) => "SAT",
            Decision::Unsat => "UNSAT",
            Decision::Budget => "BUDGET",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    /// Branching decisions, including flipped ones.
    pub nodes: u64,
}

pub fn decide(inst: &Instance) -> Decision {
    decide_with_limit(inst, DEFAULT_NODE_LIMIT).0
}

pub fn decide_with_limit(inst: &Instance, node_limit: u64) -> (Decision, SearchStats) {
    let csp = inst.to_csp();
    let (outcome, stats) = match csp.rule {
        Rule::Sat | Rule::Nae => FormulaSearch::new(&csp, node_limit).run(),
        Rule::Coloring { .. } => ColoringSearch::new(&csp, node_limit).run(),
    };
    let decision = match outcome {
        Some(Some(values)) => {
            let a = Assignment::from_raw(csp.domain_size(), values);
            debug_assert!(inst.is_satisfied_by(&a));
            Decision::Sat(a)
        }
        Some(None) => Decision::Unsat,
        None => Decision::Budget,
    };
    (decision, stats)
}

/// `None` = budget exhausted; `Some(None)` = refuted; `Some(Some(v))` = witness.
type Outcome = Option<Option<Vec<u8>>>;

struct Frame {
    trail_len: usize,
    var: usize,
    value: u8,
    flipped: bool,
}

/// DPLL for SAT and NAE clauses with counter-based propagation.
struct FormulaSearch<'a> {
    csp: &'a Csp,
    nae: bool,
    occ: Vec<Vec<(usize, bool)>>,
    values: Vec<u8>,
    n_true: Vec<u32>,
    n_false: Vec<u32>,
    /// Occurrences in clauses not yet satisfied, indexed `[var][sign]`.
    active: Vec<[u32; 2]>,
    trail: Vec<usize>,
    queue: VecDeque<(usize, u8)>,
    stats: SearchStats,
    limit: u64,
}

impl<'a> FormulaSearch<'a> {
    fn new(csp: &'a Csp, limit: u64) -> Self {
        let mut occ = vec![Vec::new(); csp.n];
        let mut active = vec![[0u32; 2]; csp.n];
        for (c, f) in csp.factors.iter().enumerate() {
            for (&v, &s) in f.vars.iter().zip(&f.signs) {
                occ[v].push((c, s));
                active[v][s as usize] += 1;
            }
        }
        FormulaSearch {
            csp,
            nae: csp.rule == Rule::Nae,
            occ,
            values: vec![UNASSIGNED; csp.n],
            n_true: vec![0; csp.m()],
            n_false: vec![0; csp.m()],
            active,
            trail: Vec::with_capacity(csp.n),
            queue: VecDeque::new(),
            stats: SearchStats::default(),
            limit,
        }
    }

    fn satisfied(&self, c: usize) -> bool {
        self.satisfied_counts(self.n_true[c], self.n_false[c])
    }

    fn satisfied_counts(&self, t: u32, f: u32) -> bool {
        t > 0 && (!self.nae || f > 0)
    }

    /// Sets `v` and updates every clause containing it; returns false on conflict.
    fn assign(&mut self, v: usize, value: u8) -> bool {
        self.values[v] = value;
        self.trail.push(v);
        let mut ok = true;
        for i in 0..self.occ[v].len() {
            let (c, sign) = self.occ[v][i];
            let was = self.satisfied(c);
            if (value == 1) == sign {
                self.n_true[c] += 1;
            } else {
                self.n_false[c] += 1;
            }
            if !was && self.satisfied(c) {
                self.set_active(c, false);
            }
            if !ok || was {
                continue;
            }
            let width = self.csp.factors[c].width() as u32;
            let (t, f) = (self.n_true[c], self.n_false[c]);
            if self.nae {
                if t == width || f == width {
                    ok = false;
                } else if t == 0 && f == width - 1 {
                    self.force(c, true);
                } else if f == 0 && t == width - 1 {
                    self.force(c, false);
                }
            } else if t == 0 {
                if f == width {
                    ok = false;
                } else if f == width - 1 {
                    self.force(c, true);
                }
            }
        }
        ok
    }

    fn unassign(&mut self, v: usize) {
        let value = self.values[v];
        for i in 0..self.occ[v].len() {
            let (c, sign) = self.occ[v][i];
            let was = self.satisfied(c);
            if (value == 1) == sign {
                self.n_true[c] -= 1;
            } else {
                self.n_false[c] -= 1;
            }
            if was && !self.satisfied(c) {
                self.set_active(c, true);
            }
        }
        self.values[v] = UNASSIGNED;
    }

    fn set_active(&mut self, c: usize, on: bool) {
        let f = &self.csp.factors[c];
        for (&v, &s) in f.vars.iter().zip(&f.signs) {
            let slot = &mut self.active[v][s as usize];
            if on {
                *slot += 1;
            } else {
                *slot -= 1;
            }
        }
    }

    /// Queues the unassigned literal of clause `c` with the given truth value.
    fn force(&mut self, c: usize, truth: bool) {
        let f = &self.csp.factors[c];
        if let Some((&v, &s)) = f.vars.iter().zip(&f.signs).find(|(&v, _)| self.values[v] == UNASSIGNED) {
            self.queue.push_back((v, (s == truth) as u8));
        }
    }

    fn propagate(&mut self) -> bool {
        while let Some((v, value)) = self.queue.pop_front() {
            let ok = match self.values[v] {
                UNASSIGNED => self.assign(v, value),
                current => current == value,
            };
            if !ok {
                self.queue.clear();
                return false;
            }
        }
        if !self.nae {
            // pure literals, and variables left only in satisfied clauses
            for v in 0..self.csp.n {
                if self.values[v] != UNASSIGNED {
                    continue;
                }
                let [neg, pos] = self.active[v];
                if neg == 0 || pos == 0 {
                    self.assign(v, (neg == 0 && pos > 0) as u8);
                }
            }
        }
        true
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let v = self.trail.pop().expect("trail");
            self.unassign(v);
        }
    }

    /// Two-sided Jeroslow-Wang score over unsatisfied clauses.
    fn branch(&self) -> Option<(usize, u8)> {
        let mut score = vec![[0.0f64; 2]; self.csp.n];
        let mut any = false;
        for (c, f) in self.csp.factors.iter().enumerate() {
            if self.satisfied(c) {
                continue;
            }
            let open = f.width() as u32 - self.n_true[c] - self.n_false[c];
            let w = (-(open as f64)).exp2();
            for (&v, &s) in f.vars.iter().zip(&f.signs) {
                if self.values[v] == UNASSIGNED {
                    score[v][s as usize] += w;
                    any = true;
                }
            }
        }
        if !any {
            return None;
        }
        let (v, s) = score
            .iter()
            .enumerate()
            .filter(|(v, _)| self.values[*v] == UNASSIGNED)
            .max_by(|a, b| (a.1[0] + a.1[1]).total_cmp(&(b.1[0] + b.1[1])).then(b.0.cmp(&a.0)))
            .expect("some unassigned variable is scored");
        Some((v, (s[1] > s[0]) as u8))
    }

    fn run(mut self) -> (Outcome, SearchStats) {
        let mut stack: Vec<Frame> = Vec::new();
        let mut ok = self.propagate();
        loop {
            if ok {
                match self.branch() {
                    None => {
                        for v in self.values.iter_mut().filter(|v| **v == UNASSIGNED) {
                            *v = 0;
                        }
                        return (Some(Some(self.values)), self.stats);
                    }
                    Some((var, value)) => {
                        self.stats.nodes += 1;
                        if self.stats.nodes > self.limit {
                            return (None, self.stats);
                        }
                        // NAE solutions are closed under complement, so the first branch of an empty trail is enough.
                        let flipped = self.nae && self.trail.is_empty();
                        stack.push(Frame { trail_len: self.trail.len(), var, value, flipped });
                        self.queue.push_back((var, value));
                        ok = self.propagate();
                    }
                }
                continue;
            }
            // conflict: flip the deepest unflipped decision
            loop {
                let Some(top) = stack.last_mut() else {
                    return (Some(None), self.stats);
                };
                if top.flipped {
                    let len = top.trail_len;
                    stack.pop();
                    self.undo_to(len);
                    continue;
                }
                top.flipped = true;
                top.value = 1 - top.value;
                let (len, var, value) = (top.trail_len, top.var, top.value);
                self.undo_to(len);
                self.stats.nodes += 1;
                if self.stats.nodes > self.limit {
                    return (None, self.stats);
                }
                self.queue.push_back((var, value));
                ok = self.propagate();
                break;
            }
        }
    }
}

/// Backtracking coloring with forward checking and smallest-domain-first ordering.
struct ColoringSearch {
    n: usize,
    palette: usize,
    adj: Vec<Vec<usize>>,
    colors: Vec<u8>,
    domains: Vec<u64>,
    stats: SearchStats,
    limit: u64,
}

impl ColoringSearch {
    fn new(csp: &Csp, limit: u64) -> Self {
        let mut adj = vec![Vec::new(); csp.n];
        for f in &csp.factors {
            let (u, v) = (f.vars[0], f.vars[1]);
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let palette = csp.domain_size();
        let full = if palette == 64 { u64::MAX } else { (1u64 << palette) - 1 };
        ColoringSearch {
            n: csp.n,
            palette,
            adj,
            colors: vec![UNASSIGNED; csp.n],
            domains: vec![full; csp.n],
            stats: SearchStats::default(),
            limit,
        }
    }

    fn pick(&self) -> Option<usize> {
        (0..self.n)
            .filter(|&v| self.colors[v] == UNASSIGNED)
            .min_by_key(|&v| (self.domains[v].count_ones(), std::cmp::Reverse(self.adj[v].len()), v))
    }

    /// `None` on budget exhaustion, `Some(found)` otherwise.
    fn search(&mut self, max_used: usize) -> Option<bool> {
        let Some(v) = self.pick() else {
            return Some(true);
        };
        let mut removed = Vec::new();
        // colors beyond the first unused one are interchangeable
        for c in 0..self.palette.min(max_used + 1) {
            if self.domains[v] >> c & 1 == 0 {
                continue;
            }
            self.stats.nodes += 1;
            if self.stats.nodes > self.limit {
                return None;
            }
            self.colors[v] = c as u8;
            let bit = 1u64 << c;
            let mut wiped = false;
            for &w in &self.adj[v] {
                if self.colors[w] == UNASSIGNED && self.domains[w] & bit != 0 {
                    self.domains[w] &= !bit;
                    removed.push(w);
                    wiped |= self.domains[w] == 0;
                }
            }
            if !wiped && self.search(max_used.max(c + 1))? {
                return Some(true);
            }
            for w in removed.drain(..) {
                self.domains[w] |= bit;
            }
            self.colors[v] = UNASSIGNED;
        }
        Some(false)
    }

    fn run(mut self) -> (Outcome, SearchStats) {
        let outcome = match self.search(0) {
            None => None,
            Some(true) => Some(Some(self.colors)),
            Some(false) => Some(None),
        };
        (outcome, self.stats)
    }
}

/// Solutions of one instance in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionSet {
    pub kind: ProblemKind,
    pub n: usize,
    pub k: usize,
    pub solutions: Vec<Assignment>,
    /// True when every solution is listed.
    pub exhaustive: bool,
    pub cap: usize,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn domain_size(&self) -> usize {
        if self.kind.is_formula() {
            2
        } else {
            self.k
        }
    }

    /// Index of `a` in the set, using the lexicographic order.
    pub fn position(&self, a: &Assignment) -> Option<usize> {
        self.solutions.binary_search_by(|s| s.codes().cmp(a.codes())).ok()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.position(a).is_some()
    }

    /// Text export: a `#` header line, then one solution per line.
    ///
    /// Formulas print a bitstring `x1 x2 ...` of `0`/`1`; colorings print
    /// digits `1..=k` when `k <= 9` and space-separated colors otherwise.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# kind={} n={} k={} exhaustive={} count={}",
            self.kind,
            self.n,
            self.k,
            self.exhaustive,
            self.len()
        );
        for s in &self.solutions {
            out.push_str(&format_solution(self.kind, self.k, s));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SolutionSet, SolutionTextError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(SolutionTextError { line: 1, message: "empty file".into() })?;
        let header_err = |m: &str| SolutionTextError { line: 1, message: m.into() };
        let body = header.strip_prefix('#').ok_or_else(|| header_err("missing `#` header"))?;
        let mut kind = None;
        let (mut n, mut k, mut exhaustive, mut count) = (None, None, None, None);
        for tok in body.split_whitespace() {
            let Some((key, value)) = tok.split_once('=') else { continue };
            match key {
                "kind" => kind = value.parse::<ProblemKind>().ok(),
                "n" => n = value.parse::<usize>().ok(),
                "k" => k = value.parse::<usize>().ok(),
                "exhaustive" => exhaustive = value.parse::<bool>().ok(),
                "count" => count = value.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (Some(kind), Some(n), Some(k), Some(exhaustive)) = (kind, n, k, exhaustive) else {
            return Err(header_err("header needs kind, n, k and exhaustive"));
        };
        let domain = if kind.is_formula() { 2 } else { k };
        let mut solutions = Vec::new();
        for (idx, line) in lines {
            let line_err = |m: String| SolutionTextError { line: idx + 1, message: m };
            let codes: Vec<u8> = if kind.is_formula() {
                line.trim()
                    .chars()
                    .map(|ch| match ch {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        other => Err(line_err(format!("bad bit `{other}`"))),
                    })
                    .collect::<Result<_, _>>()?
            } else if k <= 9 {
                line.trim()
                    .chars()
                    .map(|ch| match ch.to_digit(10) {
                        Some(c) if c >= 1 && c as usize <= k => Ok(c as u8 - 1),
                        _ => Err(line_err(format!("bad color `{ch}`"))),
                    })
                    .collect::<Result<_, _>>()?
            } else {
                line.split_whitespace()
                    .map(|tok| match tok.parse::<usize>() {
                        Ok(c) if c >= 1 && c <= k => Ok(c as u8 - 1),
                        _ => Err(line_err(format!("bad color `{tok}`"))),
                    })
                    .collect::<Result<_, _>>()?
            };
            if codes.len() != n {
                return Err(line_err(format!("expected {n} values, found {}", codes.len())));
            }
            solutions.push(Assignment::from_raw(domain, codes));
        }
        if count.is_some_and(|c| c != solutions.len()) {
            return Err(header_err("solution count does not match header"));
        }
        let cap = solutions.len();
        Ok(SolutionSet { kind, n, k, solutions, exhaustive, cap })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct SolutionTextError {
    pub line: usize,
    pub message: String,
}

/// One solution in the text-export notation of [`SolutionSet::to_text`].
pub fn format_solution(kind: ProblemKind, k: usize, a: &Assignment) -> String {
    match kind {
        ProblemKind::KColoring if k > 9 => {
            a.codes().iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join(" ")
        }
        ProblemKind::KColoring => a.codes().iter().map(|&c| char::from(b'1' + c)).collect(),
        _ => a.codes().iter().map(|&c| char::from(b'0' + c)).collect(),
    }
}

/// Lists solutions in lexicographic order (variable 1 most significant,
/// false before true, color 1 first), stopping after `cap` of them.
pub fn enumerate_solutions(inst: &Instance, cap: usize) -> SolutionSet {
    let csp = inst.to_csp();
    let domain = csp.domain_size();
    let mut solutions = Vec::new();
    let exhaustive = for_each_solution(&csp, |values| {
        if solutions.len() == cap {
            return false;
        }
        solutions.push(Assignment::from_raw(domain, values.to_vec()));
        true
    });
    SolutionSet { kind: inst.kind(), n: inst.n(), k: inst.k(), solutions, exhaustive, cap }
}

/// Number of solutions, by exhaustive search.
pub fn count_solutions(inst: &Instance) -> u64 {
    let mut count = 0u64;
    for_each_solution(&inst.to_csp(), |_| {
        count += 1;
        true
    });
    count
}

/// Visits every solution of `csp` in lexicographic order until `visit`
/// returns false. Returns whether the search ran to completion.
pub fn for_each_solution(csp: &Csp, mut visit: impl FnMut(&[u8]) -> bool) -> bool {
    let n = csp.n;
    if n == 0 {
        return if csp.is_solution(&[]) { visit(&[]) } else { true };
    }
    // each factor is checked once, when its largest variable is set
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, f) in csp.factors.iter().enumerate() {
        match f.vars.iter().max() {
            Some(&last) => closing[last].push(i),
            None => {
                if !csp.holds(f, &[]) {
                    return true;
                }
            }
        }
    }
    let domain = csp.domain_size() as u8;
    let mut values = vec![0u8; n];
    let mut depth = 0usize;
    let mut next = vec![0u8; n];
    loop {
        if next[depth] == domain {
            next[depth] = 0;
            if depth == 0 {
                return true;
            }
            depth -= 1;
            continue;
        }
        values[depth] = next[depth];
        next[depth] += 1;
        if !closing[depth].iter().all(|&i| csp.holds(&csp.factors[i], &values)) {
            continue;
        }
        if depth + 1 == n {
            if !visit(&values) {
                return false;
            }
        } else {
            depth += 1;
        }
    }
}

/// Serializable summary line for `decide`.
#[derive(Debug, Clone, Serialize)]
pub struct DecisionReport {
    pub kind: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub result: &'static str,
    pub nodes: u64,
    pub witness: Option<String>,
}

impl DecisionReport {
    pub fn new(inst: &Instance, decision: &Decision, stats: SearchStats) -> Self {
        let witness = match decision {
            Decision::Sat(a) => Some(format_solution(inst.kind(), inst.k(), a)),
            _ => None,
        };
        DecisionReport {
            kind: inst.kind(),
            n: inst.n(),
            m: inst.m(),
            k: inst.k(),
            result: decision.label(),
            nodes: stats.nodes,
            witness,
        }
    }
}

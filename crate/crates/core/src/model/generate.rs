//! Random instance models: `F_k(n, m)` for formulas and `G(n, m)` for graphs.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Clause, Coloring, Csp, Factor, Formula, Graph, Instance, Literal, ProblemKind, Rule, MAX_PALETTE};

/// How the `m` constraints are drawn from the constraint space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ConstraintModel {
    /// Independent uniform draws; repeats are kept.
    #[default]
    #[serde(rename = "iid")]
    Iid,
    /// A uniformly random set of `m` distinct constraints.
    #[serde(rename = "distinct")]
    DistinctSet,
}

impl std::str::FromStr for ConstraintModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iid" => Ok(ConstraintModel::Iid),
            "distinct" => Ok(ConstraintModel::DistinctSet),
            other => Err(format!("unknown constraint model `{other}` (expected iid or distinct)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("instances need at least one variable")]
    NoVariables,
    #[error("clause width must be at least 2, got {0}")]
    WidthTooSmall(usize),
    #[error("palette size must be in 2..={max}, got {0}", max = MAX_PALETTE)]
    BadPalette(usize),
    #[error("no clause has {k} distinct variables among {n}")]
    NotEnoughVariables { n: usize, k: usize },
    #[error("{m} constraints requested but the constraint space has only {space}")]
    SpaceExhausted { m: usize, space: u128 },
    #[error("density must be finite and nonnegative, got {0}")]
    BadDensity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: ProblemKind,
    pub n: usize,
    /// Clause width for formulas, palette size for colorings.
    pub k: usize,
    pub m: usize,
    pub model: ConstraintModel,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(kind: ProblemKind, n: usize, k: usize, m: usize, seed: u64) -> Self {
        GeneratorConfig { kind, n, k, m, model: ConstraintModel::Iid, seed }
    }

    /// `m = round(r * n)`.
    pub fn with_density(kind: ProblemKind, n: usize, k: usize, r: f64, seed: u64) -> Result<Self, ConfigError> {
        Ok(GeneratorConfig::new(kind, n, k, constraints_for_density(r, n)?, seed))
    }

    pub fn model(mut self, model: ConstraintModel) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoVariables);
        }
        if self.kind.is_formula() {
            if self.k < 2 {
                return Err(ConfigError::WidthTooSmall(self.k));
            }
            if self.k > self.n {
                return Err(ConfigError::NotEnoughVariables { n: self.n, k: self.k });
            }
        } else if !(2..=MAX_PALETTE).contains(&self.k) {
            return Err(ConfigError::BadPalette(self.k));
        }
        let space = constraint_space(self.kind, self.n, self.k);
        let exhausted = match self.model {
            ConstraintModel::Iid => space == 0 && self.m > 0,
            ConstraintModel::DistinctSet => self.m as u128 > space,
        };
        if exhausted {
            return Err(ConfigError::SpaceExhausted { m: self.m, space });
        }
        Ok(())
    }
}

/// `round(r * n)`, the constraint count at density `r`.
pub fn constraints_for_density(r: f64, n: usize) -> Result<usize, ConfigError> {
    if !r.is_finite() || r < 0.0 {
        return Err(ConfigError::BadDensity(r));
    }
    Ok((r * n as f64).round() as usize)
}

/// Number of distinct constraints: `C(n,k) 2^k` clauses or `C(n,2)` edges (saturating).
pub fn constraint_space(kind: ProblemKind, n: usize, k: usize) -> u128 {
    if kind.is_formula() {
        binomial_u128(n, k).saturating_mul(1u128.checked_shl(k as u32).unwrap_or(u128::MAX))
    } else {
        binomial_u128(n, 2)
    }
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Spaces at most this large are materialized when more than half of them is requested.
const MATERIALIZE_LIMIT: u128 = 1 << 16;

/// Draws a random instance; deterministic in `cfg.seed`.
pub fn gen_instance(cfg: &GeneratorConfig) -> Result<Instance, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let space = constraint_space(cfg.kind, cfg.n, cfg.k);
    let dense = cfg.model == ConstraintModel::DistinctSet && space <= MATERIALIZE_LIMIT && 2 * cfg.m as u128 > space;

    let instance = match cfg.kind.semantics() {
        Some(semantics) => {
            let clauses = if dense {
                let all = all_clauses(cfg.n, cfg.k);
                index::sample(&mut rng, all.len(), cfg.m).into_iter().map(|i| all[i].clone()).collect()
            } else {
                draw(&mut rng, cfg.m, cfg.model, |rng| random_clause(rng, cfg.n, cfg.k))
            };
            Instance::Formula(Formula::new(cfg.n, cfg.k, clauses, semantics).expect("generated clauses are well formed"))
        }
        None => {
            let edges = if dense {
                let all = Graph::complete(cfg.n).edges().to_vec();
                index::sample(&mut rng, all.len(), cfg.m).into_iter().map(|i| all[i]).collect()
            } else {
                draw(&mut rng, cfg.m, cfg.model, |rng| random_edge(rng, cfg.n))
            };
            let graph = Graph::new(cfg.n, edges).expect("generated edges are well formed");
            Instance::Coloring(Coloring::new(graph, cfg.k).expect("palette validated"))
        }
    };
    Ok(instance)
}

/// A random acyclic network with `factors` constraints, grown by hanging each
/// new factor off a uniformly chosen existing variable. Clause widths are
/// drawn from `1..=max_width`; edges always have width 2.
pub fn random_tree_csp<R: Rng + ?Sized>(rng: &mut R, rule: Rule, factors: usize, max_width: usize) -> Csp {
    let mut n = 1;
    let mut out = Vec::with_capacity(factors);
    for _ in 0..factors {
        let anchor = rng.gen_range(0..n);
        let width = if rule.is_formula() { rng.gen_range(1..=max_width.max(1)) } else { 2 };
        let mut vars = vec![anchor];
        vars.extend(n..n + width - 1);
        n += width - 1;
        out.push(match rule {
            Rule::Coloring { .. } => Factor::edge(vars[0], vars[1]),
            _ => {
                let signs = (0..width).map(|_| rng.gen()).collect();
                Factor::clause(vars, signs)
            }
        });
    }
    Csp::new(rule, n, out)
}

fn draw<T, R>(rng: &mut R, m: usize, model: ConstraintModel, mut sample: impl FnMut(&mut R) -> T) -> Vec<T>
where
    T: Clone + Eq + std::hash::Hash,
    R: Rng,
{
    match model {
        ConstraintModel::Iid => (0..m).map(|_| sample(rng)).collect(),
        ConstraintModel::DistinctSet => {
            let mut seen = HashSet::with_capacity(m);
            let mut out = Vec::with_capacity(m);
            while out.len() < m {
                let c = sample(rng);
                if seen.insert(c.clone()) {
                    out.push(c);
                }
            }
            out
        }
    }
}

/// `k` distinct variables uniformly among the `C(n, k)` sets, uniform signs.
/// Literals are sorted by variable so equal clauses compare equal.
fn random_clause<R: Rng>(rng: &mut R, n: usize, k: usize) -> Clause {
    let mut vars = index::sample(rng, n, k).into_vec();
    vars.sort_unstable();
    let literals = vars.into_iter().map(|v| Literal::new(v + 1, rng.gen())).collect();
    Clause::new(literals).expect("distinct variables")
}

fn random_edge<R: Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let u = rng.gen_range(0..n);
    let mut v = rng.gen_range(0..n - 1);
    if v >= u {
        v += 1;
    }
    (u.min(v) + 1, u.max(v) + 1)
}

fn all_clauses(n: usize, k: usize) -> Vec<Clause> {
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (1..=k).collect();
    loop {
        for signs in 0..1u32 << k {
            let lits = combo.iter().enumerate().map(|(i, &v)| Literal::new(v, signs >> i & 1 == 1)).collect();
            out.push(Clause::new(lits).expect("distinct variables"));
        }
        // next k-combination of 1..=n in lexicographic order
        let Some(i) = (0..k).rev().find(|&i| combo[i] < n - (k - 1 - i)) else {
            return out;
        };
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

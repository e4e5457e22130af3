//! Shape of an enumerated solution set: connected components of the
//! Hamming-distance-1 graph, their separation, and frozen variables.
//!
//! Variables are 0-based here; solutions are referred to by their index in
//! the [`SolutionSet`].

use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact::SolutionSet;
use crate::model::Assignment;

/// Largest supported variable count (one bit per variable in a `u128` mask).
pub const MAX_GEOMETRY_VARS: usize = 128;

/// Default number of reference solutions in a [`freezing_profile`].
pub const DEFAULT_FROZEN_SAMPLE: usize = 4000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("solution set is truncated at its cap; geometry needs every solution")]
    NotExhaustive,
    #[error("solution set is empty")]
    Empty,
    #[error("{0} variables exceed the supported {MAX_GEOMETRY_VARS}")]
    TooManyVariables(usize),
    #[error("reference assignment is not a solution")]
    NotASolution,
    #[error("delta {0} outside (0, 1]")]
    BadDelta(String),
}

fn check(s: &SolutionSet) -> Result<(), GeometryError> {
    if !s.exhaustive {
        return Err(GeometryError::NotExhaustive);
    }
    if s.n > MAX_GEOMETRY_VARS {
        return Err(GeometryError::TooManyVariables(s.n));
    }
    Ok(())
}

/// Bitmask of the variables where `a` and `b` differ.
fn diff_mask(a: &[u8], b: &[u8]) -> u128 {
    a.iter().zip(b).enumerate().filter(|(_, (x, y))| x != y).fold(0u128, |m, (i, _)| m | 1 << i)
}

/// Solutions packed into `u128`s with `bits` bits per variable, when they fit.
fn pack(s: &SolutionSet) -> Option<(u32, Vec<u128>)> {
    let bits = usize::BITS - (s.domain_size() - 1).leading_zeros();
    let bits = bits.max(1);
    if bits as usize * s.n > 128 {
        return None;
    }
    let rows = s
        .solutions
        .iter()
        .map(|a| a.codes().iter().enumerate().fold(0u128, |acc, (i, &c)| acc | (c as u128) << (i as u32 * bits)))
        .collect();
    Some((bits, rows))
}

struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n as u32).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        let (lo, hi) = if self.rank[a as usize] < self.rank[b as usize] { (a, b) } else { (b, a) };
        self.parent[lo as usize] = hi;
        if self.rank[lo as usize] == self.rank[hi as usize] {
            self.rank[hi as usize] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub solution_count: usize,
    /// Component of every solution; ids are numbered by first appearance.
    pub component_of: Vec<usize>,
    /// Component sizes, largest first.
    pub sizes: Vec<usize>,
    pub dominant_fraction: f64,
    /// Minimum Hamming distance between solutions of different components.
    pub separation: Option<usize>,
}

impl ClusterReport {
    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    /// Heuristic: the largest component holds at least `1 - 1/ln(|S| + 2)` of all solutions.
    pub fn essentially_connected(&self) -> bool {
        self.dominant_fraction >= 1.0 - 1.0 / ((self.solution_count + 2) as f64).ln()
    }

    /// `(size, how many components have it)`, largest size first.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &s in &self.sizes {
            match out.last_mut() {
                Some((size, count)) if *size == s => *count += 1,
                _ => out.push((s, 1)),
            }
        }
        out
    }
}

/// Connected components of the graph joining solutions at Hamming distance 1.
///
/// Two solutions are adjacent exactly when, for some variable `i`, they agree
/// everywhere except at `i`; hashing every solution under each of its `n`
/// "variable `i` blanked" keys finds all adjacent pairs in `O(|S| n)`.
pub fn solution_components(s: &SolutionSet) -> Result<ClusterReport, GeometryError> {
    check(s)?;
    if s.is_empty() {
        return Err(GeometryError::Empty);
    }
    let count = s.len();
    let mut dsu = DisjointSets::new(count);
    match pack(s) {
        Some((bits, rows)) => {
            let field = (1u128 << bits) - 1;
            let mut first: HashMap<(u32, u128), u32> = HashMap::with_capacity(count);
            for i in 0..s.n as u32 {
                first.clear();
                let blank = !(field << (i * bits));
                for (idx, &row) in rows.iter().enumerate() {
                    let rep = *first.entry((i, row & blank)).or_insert(idx as u32);
                    dsu.union(rep, idx as u32);
                }
            }
        }
        None => {
            let mut first: HashMap<Vec<u8>, u32> = HashMap::with_capacity(count);
            for i in 0..s.n {
                first.clear();
                for (idx, a) in s.solutions.iter().enumerate() {
                    let mut key = a.codes().to_vec();
                    key[i] = u8::MAX;
                    let rep = *first.entry(key).or_insert(idx as u32);
                    dsu.union(rep, idx as u32);
                }
            }
        }
    }

    let mut id_of_root: HashMap<u32, usize> = HashMap::new();
    let mut component_of = Vec::with_capacity(count);
    let mut sizes = Vec::new();
    for idx in 0..count as u32 {
        let root = dsu.find(idx);
        let next = id_of_root.len();
        let id = *id_of_root.entry(root).or_insert(next);
        if id == sizes.len() {
            sizes.push(0);
        }
        sizes[id] += 1;
        component_of.push(id);
    }
    let separation = separation(s, &component_of, sizes.len());
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ClusterReport { solution_count: count, dominant_fraction: sizes[0] as f64 / count as f64, component_of, sizes, separation })
}

fn separation(s: &SolutionSet, component_of: &[usize], components: usize) -> Option<usize> {
    if components < 2 {
        return None;
    }
    // distance 2 across components shows up as a shared doubly-blanked key
    let mut first: HashMap<Vec<u8>, usize> = HashMap::new();
    for i in 0..s.n {
        for j in i + 1..s.n {
            first.clear();
            for (idx, a) in s.solutions.iter().enumerate() {
                let mut key = a.codes().to_vec();
                key[i] = u8::MAX;
                key[j] = u8::MAX;
                let rep = *first.entry(key).or_insert(idx);
                if component_of[rep] != component_of[idx] {
                    return Some(2);
                }
            }
        }
    }
    let codes: Vec<&[u8]> = s.solutions.iter().map(Assignment::codes).collect();
    (0..codes.len())
        .into_par_iter()
        .filter_map(|a| {
            (a + 1..codes.len())
                .filter(|&b| component_of[a] != component_of[b])
                .map(|b| diff_mask(codes[a], codes[b]).count_ones() as usize)
                .min()
        })
        .min()
}

/// Minimum distance between solutions of different components, if there are several.
pub fn cluster_separation(report: &ClusterReport) -> Option<usize> {
    report.separation
}

/// Distance a flip must reach to count as far: `ceil(delta * n)`, robust to rounding.
pub fn frozen_threshold(delta: f64, n: usize) -> usize {
    (delta * n as f64 - 1e-9).ceil().max(0.0) as usize
}

fn check_delta(delta: f64) -> Result<(), GeometryError> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(GeometryError::BadDelta(delta.to_string()))
    }
}

/// Variables not flipped by any solution closer than `threshold` to `sigma`.
fn frozen_mask(codes: &[&[u8]], sigma: &[u8], threshold: usize, n: usize) -> u128 {
    let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let near = codes
        .iter()
        .map(|tau| diff_mask(sigma, tau))
        .filter(|d| (d.count_ones() as usize) < threshold)
        .fold(0u128, |acc, d| acc | d);
    all & !near
}

fn mask_vars(mask: u128) -> Vec<usize> {
    (0..128).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Variables `x` such that every solution giving `x` a different value than
/// `sigma` lies at distance at least `ceil(delta * n)`; variables no
/// solution flips count as frozen.
pub fn frozen_variables(s: &SolutionSet, sigma: &Assignment, delta: f64) -> Result<Vec<usize>, GeometryError> {
    check(s)?;
    check_delta(delta)?;
    if !s.contains(sigma) {
        return Err(GeometryError::NotASolution);
    }
    let codes: Vec<&[u8]> = s.solutions.iter().map(Assignment::codes).collect();
    Ok(mask_vars(frozen_mask(&codes, sigma.codes(), frozen_threshold(delta, s.n), s.n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrozenProfile {
    pub delta: f64,
    pub threshold: usize,
    /// Indices of the reference solutions examined.
    pub references: Vec<usize>,
    /// Frozen variables of each reference solution.
    pub frozen: Vec<Vec<usize>>,
    /// Share of (reference, variable) pairs that are frozen.
    pub fraction: f64,
    /// True when `references` is a uniform sample rather than all of the set.
    pub sampled: bool,
}

/// Frozen variables of every solution, or of `sample_limit` solutions drawn
/// uniformly (seeded by `seed`) when the set is larger.
pub fn freezing_profile(s: &SolutionSet, delta: f64, sample_limit: usize, seed: u64) -> Result<FrozenProfile, GeometryError> {
    check(s)?;
    check_delta(delta)?;
    let sampled = s.len() > sample_limit;
    let references: Vec<usize> = if sampled {
        let mut picked = index::sample(&mut ChaCha8Rng::seed_from_u64(seed), s.len(), sample_limit).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..s.len()).collect()
    };
    let threshold = frozen_threshold(delta, s.n);
    let codes: Vec<&[u8]> = s.solutions.iter().map(Assignment::codes).collect();
    let masks: Vec<u128> = references.par_iter().map(|&r| frozen_mask(&codes, codes[r], threshold, s.n)).collect();
    let frozen_pairs: u64 = masks.iter().map(|m| m.count_ones() as u64).sum();
    let pairs = references.len() * s.n;
    Ok(FrozenProfile {
        delta,
        threshold,
        fraction: if pairs == 0 { 0.0 } else { frozen_pairs as f64 / pairs as f64 },
        frozen: masks.into_iter().map(mask_vars).collect(),
        references,
        sampled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrozenSummary {
    pub delta: f64,
    pub fraction: f64,
    pub sampled: bool,
}

/// Serializable summary of one solution set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub solution_count: usize,
    pub components: usize,
    /// `(size, count)` pairs, largest size first.
    pub size_histogram: Vec<(usize, usize)>,
    pub dominant_fraction: f64,
    pub separation: Option<usize>,
    pub essentially_connected: bool,
    pub frozen: Vec<FrozenSummary>,
}

impl GeometryReport {
    pub fn compute(s: &SolutionSet, deltas: &[f64], sample_limit: usize, seed: u64) -> Result<Self, GeometryError> {
        let clusters = solution_components(s)?;
        let frozen = deltas
            .iter()
            .map(|&delta| {
                freezing_profile(s, delta, sample_limit, seed).map(|p| FrozenSummary { delta, fraction: p.fraction, sampled: p.sampled })
            })
            .collect::<Result<_, _>>()?;
        Ok(GeometryReport {
            solution_count: clusters.solution_count,
            components: clusters.num_components(),
            size_histogram: clusters.size_histogram(),
            dominant_fraction: clusters.dominant_fraction,
            separation: clusters.separation,
            essentially_connected: clusters.essentially_connected(),
            frozen,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate_solutions;
    use crate::model::{Clause, Graph, Instance, Semantics};

    fn clause_set(semantics: Semantics) -> SolutionSet {
        let c = Clause::from_dimacs(&[1, 2, 3]).unwrap();
        enumerate_solutions(&Instance::formula(3, 3, vec![c], semantics).unwrap(), 100)
    }

    fn coloring_set(g: Graph, k: usize) -> SolutionSet {
        enumerate_solutions(&Instance::coloring(g, k).unwrap(), 10_000)
    }

    #[test]
    fn clause_solution_sets_are_connected() {
        for (semantics, size) in [(Semantics::Sat, 7), (Semantics::Nae, 6)] {
            let r = solution_components(&clause_set(semantics)).unwrap();
            assert_eq!(r.sizes, vec![size]);
            assert_eq!(r.dominant_fraction, 1.0);
            assert_eq!(cluster_separation(&r), None);
            assert!(r.essentially_connected());
        }
    }

    #[test]
    fn two_colored_path_has_separated_components() {
        let s = coloring_set(Graph::path(3), 2);
        let r = solution_components(&s).unwrap();
        assert_eq!(r.sizes, vec![1, 1]);
        assert_eq!(r.component_of, vec![0, 1]);
        assert_eq!(cluster_separation(&r), Some(3));
        assert_eq!(r.size_histogram(), vec![(1, 2)]);
        for sigma in &s.solutions {
            assert_eq!(frozen_variables(&s, sigma, 1.0).unwrap(), vec![0, 1, 2]);
        }
        assert_eq!(freezing_profile(&s, 1.0, 100, 0).unwrap().fraction, 1.0);
    }

    #[test]
    fn triangle_freezing_threshold() {
        let s = coloring_set(Graph::complete(3), 3);
        assert_eq!(s.len(), 6);
        for sigma in &s.solutions {
            assert_eq!(frozen_variables(&s, sigma, 2.0 / 3.0).unwrap(), vec![0, 1, 2]);
            assert!(frozen_variables(&s, sigma, 0.7).unwrap().is_empty());
        }
        assert_eq!(frozen_threshold(2.0 / 3.0, 3), 2);
        assert_eq!(frozen_threshold(0.7, 3), 3);
    }

    #[test]
    fn frozen_fractions_of_small_sets() {
        let empty = enumerate_solutions(&Instance::formula(4, 3, vec![], Semantics::Sat).unwrap(), 100);
        let p = freezing_profile(&empty, 0.5, 100, 0).unwrap();
        assert_eq!((p.fraction, p.sampled), (0.0, false));
        // σ with one true variable x: every flip of x lands at distance exactly 2
        let single = clause_set(Semantics::Sat);
        assert!((freezing_profile(&single, 2.0 / 3.0, 100, 0).unwrap().fraction - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(freezing_profile(&single, 1.0, 100, 0).unwrap().fraction, 0.0);
    }

    #[test]
    fn contract_errors() {
        let mut s = clause_set(Semantics::Sat);
        let outsider = Assignment::from_bools(&[false, false, false]);
        assert_eq!(frozen_variables(&s, &outsider, 0.5), Err(GeometryError::NotASolution));
        assert!(matches!(frozen_variables(&s, &s.solutions[0].clone(), 0.0), Err(GeometryError::BadDelta(_))));
        s.exhaustive = false;
        assert_eq!(solution_components(&s), Err(GeometryError::NotExhaustive));
        let none = coloring_set(Graph::complete(3), 2);
        assert_eq!(solution_components(&none), Err(GeometryError::Empty));
    }

    #[test]
    fn sampling_is_flagged_and_reproducible() {
        let s = enumerate_solutions(&Instance::formula(8, 3, vec![], Semantics::Sat).unwrap(), 1000);
        let a = freezing_profile(&s, 0.5, 50, 9).unwrap();
        assert!(a.sampled);
        assert_eq!(a.references.len(), 50);
        assert_eq!(a, freezing_profile(&s, 0.5, 50, 9).unwrap());
    }

    #[test]
    fn wildcard_hashing_matches_pairwise_components() {
        use crate::model::{gen_instance, GeneratorConfig, ProblemKind};
        for (kind, k, m) in [(ProblemKind::KNae, 3, 14), (ProblemKind::KSat, 3, 30), (ProblemKind::KColoring, 3, 14)] {
            for seed in 0..10 {
                let inst = gen_instance(&GeneratorConfig::new(kind, 10, k, m, seed)).unwrap();
                let s = enumerate_solutions(&inst, 100_000);
                let Ok(r) = solution_components(&s) else { continue };
                let mut dsu = DisjointSets::new(s.len());
                for a in 0..s.len() {
                    for b in a + 1..s.len() {
                        if s.solutions[a].hamming(&s.solutions[b]) == 1 {
                            dsu.union(a as u32, b as u32);
                        }
                    }
                }
                for a in 0..s.len() {
                    for b in 0..s.len() {
                        let same = dsu.find(a as u32) == dsu.find(b as u32);
                        assert_eq!(same, r.component_of[a] == r.component_of[b]);
                    }
                }
                if let Some(sep) = r.separation {
                    let brute = (0..s.len())
                        .flat_map(|a| (0..s.len()).map(move |b| (a, b)))
                        .filter(|&(a, b)| r.component_of[a] != r.component_of[b])
                        .map(|(a, b)| s.solutions[a].hamming(&s.solutions[b]))
                        .min()
                        .unwrap();
                    assert_eq!(sep, brute);
                    assert!(sep >= 2);
                }
            }
        }
    }
}

//! First and second moments of the solution count under the IID constraint
//! model, and the density bounds they imply.
//!
//! Everything is evaluated in the log domain; the plain-valued wrappers
//! overflow to infinity long before the log values lose precision.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ConstraintModel, GeneratorConfig, ProblemKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("closed forms hold only for the iid constraint model")]
    UnsupportedModel,
    #[error("exact coloring moments are limited to n <= {limit}, got {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("overlap {z} outside 0..={n}")]
    OverlapOutOfRange { z: usize, n: usize },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("second moment vanishes while the first does not")]
    Inconsistent,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// `ln(Σ exp(t))`, ignoring `-inf` terms; `-inf` for an empty sum.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut acc = Compensated::default();
    for &t in terms {
        acc.add((t - max).exp());
    }
    max + acc.value().ln()
}

/// `ln(i!)` for `i` in `0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Compensated::default();
    out.push(0.0);
    for i in 1..=n {
        acc.add((i as f64).ln());
        out.push(acc.value());
    }
    out
}

fn ln_choose(lf: &[f64], n: usize, r: usize) -> f64 {
    if r > n {
        f64::NEG_INFINITY
    } else {
        lf[n] - lf[r] - lf[n - r]
    }
}

/// `m * ln(p)` with the convention `0^0 = 1`.
fn ln_pow(p: f64, m: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        m as f64 * p.ln()
    }
}

fn check_params(kind: ProblemKind, n: usize, m: usize, k: usize) -> Result<(), MomentError> {
    if kind.is_formula() {
        if k < 2 {
            return Err(MomentError::Invalid(format!("clause width {k} < 2")));
        }
        if m > 0 && k > n {
            return Err(MomentError::Invalid(format!("clause width {k} exceeds n = {n}")));
        }
    } else {
        if k < 1 {
            return Err(MomentError::Invalid("empty palette".into()));
        }
        if m > 0 && n < 2 {
            return Err(MomentError::Invalid(format!("no edges exist on {n} vertices")));
        }
    }
    Ok(())
}

/// Probability that one uniform random constraint holds under a fixed assignment.
fn single_constraint_prob(kind: ProblemKind, k: usize) -> f64 {
    match kind {
        ProblemKind::KSat => 1.0 - 0.5f64.powi(k as i32),
        ProblemKind::KNae => 1.0 - 0.5f64.powi(k as i32 - 1),
        ProblemKind::KColoring => 1.0 - 1.0 / k as f64,
    }
}

/// `ln E|S|` for `m` iid constraints on `n` variables.
pub fn ln_expected_count(kind: ProblemKind, n: usize, m: usize, k: usize) -> Result<f64, MomentError> {
    check_params(kind, n, m, k)?;
    Ok(match kind {
        ProblemKind::KSat | ProblemKind::KNae => {
            n as f64 * std::f64::consts::LN_2 + ln_pow(single_constraint_prob(kind, k), m)
        }
        ProblemKind::KColoring => ln_coloring_count(n, m, k)?,
    })
}

pub fn expected_count(kind: ProblemKind, n: usize, m: usize, k: usize) -> Result<f64, MomentError> {
    ln_expected_count(kind, n, m, k).map(f64::exp)
}

/// Exact coloring first moment.
///
/// A uniform coloring has color-class sizes `(n_1..n_k)` with multinomial
/// probability; it survives one uniform edge with probability
/// `1 - b/C(n,2)`, `b = Σ C(n_i, 2)`. The distribution of `b` is built one
/// color class at a time, each class size being binomial in the vertices
/// still uncolored.
fn ln_coloring_count(n: usize, m: usize, k: usize) -> Result<f64, MomentError> {
    let ln_total = n as f64 * (k as f64).ln();
    if m == 0 {
        return Ok(ln_total);
    }
    if n > COLORING_DP_LIMIT {
        return Err(MomentError::TooLarge { n, limit: COLORING_DP_LIMIT });
    }
    let pairs = n * (n - 1) / 2;
    let lf = ln_factorials(n);
    // dist[rem][b]: probability that `rem` vertices remain after the classes so far, with `b`
    // monochromatic pairs; b never exceeds C(n - rem, 2) before the last class
    let rows = || (0..=n).map(|rem| vec![0.0f64; if rem == 0 { pairs + 1 } else { (n - rem) * (n - rem).saturating_sub(1) / 2 + 1 }]).collect::<Vec<_>>();
    let mut dist = rows();
    dist[n][0] = 1.0;
    for class in 0..k {
        let left = (k - class) as f64;
        let mut next = rows();
        for (rem, row) in dist.iter().enumerate() {
            for (b, &p) in row.iter().enumerate().filter(|(_, &p)| p > 0.0) {
                if class + 1 == k {
                    next[0][b + rem * rem.saturating_sub(1) / 2] += p;
                    continue;
                }
                for size in 0..=rem {
                    let ln_w = ln_choose(&lf, rem, size) - size as f64 * left.ln()
                        + (rem - size) as f64 * ((left - 1.0) / left).ln();
                    next[rem - size][b + size * size.saturating_sub(1) / 2] += p * ln_w.exp();
                }
            }
        }
        dist = next;
    }
    let terms: Vec<f64> = dist[0]
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(b, &p)| p.ln() + ln_pow(1.0 - b as f64 / pairs as f64, m))
        .collect();
    Ok(ln_total + log_sum_exp(&terms))
}

/// Largest `n` for the exact coloring first moment.
pub const COLORING_DP_LIMIT: usize = 256;

/// `ln(k^n (1 - 1/k)^m)`, the product approximation to the coloring first moment.
pub fn ln_coloring_asymptotic_estimate(n: usize, m: usize, k: usize) -> f64 {
    n as f64 * (k as f64).ln() + ln_pow(1.0 - 1.0 / k as f64, m)
}

/// Large-k first-moment density bounds: `2^k ln 2`, `2^(k-1) ln 2`, `k ln k`.
pub fn first_moment_density_bound(kind: ProblemKind, k: usize) -> f64 {
    let k_f = k as f64;
    match kind {
        ProblemKind::KSat => 2f64.powi(k as i32) * std::f64::consts::LN_2,
        ProblemKind::KNae => 2f64.powi(k as i32 - 1) * std::f64::consts::LN_2,
        ProblemKind::KColoring => k_f * k_f.ln(),
    }
}

/// Density at which `d (p)^r` crosses 1 exactly, `p` the probability that
/// one constraint holds; slightly below [`first_moment_density_bound`].
pub fn first_moment_root(kind: ProblemKind, k: usize) -> f64 {
    let domain = if kind.is_formula() { 2.0f64 } else { k as f64 };
    domain.ln() / -single_constraint_prob(kind, k).ln()
}

/// Best known large-k densities reached by efficient algorithms.
pub fn algorithmic_density(kind: ProblemKind, k: usize) -> f64 {
    let k_f = k as f64;
    match kind {
        ProblemKind::KSat => 2f64.powi(k as i32) * k_f.ln() / k_f,
        ProblemKind::KNae => 2f64.powi(k as i32 - 1) * k_f.ln() / k_f,
        ProblemKind::KColoring => 0.5 * k_f * k_f.ln(),
    }
}

/// For each `j` in `0..=k`, the number of sign patterns making a width-`k`
/// clause NAE-satisfied by two assignments that agree on exactly `j` of its
/// variables.
fn nae_sign_pattern_counts(k: usize) -> Vec<u64> {
    assert!(k < 32, "clause width {k} too large to enumerate sign patterns");
    let full = (1u64 << k) - 1;
    (0..=k)
        .map(|j| {
            // the second assignment flips the truth of literals j..k
            let flip = full & !((1u64 << j) - 1);
            (0..=full).filter(|&s| s != 0 && s != full && (s ^ flip) != 0 && (s ^ flip) != full).count() as u64
        })
        .collect()
}

/// Probability that one uniform random k-NAE clause is satisfied by both of
/// two assignments agreeing on exactly `z` of the `n` variables.
pub fn nae_pair_prob(n: usize, k: usize, z: usize) -> Result<f64, MomentError> {
    if z > n {
        return Err(MomentError::OverlapOutOfRange { z, n });
    }
    check_params(ProblemKind::KNae, n, 1, k)?;
    let lf = ln_factorials(n);
    Ok(pair_prob_with(&lf, &nae_sign_pattern_counts(k), n, k, z))
}

fn pair_prob_with(lf: &[f64], counts: &[u64], n: usize, k: usize, z: usize) -> f64 {
    let ln_clauses = ln_choose(lf, n, k);
    let patterns = (1u64 << k) as f64;
    let mut acc = Compensated::default();
    for (j, &count) in counts.iter().enumerate() {
        let ln_split = ln_choose(lf, z, j) + ln_choose(lf, n - z, k - j) - ln_clauses;
        if ln_split > f64::NEG_INFINITY {
            acc.add(ln_split.exp() * count as f64 / patterns);
        }
    }
    acc.value().clamp(0.0, 1.0)
}

/// `ln E|S|^2` for k-NAE: `n ln 2 + ln Σ_z C(n,z) q(z)^m`.
pub fn ln_nae_second_moment(n: usize, m: usize, k: usize) -> Result<f64, MomentError> {
    check_params(ProblemKind::KNae, n, m, k)?;
    if m == 0 {
        return Ok(2.0 * n as f64 * std::f64::consts::LN_2);
    }
    let lf = ln_factorials(n);
    let counts = nae_sign_pattern_counts(k);
    let terms: Vec<f64> = (0..=n)
        .map(|z| {
            ln_choose(&lf, n, z) + ln_pow(pair_prob_with(&lf, &counts, n, k, z), m)
        })
        .collect();
    Ok(n as f64 * std::f64::consts::LN_2 + log_sum_exp(&terms))
}

pub fn nae_second_moment(n: usize, m: usize, k: usize) -> Result<f64, MomentError> {
    ln_nae_second_moment(n, m, k).map(f64::exp)
}

/// `E(X)^2 / E(X^2)` for the k-NAE solution count, clamped to `[0, 1]`.
pub fn paley_zygmund_bound(n: usize, m: usize, k: usize) -> Result<f64, MomentError> {
    let ln_first = ln_expected_count(ProblemKind::KNae, n, m, k)?;
    let ln_second = ln_nae_second_moment(n, m, k)?;
    if ln_first == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if ln_second == f64::NEG_INFINITY {
        return Err(MomentError::Inconsistent);
    }
    Ok((2.0 * ln_first - ln_second).exp().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub kind: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub expected_count: f64,
    pub ln_expected_count: f64,
    /// False when the exact coloring DP was out of range and the first
    /// moment is the asymptotic estimate.
    pub exact: bool,
    /// Coloring only: `k^n (1 - 1/k)^m`.
    pub asymptotic_estimate: Option<f64>,
    /// k-NAE only.
    pub second_moment: Option<f64>,
    pub ln_second_moment: Option<f64>,
    pub pz_bound: Option<f64>,
    pub first_moment_density_bound: f64,
    pub first_moment_root: f64,
}

impl MomentReport {
    pub fn compute(kind: ProblemKind, n: usize, m: usize, k: usize) -> Result<Self, MomentError> {
        let (ln_first, exact) = match ln_expected_count(kind, n, m, k) {
            Err(MomentError::TooLarge { .. }) if kind == ProblemKind::KColoring => (ln_coloring_asymptotic_estimate(n, m, k), false),
            other => (other?, true),
        };
        let ln_second = if kind == ProblemKind::KNae { Some(ln_nae_second_moment(n, m, k)?) } else { None };
        let pz_bound = if kind == ProblemKind::KNae { Some(paley_zygmund_bound(n, m, k)?) } else { None };
        Ok(MomentReport {
            kind,
            n,
            m,
            k,
            expected_count: ln_first.exp(),
            ln_expected_count: ln_first,
            exact,
            asymptotic_estimate: (kind == ProblemKind::KColoring).then(|| ln_coloring_asymptotic_estimate(n, m, k).exp()),
            second_moment: ln_second.map(f64::exp),
            ln_second_moment: ln_second,
            pz_bound,
            first_moment_density_bound: first_moment_density_bound(kind, k),
            first_moment_root: first_moment_root(kind, k),
        })
    }

    pub fn for_config(cfg: &GeneratorConfig) -> Result<Self, MomentError> {
        if cfg.model != ConstraintModel::Iid {
            return Err(MomentError::UnsupportedModel);
        }
        MomentReport::compute(cfg.kind, cfg.n, cfg.m, cfg.k)
    }
}

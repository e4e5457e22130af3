//! Fixed benchmark inputs, shared by the bench targets.

use randcsp::model::{gen_instance, GeneratorConfig, Instance, ProblemKind};

/// A reproducible random instance at density `r`.
pub fn instance(kind: ProblemKind, n: usize, k: usize, r: f64, seed: u64) -> Instance {
    let cfg = GeneratorConfig::with_density(kind, n, k, r, seed).expect("valid density");
    gen_instance(&cfg).expect("valid configuration")
}

/// The first satisfiable instance among seeds `seed, seed + 1, ...`.
pub fn satisfiable(kind: ProblemKind, n: usize, k: usize, r: f64, seed: u64) -> Instance {
    (seed..)
        .map(|s| instance(kind, n, k, r, s))
        .find(|inst| randcsp::exact::decide(inst).is_sat())
        .expect("some seed is satisfiable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_reproducible() {
        let a = instance(ProblemKind::KSat, 50, 3, 4.0, 1);
        assert_eq!(a, instance(ProblemKind::KSat, 50, 3, 4.0, 1));
        assert_eq!(a.m(), 200);
        assert!(randcsp::exact::decide(&satisfiable(ProblemKind::KNae, 18, 3, 1.5, 0)).is_sat());
    }
}

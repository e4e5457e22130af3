use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randcsp::model::{random_tree_csp, Rule};
use randcsp::solvers::{bp_marginal, exact_marginal, BpParams, MarginalError, MarginalQuery};

fn rule_from(code: u8) -> Rule {
    match code % 4 {
        0 => Rule::Sat,
        1 => Rule::Nae,
        2 => Rule::Coloring { palette: 2 },
        _ => Rule::Coloring { palette: 3 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bp_is_exact_on_trees(seed in any::<u64>(), rule in 0u8..4, factors in 0usize..9, pin_rate in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = rule_from(rule);
        let csp = random_tree_csp(&mut rng, rule, factors, 4);
        let d = csp.domain_size() as u8;
        let target = rng.gen_range(0..csp.n);
        let pinned = (0..csp.n)
            .map(|v| if v != target && rng.gen_bool(pin_rate) { rng.gen_range(0..d) } else { u8::MAX })
            .collect();
        let q = MarginalQuery::new(&csp, pinned, target).unwrap();
        match (exact_marginal(&q, 40), bp_marginal(&q, &BpParams::default())) {
            (Ok(ex), Ok(bp)) => {
                prop_assert!(bp.converged);
                for (a, b) in ex.probs.iter().zip(&bp.probs) {
                    prop_assert!((a - b).abs() <= 1e-9, "exact {:?} bp {:?}", ex.probs, bp.probs);
                }
            }
            (Err(MarginalError::Inconsistent), Err(MarginalError::Inconsistent)) => {}
            (ex, bp) => prop_assert!(false, "exact {:?} vs bp {:?}", ex, bp),
        }
    }
}

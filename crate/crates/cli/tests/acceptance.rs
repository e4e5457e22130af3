//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randcsp::exact::{count_solutions, enumerate_solutions, SolutionSet};
use randcsp::factor_graph::FactorGraph;
use randcsp::geometry::frozen_variables;
use randcsp::harness::{geometry_experiment, mix_seed, sweep, GeometryConfig, Grid, Solver, SweepConfig};
use randcsp::model::{gen_instance, random_tree_csp, Csp, GeneratorConfig, ProblemKind, Rule};
use randcsp::moments::{expected_count, nae_second_moment, paley_zygmund_bound};
use randcsp::solvers::{bp_marginal, exact_marginal, BpParams, MarginalError, MarginalQuery};
use rayon::prelude::*;

const SEED: u64 = 20_240_601;
const UNASSIGNED: u8 = u8::MAX;

struct Suite {
    failed: usize,
}

impl Suite {
    fn check(&mut self, name: &str, started: Instant, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
        self.failed += usize::from(!pass);
    }
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: 0 };
    bp_tree_exactness(&mut suite);
    moments_match_enumeration(&mut suite);
    paley_zygmund_sandwich(&mut suite);
    first_moment_and_below_threshold(&mut suite);
    unit_clause_behavior(&mut suite);
    geometry_trend(&mut suite);
    symmetry(&mut suite);
    cli_determinism(&mut suite);
    println!("{} criteria failed", suite.failed);
    if suite.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn rule_of(i: usize) -> (ProblemKind, usize, Rule) {
    match i % 4 {
        0 => (ProblemKind::KSat, 3, Rule::Sat),
        1 => (ProblemKind::KNae, 3, Rule::Nae),
        2 => (ProblemKind::KColoring, 2, Rule::Coloring { palette: 2 }),
        _ => (ProblemKind::KColoring, 3, Rule::Coloring { palette: 3 }),
    }
}

/// Compares BP with enumeration at every free variable; returns (max gap, mismatches, inconsistent).
fn compare_all(csp: &Csp, pinned: &[u8]) -> (f64, usize, usize) {
    let (mut gap, mut bad, mut inconsistent) = (0.0f64, 0, 0);
    for target in (0..csp.n).filter(|&v| pinned[v] == UNASSIGNED) {
        let q = MarginalQuery::new(csp, pinned.to_vec(), target).unwrap();
        match (exact_marginal(&q, 64), bp_marginal(&q, &BpParams::default())) {
            (Ok(ex), Ok(bp)) if bp.converged => {
                gap = ex.probs.iter().zip(&bp.probs).map(|(a, b)| (a - b).abs()).fold(gap, f64::max);
            }
            (Err(MarginalError::Inconsistent), Err(MarginalError::Inconsistent)) => inconsistent += 1,
            _ => bad += 1,
        }
    }
    (gap, bad, inconsistent)
}

fn bp_tree_exactness(suite: &mut Suite) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut gap, mut bad, mut inconsistent, mut from_neighborhoods, mut max_vars) = (0.0f64, 0, 0, 0, 0);
    for case in 0..200 {
        let (kind, k, rule) = rule_of(case);
        // alternate grown trees with tree-shaped neighborhoods of sparse random instances
        let csp = if case % 2 == 0 {
            let (factors, width) = (rng.gen_range(1..=6), if rule.is_formula() { 4 } else { 2 });
            random_tree_csp(&mut rng, rule, factors, width)
        } else {
            loop {
                let r = if rule.is_formula() { 0.25 } else { 0.6 };
                let cfg = GeneratorConfig::with_density(kind, 400, k, r, rng.gen()).unwrap();
                let fg = FactorGraph::build(&gen_instance(&cfg).unwrap());
                let sub = fg.neighborhood(rng.gen_range(0..400), 6);
                if sub.is_tree() && sub.num_constraints() > 0 && sub.num_vars() <= 20 {
                    from_neighborhoods += 1;
                    break sub.csp;
                }
            }
        };
        max_vars = max_vars.max(csp.n);
        let d = csp.domain_size() as u8;
        let pinned: Vec<u8> = (0..csp.n).map(|_| if rng.gen_bool(0.2) { rng.gen_range(0..d) } else { UNASSIGNED }).collect();
        let (g, b, i) = compare_all(&csp, &pinned);
        gap = gap.max(g);
        bad += b;
        inconsistent += i;
    }
    suite.check(
        "BP-tree exactness",
        t,
        gap <= 1e-9 && bad == 0 && max_vars <= 20,
        format!(
            "200 acyclic networks ({from_neighborhoods} neighborhoods), <= {max_vars} variables, max |bp - exact| = {gap:.2e}, \
             {bad} mismatches, {inconsistent} jointly inconsistent"
        ),
    );
}

struct Stats {
    mean: f64,
    se: f64,
}

fn stats(xs: &[f64]) -> Stats {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Stats { mean, se: (var / n).sqrt() }
}

fn counts(kind: ProblemKind, n: usize, k: usize, m: usize, samples: usize, point: u64) -> Vec<f64> {
    (0..samples as u64)
        .into_par_iter()
        .map(|t| {
            let inst = gen_instance(&GeneratorConfig::new(kind, n, k, m, mix_seed(SEED, point, t))).unwrap();
            count_solutions(&inst) as f64
        })
        .collect()
}

fn moments_match_enumeration(suite: &mut Suite) {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for (ki, kind) in ProblemKind::ALL.into_iter().enumerate() {
        for m in [5, 10, 20] {
            let xs = counts(kind, 10, 3, m, 2000, (ki * 100 + m) as u64);
            let s = stats(&xs);
            let ex = expected_count(kind, 10, m, 3).unwrap();
            let z = (s.mean - ex) / s.se;
            pass &= z.abs() <= 3.0;
            lines.push(format!("{kind} m={m}: E={ex:.2} mean={:.2} z={z:+.2}", s.mean));
            if kind == ProblemKind::KNae {
                let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
                let s2 = stats(&sq);
                let ex2 = nae_second_moment(10, m, 3).unwrap();
                let z2 = (s2.mean - ex2) / s2.se;
                pass &= z2.abs() <= 3.0;
                lines.push(format!("knae m={m}: E2={ex2:.1} mean2={:.1} z={z2:+.2}", s2.mean));
            }
        }
    }
    suite.check("Moment formulas vs enumeration (n=10, k=3, 2000 samples, 3 SE)", t, pass, lines.join("; "));
}

fn paley_zygmund_sandwich(suite: &mut Suite) {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for m in [6, 12, 24] {
        let xs = counts(ProblemKind::KNae, 12, 3, m, 500, 1000 + m as u64);
        let p = xs.iter().filter(|&&c| c > 0.0).count() as f64 / 500.0;
        let sigma = (p * (1.0 - p) / 500.0).sqrt();
        let pz = paley_zygmund_bound(12, m, 3).unwrap();
        let upper = expected_count(ProblemKind::KNae, 12, m, 3).unwrap().min(1.0);
        let ok = pz - 3.0 * sigma <= p && p <= upper + 3.0 * sigma;
        pass &= ok;
        lines.push(format!("m={m}: pz={pz:.4} <= P={p:.3} (sigma {sigma:.4}) <= {upper:.4}"));
    }
    suite.check("Paley-Zygmund sandwich (3-NAE, n=12, 500 instances)", t, pass, lines.join("; "));
}

fn rates(kind: ProblemKind, k: usize, n: usize, rs: Vec<f64>, trials: usize, solver: Solver) -> Vec<f64> {
    let cfg = SweepConfig::new(kind, k, vec![n], Grid::Densities(rs), trials, SEED).solvers(vec![solver]);
    sweep(&cfg).unwrap().iter().map(|r| r.success_rate).collect()
}

fn first_moment_and_below_threshold(suite: &mut Suite) {
    let t = Instant::now();
    let r = rates(ProblemKind::KSat, 3, 30, vec![6.0], 200, Solver::Oracle)[0];
    suite.check("First-moment regime (3-SAT, n=30, r=6.0, 200 trials)", t, r <= 0.05, format!("sat_rate = {r:.3} (need <= 0.05)"));
    let t = Instant::now();
    let r = rates(ProblemKind::KSat, 3, 30, vec![3.0], 200, Solver::Oracle)[0];
    suite.check("Below-threshold satisfiability (3-SAT, n=30, r=3.0, 200 trials)", t, r >= 0.95, format!("sat_rate = {r:.3} (need >= 0.95)"));
}

fn unit_clause_behavior(suite: &mut Suite) {
    let t = Instant::now();
    let r = rates(ProblemKind::KSat, 3, 10_000, vec![2.0, 3.5], 100, Solver::UnitClause);
    suite.check(
        "UnitClause behavior (3-SAT, n=10^4, 100 trials)",
        t,
        r[0] >= 0.3 && r[0] > r[1],
        format!("success at r=2.0: {:.2}, at r=3.5: {:.2}", r[0], r[1]),
    );
}

fn geometry_trend(suite: &mut Suite) {
    let t = Instant::now();
    let cfg = GeometryConfig::new(ProblemKind::KNae, 3, 18, Grid::Densities(vec![1.0, 1.9]), 30, SEED);
    let s = geometry_experiment(&cfg).unwrap();
    let (a, b) = (&s.points[0], &s.points[1]);
    let comps = (a.median_components.unwrap_or(f64::NAN), b.median_components.unwrap_or(f64::NAN));
    let frozen = (a.frozen[0].median_fraction.unwrap_or(f64::NAN), b.frozen[0].median_fraction.unwrap_or(f64::NAN));
    let pass = a.solvable == 30 && b.solvable == 30 && comps.1 >= comps.0 && frozen.1 >= frozen.0;
    suite.check(
        "Geometry trend (3-NAE, n=18, 30 solvable instances, r 1.0 vs 1.9)",
        t,
        pass,
        format!(
            "median components {} -> {}, median 0.2-frozen fraction {:.4} -> {:.4}, unsat {} / {}",
            comps.0, comps.1, frozen.0, frozen.1, a.unsat, b.unsat
        ),
    );
}

fn permutations(k: u8) -> Vec<Vec<u8>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Checks that `g` maps `set` onto itself and preserves frozen sets. Returns violations found.
fn equivariance(set: &SolutionSet, maps: &[Vec<u8>], sample: usize, deltas: &[f64]) -> usize {
    let mut bad = 0;
    for (i, sigma) in set.solutions.iter().enumerate() {
        for perm in maps {
            let image = sigma.permute_values(perm);
            if !set.contains(&image) {
                bad += 1;
                continue;
            }
            if i < sample {
                for &d in deltas {
                    bad += usize::from(frozen_variables(set, sigma, d).unwrap() != frozen_variables(set, &image, d).unwrap());
                }
            }
        }
    }
    bad
}

fn symmetry(suite: &mut Suite) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5157);
    let deltas = [0.2, 0.5];
    let (mut odd, mut nae_bad, mut nae_sets, mut nae_solutions) = (0, 0, 0, 0);
    for i in 0..60 {
        let n = 6 + i % 7;
        let m = rng.gen_range(0..=2 * n);
        let inst = gen_instance(&GeneratorConfig::new(ProblemKind::KNae, n, 3, m, rng.gen())).unwrap();
        let set = enumerate_solutions(&inst, usize::MAX);
        odd += set.len() % 2;
        nae_bad += equivariance(&set, &[vec![1, 0]], 64, &deltas);
        nae_sets += 1;
        nae_solutions += set.len();
    }
    let (mut col_bad, mut col_sets, mut col_solutions) = (0, 0, 0);
    for i in 0..40 {
        let n = 6 + i % 7;
        let k = 3 + (i % 2) as u8;
        let m = rng.gen_range(n..=2 * n);
        let inst = gen_instance(&GeneratorConfig::new(ProblemKind::KColoring, n, k as usize, m, rng.gen())).unwrap();
        let set = enumerate_solutions(&inst, usize::MAX);
        col_bad += equivariance(&set, &permutations(k), 16, &deltas);
        col_sets += 1;
        col_solutions += set.len();
    }
    suite.check(
        "Symmetry suites (exhaustive, n <= 12)",
        t,
        odd == 0 && nae_bad == 0 && col_bad == 0,
        format!(
            "{nae_sets} NAE sets ({nae_solutions} solutions): {odd} odd sizes, {nae_bad} complement violations; \
             {col_sets} coloring sets ({col_solutions} solutions): {col_bad} permutation violations; frozen sets at delta 0.2, 0.5"
        ),
    );
}

fn cli_determinism(suite: &mut Suite) {
    let t = Instant::now();
    let bin = env!("CARGO_BIN_EXE_randcsp");
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let run = |args: &[String], threads: Option<&str>| {
        let mut cmd = Command::new(bin);
        cmd.args(args);
        if let Some(th) = threads {
            cmd.env("RAYON_NUM_THREADS", th);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    let sv = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<String>>();

    run(&sv(&["gen", "--problem", "knae", "--n", "14", "--r", "1.2", "--seed", "5", "--out", &p("inst.cnf")]), None);
    let inst = p("inst.cnf");
    let commands: Vec<(&str, Vec<String>, Vec<String>)> = vec![
        ("gen", sv(&["gen", "--problem", "kcol", "--k", "3", "--n", "30", "--r", "2.0", "--seed", "9"]), vec![]),
        ("solve unit-clause", sv(&["solve", "--n", "200", "--r", "3.0", "--seed", "2", "--solver", "unit-clause"]), vec![]),
        ("solve greedy-color", sv(&["solve", "--problem", "kcol", "--k", "3", "--n", "100", "--r", "1.5", "--solver", "greedy-color"]), vec![]),
        ("solve bp-decimation", sv(&["solve", "--in", &inst, "--solver", "bp-decimation", "--seed", "4"]), vec![]),
        ("solve oracle", sv(&["solve", "--in", &inst, "--solver", "oracle"]), vec![]),
        ("decide", sv(&["decide", "--in", &inst]), vec![]),
        ("enumerate", sv(&["enumerate", "--in", &inst]), vec![]),
        ("geometry file", sv(&["geometry", "--in", &inst, "--delta", "0.1,0.3"]), vec![]),
        (
            "geometry experiment",
            sv(&["geometry", "--problem", "knae", "--n", "12", "--r", "0.5,1.5", "--instances", "5"]),
            sv(&["--json-out"]),
        ),
        ("bounds", sv(&["bounds", "--problem", "kcol", "--k", "3", "--n", "40", "--r", "2.0"]), vec![]),
        (
            "sweep csv",
            sv(&["sweep", "--n", "16,24", "--r", "1,3,5", "--trials", "12", "--solver", "oracle,unit-clause,bp-decimation"]),
            vec![],
        ),
        ("sweep json", sv(&["sweep", "--problem", "kcol", "--n", "20", "--r", "1,2", "--trials", "8", "--solver", "oracle,greedy-color", "--format", "json"]), vec![]),
        ("threshold", sv(&["threshold", "--n", "20,30", "--trials", "30"]), vec![]),
    ];

    let mut differing = Vec::new();
    for (i, (name, args, extra)) in commands.iter().enumerate() {
        let outs: Vec<(String, Option<String>)> = (0..3).map(|rep| (p(&format!("{i}-{rep}.out")), extra.first().map(|_| p(&format!("{i}-{rep}.json"))))).collect();
        for (rep, (out, json)) in outs.iter().enumerate() {
            let mut a = args.clone();
            a.extend(["--out".to_string(), out.clone()]);
            if let Some(j) = json {
                a.extend(["--json-out".to_string(), j.clone()]);
            }
            // third run on one worker thread: scheduling must not matter
            run(&a, (rep == 2).then_some("1"));
        }
        let same = |a: &str, b: &str| fs::read(a).unwrap() == fs::read(b).unwrap();
        let mut ok = outs.windows(2).all(|w| same(&w[0].0, &w[1].0));
        if let (Some(a), Some(b), Some(c)) = (&outs[0].1, &outs[1].1, &outs[2].1) {
            ok &= same(a, b) && same(b, c);
        }
        if !ok {
            differing.push(*name);
        }
    }
    // plot-data over the sweep produced above
    let sweep_csv = p("10-0.out");
    let plot = |rep: usize| {
        let out = p(&format!("plot-{rep}.csv"));
        run(&sv(&["plot-data", "--in", &sweep_csv, "--x", "r", "--y", "success_rate", "--group", "n,solver", "--out", &out]), None);
        fs::read(out).unwrap()
    };
    if plot(0) != plot(1) {
        differing.push("plot-data");
    }
    suite.check(
        "CLI determinism (byte-identical reruns)",
        t,
        differing.is_empty(),
        format!("{} commands, 3 runs each (one single-threaded); differing: {:?}", commands.len() + 1, differing),
    );
}

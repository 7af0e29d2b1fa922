//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use bmdp_reduce::factored::{formulas_to_partition, DEFAULT_REGION_CAP};
use bmdp_reduce::harness::{
    brute_force_optimal, coarsest_homogeneous_oracle, extreme_row_vertex_oracle,
    generate_factored_mdp, is_epsilon_homogeneous, policy_iteration_oracle, policy_value_exact,
    random_bmdp, random_interval_row, random_mdp, rng, GeneratorConfig,
};
use bmdp_reduce::io::{
    parse_model, serialize_model, Model, PartitionFile,
};
use bmdp_reduce::reduction::{collapse_exact, verify_homogeneity};
use bmdp_reduce::{
    expand_to_explicit, extreme_transition_vector, induce_bmdp, ivi_bound_optimal,
    ivi_bound_policy, lift_block_function, policy_evaluate, reduce_factored, reduce_model,
    sample_member, symbolic_reduce, value_iterate, BlockFormula, Bmdp, DecisionTree,
    ExplicitMdp, Extremum, FactoredMdp, Partition, Policy,
};
use rand::Rng;

type Verdict = Result<String, String>;

static HOMOGENEITY_CHECKS: AtomicUsize = AtomicUsize::new(0);
static HOMOGENEITY_FAILURES: AtomicUsize = AtomicUsize::new(0);

const VALUE_TOL: f64 = 1e-6;
const SOLVER_TOL: f64 = 1e-9;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Records a homogeneity check of `partition` on `m`, using both the
/// library verifier and the harness's independent check.
fn record_homogeneity(m: &ExplicitMdp<f64>, partition: &Partition, epsilon: f64) -> Result<(), String> {
    HOMOGENEITY_CHECKS.fetch_add(1, Ordering::Relaxed);
    let report = verify_homogeneity(m, partition, epsilon).map_err(|e| e.to_string())?;
    let direct = is_epsilon_homogeneous(m, partition.blocks(), epsilon);
    if report.is_homogeneous() && direct {
        Ok(())
    } else {
        HOMOGENEITY_FAILURES.fetch_add(1, Ordering::Relaxed);
        Err(format!(
            "partition not {epsilon}-homogeneous (reward spread {}, transition spread {})",
            report.max_reward_spread, report.max_transition_spread
        ))
    }
}

fn factored_config(seed: u64, n_variables: usize) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_variables,
        n_actions: 2,
        max_depth: n_variables.min(3),
        quantization: 0.05,
        reward_range: (0.0, 1.0),
        deterministic_fraction: 0.5,
        relevant_variables: (n_variables > 6).then_some(3 + (seed % 4) as usize),
        discount: 0.9,
    }
}

/// Block index of every state, found by evaluating the block formulas.
fn labels_of(blocks: &[BlockFormula], n_states: usize) -> Result<Vec<usize>, String> {
    (0..n_states)
        .map(|s| {
            let hits: Vec<usize> = blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.evaluate(s as u64))
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => Ok(*i),
                _ => Err(format!("state {s} lies in {} blocks", hits.len())),
            }
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let mut g = rng(1);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = g.gen_range(1..=6);
        let a = g.gen_range(1..=3);
        let m: ExplicitMdp<f64> = random_mdp(&mut g, n, a, 0.9, 0.1);
        let (v, policy) = value_iterate(&m, SOLVER_TOL).map_err(|e| e.to_string())?;
        let oracle = brute_force_optimal(&m).map_err(|e| e.to_string())?;
        let err = sup(&v, &oracle);
        worst = worst.max(err);
        ensure(err <= VALUE_TOL, || format!("instance {i}: sup error {err:e}"))?;
        let achieved = policy_value_exact(&m, &policy).map_err(|e| e.to_string())?;
        let gap = sup(&achieved, &oracle);
        ensure(gap <= VALUE_TOL, || format!("instance {i}: greedy policy gap {gap:e}"))?;
    }
    Ok(format!("200 MDPs, max sup error {worst:.2e} (tol 1e-6)"))
}

fn criterion_2() -> Verdict {
    let mut g = rng(2);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let row = random_interval_row::<f64>(&mut g, 4);
        let values: Vec<f64> = (0..row.len()).map(|_| g.gen_range(-5.0..5.0)).collect();
        for mode in [Extremum::Minimize, Extremum::Maximize] {
            let x = extreme_transition_vector(&row, &values, mode).map_err(|e| e.to_string())?;
            let sum: f64 = x.iter().map(|e| e.1).sum();
            ensure((sum - 1.0).abs() <= 1e-9, || format!("row {i}: sum {sum}"))?;
            for &(q, p) in &x {
                let iv = row.iter().find(|e| e.0 == q).unwrap().1;
                ensure(p >= iv.lo - 1e-12 && p <= iv.hi + 1e-12, || {
                    format!("row {i}: entry {q} = {p} outside [{}, {}]", iv.lo, iv.hi)
                })?;
            }
            let objective: f64 = x.iter().map(|&(q, p)| p * values[q]).sum();
            let oracle = extreme_row_vertex_oracle(&row, &values, mode).ok_or("no vertex")?;
            let err = (objective - oracle).abs();
            worst = worst.max(err);
            ensure(err <= 1e-12, || format!("row {i} {mode:?}: {objective} vs {oracle}"))?;
        }
    }
    Ok(format!("1000 rows x 2 modes, max objective gap {worst:.2e} (tol 1e-12)"))
}

fn criterion_3() -> Verdict {
    let mut g = rng(3);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut policy_worst: f64 = f64::NEG_INFINITY;
    for i in 0..50 {
        let n = g.gen_range(1..=6);
        let a = g.gen_range(1..=3);
        let b: Bmdp<f64> = random_bmdp(&mut g, n, a, 0.9, 0.2);
        let bounds = ivi_bound_optimal(&b, SOLVER_TOL).map_err(|e| e.to_string())?;
        let policies: Vec<Policy> = (0..5)
            .map(|_| Policy((0..n).map(|_| g.gen_range(0..a)).collect()))
            .collect();
        let policy_bounds = policies
            .iter()
            .map(|p| ivi_bound_policy(&b, p, SOLVER_TOL))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        for k in 0..10_000u64 {
            let member = sample_member(&b, (i as u64) << 32 | k).map_err(|e| e.to_string())?;
            let (v, _) = value_iterate(&member, SOLVER_TOL).map_err(|e| e.to_string())?;
            for s in 0..n {
                let excess = (bounds.lower[s] - v[s]).max(v[s] - bounds.upper[s]);
                worst = worst.max(excess);
                ensure(excess <= VALUE_TOL, || {
                    format!("bmdp {i} sample {k} state {s}: {} outside [{}, {}]", v[s], bounds.lower[s], bounds.upper[s])
                })?;
            }
            for (p, (lo, hi)) in policies.iter().zip(&policy_bounds) {
                let pv = policy_value_exact(&member, p).map_err(|e| e.to_string())?;
                for s in 0..n {
                    let excess = (lo[s] - pv[s]).max(pv[s] - hi[s]);
                    policy_worst = policy_worst.max(excess);
                    ensure(excess <= VALUE_TOL, || {
                        format!("bmdp {i} sample {k} policy {p:?} state {s}: {} outside [{}, {}]", pv[s], lo[s], hi[s])
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "50 BMDPs x 10^4 members, worst excess {worst:.2e} (optimal), {policy_worst:.2e} (5 policies each); tol 1e-6"
    ))
}

fn criterion_4() -> Verdict {
    let mut g = rng(4);
    let mut margin = f64::INFINITY;
    for i in 0..50 {
        let n = g.gen_range(1..=4);
        let b: Bmdp<f64> = random_bmdp(&mut g, n, 2, 0.9, 0.2);
        let bounds = ivi_bound_optimal(&b, SOLVER_TOL).map_err(|e| e.to_string())?;
        let pes = &bounds.pessimistic_policy;
        let (pes_lower, _) = ivi_bound_policy(&b, pes, SOLVER_TOL).map_err(|e| e.to_string())?;
        for policy in Policy::enumerate(n, 2) {
            let (lower, _) = ivi_bound_policy(&b, &policy, SOLVER_TOL).map_err(|e| e.to_string())?;
            for s in 0..n {
                margin = margin.min(pes_lower[s] - lower[s]);
                ensure(pes_lower[s] >= lower[s] - VALUE_TOL, || {
                    format!("bmdp {i}: policy {policy:?} lower {} beats pessimistic {} at {s}", lower[s], pes_lower[s])
                })?;
            }
        }
        for k in 0..200u64 {
            let member = sample_member(&b, (i as u64) << 32 | k).map_err(|e| e.to_string())?;
            let v = policy_evaluate(&member, pes, SOLVER_TOL).map_err(|e| e.to_string())?;
            for s in 0..n {
                ensure(v[s] >= bounds.lower[s] - VALUE_TOL, || {
                    format!("bmdp {i} sample {k}: pessimistic value {} below lower {}", v[s], bounds.lower[s])
                })?;
            }
        }
    }
    Ok(format!(
        "50 BMDPs, all policies enumerated, min margin of pessimistic lower bound {margin:.2e}; 200 members each achieve lower"
    ))
}

/// Random 5-state MDP in which some states copy another state's reward and
/// rows, so that exact bisimilarity is common.
fn lumpable_mdp(g: &mut impl Rng) -> ExplicitMdp<f64> {
    let a = g.gen_range(1..=2);
    let base: ExplicitMdp<f64> = random_mdp(g, 5, a, 0.9, 0.25);
    let mut rewards = base.rewards().to_vec();
    let mut rows: Vec<Vec<Vec<(usize, f64)>>> = base.transitions().to_vec();
    for s in 1..5 {
        if g.gen_bool(0.4) {
            let src = g.gen_range(0..s);
            rewards[s] = rewards[src];
            for act in rows.iter_mut() {
                act[s] = act[src].clone();
            }
        }
    }
    ExplicitMdp::new(5, a, 0.9, rewards, rows)
}

fn criterion_5() -> Verdict {
    let mut g = rng(5);
    let mut nontrivial = 0;
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let m = lumpable_mdp(&mut g);
        let (p, _) = reduce_model(&m, 0.0).map_err(|e| e.to_string())?;
        let oracle = coarsest_homogeneous_oracle(&m, 0.0).map_err(|e| e.to_string())?;
        ensure(p == oracle, || format!("instance {i}: {:?} vs oracle {:?}", p.blocks(), oracle.blocks()))?;
        record_homogeneity(&m, &p, 0.0).map_err(|e| format!("instance {i}: {e}"))?;
        if p.len() < 5 {
            nontrivial += 1;
        }
        let quotient = collapse_exact(&m, &p).map_err(|e| e.to_string())?;
        let (qv, _) = value_iterate(&quotient, SOLVER_TOL).map_err(|e| e.to_string())?;
        let lifted = lift_block_function(&p, &qv).map_err(|e| e.to_string())?;
        let (v, _) = value_iterate(&m, SOLVER_TOL).map_err(|e| e.to_string())?;
        let err = sup(&lifted, &v);
        worst = worst.max(err);
        ensure(err <= VALUE_TOL, || format!("instance {i}: lifted quotient values off by {err:e}"))?;
    }
    Ok(format!(
        "200 MDPs match the oracle ({nontrivial} with merged states); lifted quotient values within {worst:.2e} (tol 1e-6)"
    ))
}

const SWEEP: [f64; 3] = [0.01, 0.05, 0.1];

fn criterion_6() -> Verdict {
    let mut strict = 0;
    let mut fallbacks = 0;
    for seed in 0..100u64 {
        let n_vars = 3 + (seed % 8) as usize;
        let f: FactoredMdp<f64> = generate_factored_mdp(&factored_config(600 + seed, n_vars)).map_err(|e| e.to_string())?;
        let m = expand_to_explicit(&f).map_err(|e| e.to_string())?;
        let exact = reduce_factored(&f, 0.0, DEFAULT_REGION_CAP).map_err(|e| e.to_string())?;
        fallbacks += exact.used_explicit_fallback as usize;
        let p0 = formulas_to_partition(&exact.blocks, n_vars).map_err(|e| e.to_string())?;
        record_homogeneity(&m, &p0, 0.0).map_err(|e| format!("seed {seed}: {e}"))?;
        for eps in SWEEP {
            let r = reduce_factored(&f, eps, DEFAULT_REGION_CAP).map_err(|e| e.to_string())?;
            fallbacks += r.used_explicit_fallback as usize;
            ensure(r.blocks.len() <= exact.blocks.len(), || {
                format!("seed {seed}: {} blocks at epsilon {eps} > {} at 0", r.blocks.len(), exact.blocks.len())
            })?;
            if r.blocks.len() < exact.blocks.len() {
                strict += 1;
            }
            let p = formulas_to_partition(&r.blocks, n_vars).map_err(|e| e.to_string())?;
            record_homogeneity(&m, &p, eps).map_err(|e| format!("seed {seed} epsilon {eps}: {e}"))?;
        }
    }
    Ok(format!(
        "100 models x 3 epsilons, 0 exceptions; {strict}/300 strictly smaller; {fallbacks} explicit fallbacks"
    ))
}

fn criterion_7() -> Verdict {
    let mut worst_bracket = f64::NEG_INFINITY;
    let mut worst_policy = f64::NEG_INFINITY;
    for seed in 0..100u64 {
        let n_vars = 3 + (seed % 8) as usize;
        let eps = [0.0, 0.05, 0.1][(seed % 3) as usize];
        let f: FactoredMdp<f64> = generate_factored_mdp(&factored_config(700 + seed, n_vars)).map_err(|e| e.to_string())?;
        let m = expand_to_explicit(&f).map_err(|e| e.to_string())?;
        let r = reduce_factored(&f, eps, DEFAULT_REGION_CAP).map_err(|e| e.to_string())?;
        let p = formulas_to_partition(&r.blocks, n_vars).map_err(|e| e.to_string())?;
        record_homogeneity(&m, &p, eps).map_err(|e| format!("seed {seed}: {e}"))?;
        let labels = labels_of(&r.blocks, m.n_states())?;
        let bounds = ivi_bound_optimal(&r.bmdp, SOLVER_TOL).map_err(|e| e.to_string())?;
        let (optimal, _) = policy_iteration_oracle(&m).map_err(|e| e.to_string())?;
        let lifted = Policy(labels.iter().map(|&b| bounds.pessimistic_policy[b]).collect());
        let achieved = policy_evaluate(&m, &lifted, SOLVER_TOL).map_err(|e| e.to_string())?;
        for s in 0..m.n_states() {
            let (lo, hi) = (bounds.lower[labels[s]], bounds.upper[labels[s]]);
            let excess = (lo - optimal[s]).max(optimal[s] - hi);
            worst_bracket = worst_bracket.max(excess);
            ensure(excess <= VALUE_TOL, || {
                format!("seed {seed} state {s}: optimal {} outside [{lo}, {hi}]", optimal[s])
            })?;
            worst_policy = worst_policy.max(lo - achieved[s]);
            ensure(achieved[s] >= lo - VALUE_TOL, || {
                format!("seed {seed} state {s}: pessimistic policy achieves {} < lower {lo}", achieved[s])
            })?;
        }
    }
    Ok(format!(
        "100 models, worst bracket excess {worst_bracket:.2e}, worst policy shortfall {worst_policy:.2e} (tol 1e-6)"
    ))
}

fn criterion_8() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut largest = 0;
    for seed in 0..100u64 {
        let n_vars = 3 + (seed % 10) as usize;
        let mut cfg = factored_config(800 + seed, n_vars);
        if n_vars > 8 {
            cfg.deterministic_fraction = 0.8;
        }
        let f: FactoredMdp<f64> = generate_factored_mdp(&cfg).map_err(|e| e.to_string())?;
        let m = expand_to_explicit(&f).map_err(|e| e.to_string())?;
        largest = largest.max(m.n_states());
        let sym = symbolic_reduce(&f, 0.0, usize::MAX).map_err(|e| e.to_string())?;
        let (p, _) = reduce_model(&m, 0.0).map_err(|e| e.to_string())?;
        let sp = formulas_to_partition(&sym.blocks, n_vars).map_err(|e| e.to_string())?;
        ensure(sp == p, || format!("seed {seed}: symbolic {} blocks vs explicit {}", sp.len(), p.len()))?;
        record_homogeneity(&m, &sp, 0.0).map_err(|e| format!("seed {seed}: {e}"))?;
        let labels = labels_of(&sym.blocks, m.n_states())?;
        let explicit = induce_bmdp(&m, &p).map_err(|e| e.to_string())?;
        // Symbolic block i maps to explicit block labels of its states.
        let map: Vec<usize> = (0..sym.blocks.len())
            .map(|i| p.block_of(labels.iter().position(|&l| l == i).unwrap()))
            .collect();
        for i in 0..sym.blocks.len() {
            let (x, y) = (sym.bmdp.reward_bounds()[i], explicit.reward_bounds()[map[i]]);
            worst = worst.max((x.lo - y.lo).abs()).max((x.hi - y.hi).abs());
            for a in 0..f.n_actions() {
                for j in 0..sym.blocks.len() {
                    let x = sym.bmdp.bound(a, i, j);
                    let y = explicit.bound(a, map[i], map[j]);
                    worst = worst.max((x.lo - y.lo).abs()).max((x.hi - y.hi).abs());
                }
            }
        }
        ensure(worst <= 1e-12, || format!("seed {seed}: induced BMDPs differ by {worst:e}"))?;
    }
    Ok(format!(
        "100 models up to {largest} states: identical partitions, induced BMDPs within {worst:.2e} (tol 1e-12)"
    ))
}

fn two_cluster_instance() -> FactoredMdp<f64> {
    let leaf = DecisionTree::leaf;
    let keep = |v: usize| DecisionTree::node(v, leaf(1.0), leaf(0.0));
    let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    // Under `a`, S becomes true with probability 0.6 or 0.55 depending on Q.
    let a = vec![
        DecisionTree::node(0, leaf(0.9), DecisionTree::node(1, leaf(0.5), leaf(0.0))),
        leaf(0.7),
        DecisionTree::node(2, leaf(1.0), DecisionTree::node(1, leaf(0.6), leaf(0.55))),
    ];
    let b = vec![keep(0), keep(1), DecisionTree::node(2, leaf(0.95), leaf(0.0))];
    FactoredMdp::new(
        names(&["P", "Q", "S"]),
        names(&["a", "b"]),
        0.9,
        vec![a, b],
        DecisionTree::node(2, leaf(1.0), leaf(0.0)),
    )
    .expect("valid instance")
}

fn criterion_10() -> Verdict {
    let f = two_cluster_instance();
    let exact = symbolic_reduce(&f, 0.0, DEFAULT_REGION_CAP).map_err(|e| e.to_string())?;
    let approx = symbolic_reduce(&f, 0.05, DEFAULT_REGION_CAP).map_err(|e| e.to_string())?;
    let m = expand_to_explicit(&f).map_err(|e| e.to_string())?;
    let (p0, _) = reduce_model(&m, 0.0).map_err(|e| e.to_string())?;
    let (p5, _) = reduce_model(&m, 0.05).map_err(|e| e.to_string())?;
    ensure(approx.blocks.len() < exact.blocks.len(), || {
        format!("symbolic: {} blocks at 0.05 vs {} at 0", approx.blocks.len(), exact.blocks.len())
    })?;
    ensure(p5.len() < p0.len(), || format!("explicit: {} blocks at 0.05 vs {} at 0", p5.len(), p0.len()))?;
    Ok(format!(
        "3 variables: {} blocks at epsilon 0, {} at epsilon 0.05",
        exact.blocks.len(),
        approx.blocks.len()
    ))
}

fn random_models(i: u64) -> Vec<Model<f64>> {
    let mut g = rng(1100 + i);
    let n = g.gen_range(1..=6);
    let a = g.gen_range(1..=3);
    let discount = g.gen_range(0.0..0.99);
    let m: ExplicitMdp<f64> = random_mdp(&mut g, n, a, discount, 0.1);
    let b: Bmdp<f64> = random_bmdp(&mut g, n, a, 0.9, 0.3);
    let n_vars = g.gen_range(1..=5);
    let f: FactoredMdp<f64> = generate_factored_mdp(&GeneratorConfig {
        seed: 1100 + i,
        n_variables: n_vars,
        max_depth: n_vars.min(3),
        quantization: [0.05, 0.1, 1.0 / 3.0][(i % 3) as usize],
        ..GeneratorConfig::default()
    })
    .expect("valid config");
    let labels: Vec<usize> = (0..1 << n_vars).map(|_| g.gen_range(0..3)).collect();
    let partition = Partition::from_labels(&labels);
    let symbolic = PartitionFile::Symbolic {
        variables: f.variables().to_vec(),
        blocks: bmdp_reduce::factored::partition_to_formulas(&partition, n_vars),
    };
    vec![
        Model::Mdp(m),
        Model::Bmdp(b),
        Model::Fmdp(f),
        Model::Partition(PartitionFile::Explicit(partition)),
        Model::Partition(symbolic),
    ]
}

fn cli_outputs(dir: &std::path::Path, fmdp: &str, mdp: &str) -> Result<Vec<u8>, String> {
    let fpath = dir.join("m.fmdp");
    let mpath = dir.join("m.mdp");
    std::fs::write(&fpath, fmdp).map_err(|e| e.to_string())?;
    std::fs::write(&mpath, mdp).map_err(|e| e.to_string())?;
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let bmdp = dir.join("r.bmdp");
    let part = dir.join("r.partition");
    let expanded = dir.join("e.mdp");
    let runs: Vec<Vec<String>> = vec![
        vec!["solve".into(), s(&mpath)],
        vec!["expand".into(), s(&fpath), "--out".into(), s(&expanded)],
        vec!["reduce".into(), s(&fpath), "--epsilon".into(), "0.05".into(), "--out".into(), s(&bmdp), "--partition".into(), s(&part)],
        vec!["ivi".into(), s(&bmdp)],
        vec!["check".into(), s(&part), "--model".into(), s(&fpath), "--epsilon".into(), "0.05".into()],
        vec!["reduce".into(), s(&mpath), "--epsilon".into(), "0.1".into(), "--out".into(), s(&bmdp)],
        vec!["sweep".into(), s(&fpath), "--epsilons".into(), "0,0.05,0.1".into()],
    ];
    let mut bytes = Vec::new();
    for args in runs {
        let mut err = Vec::new();
        let code = bmdp_reduce_cli::run(
            std::iter::once("bmdp-reduce".to_string()).chain(args.iter().cloned()),
            &mut bytes,
            &mut err,
        );
        if code != 0 {
            return Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)));
        }
    }
    for path in [&bmdp, &part, &expanded] {
        bytes.extend(std::fs::read(path).map_err(|e| e.to_string())?);
    }
    Ok(bytes)
}

fn criterion_11() -> Verdict {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut files = 0;
    for i in 0..100u64 {
        let models = random_models(i);
        for model in &models {
            let text = serialize_model(model);
            let parsed: Model<f64> = parse_model(&text).map_err(|e| format!("model {i}: {e}\n{text}"))?;
            ensure(&parsed == model, || format!("model {i}: parse(serialize(x)) != x\n{text}"))?;
            ensure(serialize_model(&parsed) == text, || format!("model {i}: re-serialization differs"))?;
            files += 1;
        }
        let (Model::Fmdp(f), Model::Mdp(m)) = (&models[2], &models[0]) else {
            unreachable!()
        };
        let fmdp = serialize_model(&Model::Fmdp(f.clone()));
        let mdp = serialize_model(&Model::Mdp(m.clone()));
        let first = cli_outputs(dir.path(), &fmdp, &mdp)?;
        let second = cli_outputs(dir.path(), &fmdp, &mdp)?;
        ensure(first == second, || format!("model {i}: CLI output differs between runs"))?;
    }
    Ok(format!("{files} files round-trip byte-identically; 100 CLI pipelines repeat byte-identically"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "exact solver vs policy enumeration", budget: Duration::from_secs(10), run: criterion_1 },
        Criterion { id: 2, name: "extreme row vs vertex enumeration", budget: Duration::from_secs(5), run: criterion_2 },
        Criterion { id: 3, name: "IVI soundness on sampled members", budget: Duration::from_secs(120), run: criterion_3 },
        Criterion { id: 4, name: "pessimistic policy", budget: Duration::from_secs(60), run: criterion_4 },
        Criterion { id: 5, name: "minimal model at epsilon 0", budget: Duration::from_secs(30), run: criterion_5 },
        Criterion { id: 6, name: "block count never exceeds epsilon 0", budget: Duration::from_secs(120), run: criterion_6 },
        Criterion { id: 7, name: "lifted bounds end to end", budget: Duration::from_secs(300), run: criterion_7 },
        Criterion { id: 8, name: "symbolic/explicit agreement", budget: Duration::from_secs(120), run: criterion_8 },
        Criterion { id: 10, name: "epsilon contrast on 3-variable instance", budget: Duration::from_secs(1), run: criterion_10 },
        Criterion { id: 11, name: "round trips and CLI determinism", budget: Duration::from_secs(10), run: criterion_11 },
    ];
    // Optional criterion ids on the command line restrict the run.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: Vec<Criterion> = criteria
        .into_iter()
        .filter(|c| only.is_empty() || only.contains(&c.id) || (c.id == 8 && only.contains(&9)))
        .collect();
    // One at a time, so each wall time is measured without contention.
    let results: Vec<(Duration, Verdict)> = criteria
        .iter()
        .map(|c| {
            let start = Instant::now();
            let verdict = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
            (start.elapsed(), verdict)
        })
        .collect();

    let mut failed = 0;
    let mut line = |id: u32, name: &str, ok: bool, detail: &str| {
        println!("{} criterion {id:>2} ({name}): {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    };
    for (c, (elapsed, verdict)) in criteria.iter().zip(&results) {
        let timing = format!("{:.2}s, budget {}s", elapsed.as_secs_f64(), c.budget.as_secs());
        match verdict {
            Ok(detail) if *elapsed <= c.budget => line(c.id, c.name, true, &format!("{detail} [{timing}]")),
            Ok(detail) => line(c.id, c.name, false, &format!("{detail} [over time: {timing}]")),
            Err(detail) => line(c.id, c.name, false, &format!("{detail} [{timing}]")),
        }
        if c.id == 8 {
            let checks = HOMOGENEITY_CHECKS.load(Ordering::Relaxed);
            let failures = HOMOGENEITY_FAILURES.load(Ordering::Relaxed);
            line(
                9,
                "homogeneity verifier on every emitted partition",
                checks > 0 && failures == 0,
                &format!("{checks} partitions checked in criteria 5-8, {failures} failures"),
            );
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

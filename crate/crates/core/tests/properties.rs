use bmdp_reduce::factored::{formulas_to_partition, partition_to_formulas};
use bmdp_reduce::harness::{
    generate_factored_mdp, random_bmdp, random_interval_row, random_mdp, rng, GeneratorConfig,
};
use bmdp_reduce::io::{parse_bmdp, parse_fmdp, parse_mdp, serialize_bmdp, serialize_fmdp, serialize_mdp};
use bmdp_reduce::reduction::collapse_exact;
use bmdp_reduce::{
    contains_member, expand_to_explicit, extreme_transition_vector, induce_bmdp, ivi_bound_optimal,
    ivi_bound_policy, point_bmdp, reduce_model, sample_member, symbolic_reduce, value_iterate,
    verify_homogeneity, Bmdp, Extremum, ExplicitMdp, FactoredMdp, Partition, Policy,
};
use proptest::prelude::*;
use rand::Rng;

fn small_mdp(seed: u64) -> ExplicitMdp<f64> {
    let mut g = rng(seed);
    let n = g.gen_range(1..=7);
    let a = g.gen_range(1..=3);
    random_mdp(&mut g, n, a, 0.9, 0.1)
}

fn small_bmdp(seed: u64) -> Bmdp<f64> {
    let mut g = rng(seed);
    let n = g.gen_range(1..=6);
    let a = g.gen_range(1..=3);
    random_bmdp(&mut g, n, a, 0.85, 0.3)
}

fn factored(seed: u64, n: usize) -> FactoredMdp<f64> {
    generate_factored_mdp(&GeneratorConfig {
        seed,
        n_variables: n,
        max_depth: n.min(3),
        deterministic_fraction: 0.3,
        ..GeneratorConfig::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mdp_text_round_trips(seed in any::<u64>()) {
        let m = small_mdp(seed);
        let text = serialize_mdp(&m);
        let back: ExplicitMdp<f64> = parse_mdp(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize_mdp(&back), text);
    }

    #[test]
    fn bmdp_text_round_trips(seed in any::<u64>()) {
        let b = small_bmdp(seed);
        let text = serialize_bmdp(&b);
        let back: Bmdp<f64> = parse_bmdp(&text).unwrap();
        prop_assert_eq!(serialize_bmdp(&back), text);
        prop_assert_eq!(back, b);
    }

    #[test]
    fn fmdp_text_round_trips(seed in any::<u64>(), n in 1usize..6) {
        let f = factored(seed, n);
        let text = serialize_fmdp(&f);
        let back: FactoredMdp<f64> = parse_fmdp(&text).unwrap();
        prop_assert_eq!(serialize_fmdp(&back), text);
        prop_assert_eq!(back, f);
    }

    #[test]
    fn generator_is_deterministic(seed in any::<u64>(), n in 1usize..8) {
        prop_assert_eq!(factored(seed, n), factored(seed, n));
    }

    #[test]
    fn irrelevant_variables_do_not_add_blocks(seed in any::<u64>(), k in 1usize..4) {
        let f: FactoredMdp<f64> = generate_factored_mdp(&GeneratorConfig {
            seed,
            n_variables: 6,
            max_depth: 3,
            relevant_variables: Some(k),
            ..GeneratorConfig::default()
        })
        .unwrap();
        for v in 0..k {
            for a in 0..f.n_actions() {
                prop_assert!(f.cpt(a, v).tested_variables().iter().all(|&u| u < k));
            }
        }
        let r = symbolic_reduce(&f, 0.0, usize::MAX).unwrap();
        prop_assert!(r.blocks.len() <= 1 << k);
    }

    #[test]
    fn extreme_rows_are_feasible_and_extreme(seed in any::<u64>()) {
        let mut g = rng(seed);
        let row = random_interval_row::<f64>(&mut g, 5);
        let values: Vec<f64> = (0..8).map(|_| g.gen_range(-1.0..1.0)).collect();
        let lo = extreme_transition_vector(&row, &values, Extremum::Minimize).unwrap();
        let hi = extreme_transition_vector(&row, &values, Extremum::Maximize).unwrap();
        let dot = |r: &[(usize, f64)]| r.iter().map(|&(s, p)| p * values[s]).sum::<f64>();
        for r in [&lo, &hi] {
            prop_assert!((r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-9);
            for &(s, p) in r.iter() {
                let b = row.iter().find(|e| e.0 == s).unwrap().1;
                prop_assert!(p >= b.lo - 1e-12 && p <= b.hi + 1e-12);
            }
        }
        prop_assert!(dot(&lo) <= dot(&hi) + 1e-12);
    }

    #[test]
    fn ivi_lower_never_exceeds_upper(seed in any::<u64>()) {
        let b = small_bmdp(seed);
        let r = ivi_bound_optimal(&b, 1e-9).unwrap();
        for s in 0..b.n_states() {
            prop_assert!(r.lower.0[s] <= r.upper.0[s] + 1e-9);
        }
        let policy = Policy::constant(b.n_states(), 0);
        let (lo, hi) = ivi_bound_policy(&b, &policy, 1e-9).unwrap();
        for s in 0..b.n_states() {
            prop_assert!(lo.0[s] <= hi.0[s] + 1e-9);
            prop_assert!(hi.0[s] <= r.upper.0[s] + 1e-9);
        }
    }

    #[test]
    fn sampled_members_are_contained_and_bracketed(seed in any::<u64>()) {
        let b = small_bmdp(seed);
        let r = ivi_bound_optimal(&b, 1e-10).unwrap();
        let m = sample_member(&b, seed).unwrap();
        prop_assert!(contains_member(&b, &m).unwrap());
        let (v, _) = value_iterate(&m, 1e-10).unwrap();
        for s in 0..b.n_states() {
            prop_assert!(v.0[s] >= r.lower.0[s] - 1e-8 && v.0[s] <= r.upper.0[s] + 1e-8);
        }
    }

    #[test]
    fn point_bmdp_bounds_collapse(seed in any::<u64>()) {
        let m = small_mdp(seed);
        let r = ivi_bound_optimal(&point_bmdp(&m).unwrap(), 1e-10).unwrap();
        let (v, _) = value_iterate(&m, 1e-10).unwrap();
        for s in 0..m.n_states() {
            prop_assert!((r.lower.0[s] - v.0[s]).abs() < 1e-8);
            prop_assert!((r.upper.0[s] - v.0[s]).abs() < 1e-8);
        }
    }

    #[test]
    fn reduction_is_homogeneous_and_monotone(seed in any::<u64>(), eps in 0.0f64..0.3) {
        let m = small_mdp(seed);
        let (p, trace) = reduce_model(&m, eps).unwrap();
        prop_assert!(verify_homogeneity(&m, &p, eps).unwrap().is_homogeneous());
        prop_assert_eq!(trace.replay(m.n_states()).unwrap(), p.clone());
        let (exact, _) = reduce_model(&m, 0.0).unwrap();
        prop_assert!(p.len() <= exact.len());
        let b = induce_bmdp(&m, &p).unwrap();
        prop_assert!(b.max_transition_width() <= eps + 1e-12);
        prop_assert!(b.max_reward_width() <= eps + 1e-12);
    }

    #[test]
    fn exact_quotient_is_a_refinement_target(seed in any::<u64>()) {
        let m = small_mdp(seed);
        let (p, _) = reduce_model(&m, 0.0).unwrap();
        prop_assert!(Partition::singletons(m.n_states()).refines(&p));
        prop_assert!(p.refines(&Partition::single_block(m.n_states())));
        let q = collapse_exact(&m, &p).unwrap();
        let (vq, _) = value_iterate(&q, 1e-10).unwrap();
        let (v, _) = value_iterate(&m, 1e-10).unwrap();
        for s in 0..m.n_states() {
            prop_assert!((vq.0[p.block_of(s)] - v.0[s]).abs() < 1e-8);
        }
    }

    #[test]
    fn symbolic_matches_explicit_at_zero(seed in any::<u64>(), n in 1usize..6) {
        let f = factored(seed, n);
        let m = expand_to_explicit(&f).unwrap();
        let sym = symbolic_reduce(&f, 0.0, usize::MAX).unwrap();
        let (p, _) = reduce_model(&m, 0.0).unwrap();
        prop_assert_eq!(formulas_to_partition(&sym.blocks, n).unwrap(), p);
    }

    #[test]
    fn partitions_survive_formula_conversion(labels in prop::collection::vec(0usize..4, 16)) {
        let p = Partition::from_labels(&labels);
        let blocks = partition_to_formulas(&p, 4);
        prop_assert_eq!(formulas_to_partition(&blocks, 4).unwrap(), p);
    }
}

#[test]
fn f32_models_reduce_like_f64() {
    let f64_model = factored(3, 4);
    let f32_model: FactoredMdp<f32> = generate_factored_mdp(&GeneratorConfig {
        seed: 3,
        n_variables: 4,
        max_depth: 3,
        deterministic_fraction: 0.3,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let a = symbolic_reduce(&f64_model, 0.0, usize::MAX).unwrap();
    let b = symbolic_reduce(&f32_model, 0.0, usize::MAX).unwrap();
    assert_eq!(a.blocks, b.blocks);
    let r = ivi_bound_optimal(&b.bmdp, 1e-4f32).unwrap();
    assert!(r.lower.0.iter().zip(&r.upper.0).all(|(l, u)| l <= &(u + 1e-4)));
}

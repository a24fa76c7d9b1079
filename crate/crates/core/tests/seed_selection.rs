mod common;

use cascade_core::exact::exact_sigma;
use cascade_core::generate::{generate, GeneratorSpec, Uniform};
use cascade_core::imm::{brute_force_opt, imm, imm_params, ln_binomial, node_selection, node_selection_exhaustive};
use cascade_core::rr::RRCollection;
use cascade_core::stream::{stream, Purpose};
use cascade_core::{Instance, Model, NodeId};
use common::*;
use proptest::prelude::*;

const GREEDY: f64 = 1.0 - 1.0 / std::f64::consts::E;

#[test]
fn log_binomial_against_direct_sum() {
    for n in 1..80u64 {
        for k in 0..=n {
            let direct: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
            assert!((ln_binomial(n, k) - direct).abs() < 1e-9 * direct.max(1.0), "C({n},{k})");
        }
    }
    // large arguments stay finite
    assert!(ln_binomial(1_000_000_000, 500).is_finite());
}

#[test]
fn constants_from_their_definitions() {
    for &(n, k, eps, ell) in &[(100u64, 1u64, 0.1, 1.0), (1000, 20, 0.3, 1.5), (37, 37, 0.05, 2.0)] {
        let p = imm_params(n, k, eps, ell).unwrap();
        let ln_n = (n as f64).ln();
        let lnc: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
        let alpha = (ell * ln_n + 2f64.ln()).sqrt();
        let beta = (GREEDY * (lnc + ell * ln_n + 2f64.ln())).sqrt();
        let gamma = 4.0 + (8.0 * ln_n).ln() / ln_n;
        let ellp = ell + 2f64.ln() / ln_n + gamma;
        let epsp = 2f64.sqrt() * eps;
        let lp = (2.0 + 2.0 * epsp / 3.0) * (lnc + ellp * ln_n + (n as f64).log2().ln()) * n as f64 / (epsp * epsp);
        let ls = 2.0 * n as f64 * (GREEDY * alpha + beta).powi(2) / (eps * eps);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(p.alpha, alpha) && close(p.beta_hat, beta) && close(p.gamma_hat, gamma));
        assert!(close(p.ell_prime, ellp) && close(p.eps_prime, epsp));
        assert!(close(p.lambda_prime, lp) && close(p.lambda_star, ls));
    }
    let p = imm_params(100, 1, 0.1, 1.0).unwrap();
    assert!((p.eps_prime - 0.141_421_356_2).abs() < 1e-10);
}

#[test]
fn selection_examples() {
    let coll = RRCollection::from_sets(5, &[vec![1, 2], vec![2, 3], vec![4]]).unwrap();
    let one = node_selection(&coll, 1);
    assert_eq!(one.seeds, vec![2]);
    assert!((one.coverage - 2.0 / 3.0).abs() < 1e-15);
    let two = node_selection(&coll, 2);
    assert_eq!((two.seeds, two.coverage), (vec![2, 4], 1.0));
    let tie = RRCollection::from_sets(3, &[vec![1], vec![2]]).unwrap();
    assert_eq!(node_selection(&tie, 1).seeds, vec![1]);
    // V exhausted before k
    let small = RRCollection::from_sets(2, &[vec![0], vec![0, 1]]).unwrap();
    assert_eq!(node_selection(&small, 5).seeds, vec![0]);
}

#[test]
fn brute_force_examples() {
    let edge = Instance::ic(graph(2, &[(0, 1)]), vec![0.5]).unwrap();
    assert_eq!(brute_force_opt(&edge, 1).unwrap(), (vec![0], 1.5));
    let iso = Instance::ic(graph(2, &[]), vec![]).unwrap();
    assert_eq!(brute_force_opt(&iso, 1).unwrap(), (vec![0], 1.0));
    let big = Instance::ic(graph(10, &[]), vec![]).unwrap();
    assert!(brute_force_opt(&big, 5).is_ok());
    let over = Instance::ic(graph(11, &[]), vec![]);
    assert!(over.is_ok_and(|i| brute_force_opt(&i, 5).is_err()));
}

#[test]
fn disconnected_nodes() {
    let inst = Instance::ic(graph(10, &[]), vec![]).unwrap();
    let r = imm(&inst, 2, 0.1, 1.0, 1).unwrap();
    assert_eq!(r.seeds.len(), 2);
    assert!((r.spread_estimate - 2.0).abs() <= 0.1 * 2.0, "{r:?}");
}

#[test]
fn star_center_is_chosen() {
    let spec = GeneratorSpec::Star { leaves: 5, params: Uniform { model: Model::Ic, prob: 1.0, gamma: 1.0 } };
    let inst = generate(&spec, &mut stream(0, Purpose::Generator, 0)).unwrap();
    assert_eq!(brute_force_opt(&inst, 1).unwrap(), (vec![0], 6.0));
    for seed in 0..5 {
        assert_eq!(imm(&inst, 1, 0.1, 1.0, seed).unwrap().seeds, vec![0]);
    }
}

#[test]
fn diamond_guarantee() {
    let inst = diamond_sir();
    let (_, opt) = brute_force_opt(&inst, 1).unwrap();
    for seed in 0..20 {
        let r = imm(&inst, 1, 0.1, 1.0, seed).unwrap();
        let got = exact_sigma(&inst, &r.seeds).unwrap();
        assert!(got >= (GREEDY - 0.1) * opt, "seed {seed}: {got} vs {opt}");
    }
}

#[test]
fn result_bookkeeping() {
    for model in [Model::Ic, Model::Sir, Model::Tsir { horizon: 3 }] {
        let inst = in_model(&random_sir(40, 0.08, 70), model);
        let r = imm(&inst, 3, 0.3, 1.0, 5).unwrap();
        assert!(r.seeds.len() <= 3);
        assert!((0.0..=1.0).contains(&r.coverage));
        assert!((r.spread_estimate - 40.0 * r.coverage).abs() < 1e-12);
        assert!(r.lb >= 1.0);
        let phase2 = r.theta.floor() as u64 + 1;
        assert_eq!(r.samples_used, r.phase1_samples.max(phase2));
        assert_eq!(r, imm(&inst, 3, 0.3, 1.0, 5).unwrap());
    }
    let inst = random_sir(5, 0.3, 71);
    assert!(imm(&inst, 6, 0.3, 1.0, 1).is_err());
    assert!(imm(&inst, 1, 1.5, 1.0, 1).is_err());
}

#[test]
fn imm_is_thread_invariant() {
    let inst = random_sir(300, 0.01, 72);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| imm(&inst, 5, 0.3, 1.0, 9).unwrap())
    };
    assert_eq!(run(1), run(4));
}

fn collection() -> impl Strategy<Value = (usize, Vec<Vec<NodeId>>)> {
    (1usize..16).prop_flat_map(|n| {
        let set = proptest::collection::btree_set(0..n as NodeId, 1..=n.min(5)).prop_map(|s| s.into_iter().collect());
        (Just(n), proptest::collection::vec(set, 0..40))
    })
}

fn best_cover(n: usize, sets: &[Vec<NodeId>], k: usize) -> u64 {
    let masks: Vec<u32> = sets.iter().map(|s| s.iter().fold(0, |m, &v| m | 1 << v)).collect();
    let mut best = 0;
    for pick in 0u32..1 << n {
        if pick.count_ones() as usize > k {
            continue;
        }
        let c = masks.iter().filter(|&&m| m & pick != 0).count() as u64;
        best = best.max(c);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lazy_greedy_equals_literal_greedy((n, sets) in collection(), k in 1usize..6) {
        let coll = RRCollection::from_sets(n, &sets).unwrap();
        prop_assert_eq!(node_selection(&coll, k), node_selection_exhaustive(&coll, k));
    }

    #[test]
    fn greedy_gains_and_approximation((n, sets) in collection(), k in 1usize..4) {
        let coll = RRCollection::from_sets(n, &sets).unwrap();
        let sel = node_selection(&coll, k);
        prop_assert!(sel.marginal_gains.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sel.seeds.len() <= k);
        let covered: u64 = sel.marginal_gains.iter().sum();
        prop_assert_eq!(covered, coll.coverage_count(&sel.seeds));
        let opt = best_cover(n, &sets, k);
        prop_assert!(covered as f64 >= GREEDY * opt as f64);
    }
}

mod common;

use cascade_core::coupling::{containment_stats, coupled_rr, coupled_rr_with, dominance_report, Coupler};
use cascade_core::generate::{generate, GadgetLayout, GeneratorSpec};
use cascade_core::live::LiveEdgeGraph;
use cascade_core::prob::{aggregate_edge_prob, joint_outedge_distribution};
use cascade_core::rr::RrSampler;
use cascade_core::stream::{stream, Purpose};
use cascade_core::{DirectedGraph, Instance, Model, NodeId};
use common::*;
use proptest::prelude::*;

const N: u64 = 100_000;

/// Nodes with a live path to `root`.
fn reverse_reach(g: &DirectedGraph, live: &LiveEdgeGraph, root: NodeId) -> u64 {
    let mut seen = vec![false; g.node_count()];
    seen[root as usize] = true;
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for (u, e) in g.in_adj(v) {
            if !seen[u as usize] && live.is_live(e) {
                seen[u as usize] = true;
                stack.push(u);
            }
        }
    }
    mask_of_flags(&seen)
}

#[test]
fn single_edge_sides_move_together() {
    let inst = Instance::sir(graph(2, &[(0, 1)]), vec![0.3], vec![0.6; 2]).unwrap();
    let p = aggregate_edge_prob(0.3, 0.6).unwrap();
    let mut c = Coupler::new(&inst).unwrap();
    let mut rng = stream(1, Purpose::Coupling, 0);
    let mut both = 0u64;
    for _ in 0..N {
        let o = c.sample(1, false, &mut rng);
        assert_eq!(o.rr_ic, o.rr_sir);
        both += (o.rr_sir.len() == 2) as u64;
    }
    assert!(within(both as f64 / N as f64, p, N, 3.0));
}

#[test]
fn gamma_one_sides_coincide_on_random_graphs() {
    for seed in 0..3 {
        let base = random_sir(12, 0.25, 40 + seed);
        let inst = Instance::sir(base.graph().clone(), base.params().edge_prob.clone(), vec![1.0; 12]).unwrap();
        let stats = containment_stats(&inst, 0, 20_000, seed).unwrap();
        assert_eq!(stats.equal, stats.samples);
        assert_eq!(stats.violations, 0);
    }
}

#[test]
fn containment_on_random_instances() {
    for seed in 0..3 {
        let inst = random_sir(50, 0.06, 50 + seed);
        for root in [0, 17, 49] {
            let stats = containment_stats(&inst, root, 20_000, seed).unwrap();
            assert_eq!(stats.violations, 0);
            assert!(stats.mean_ic_size >= stats.mean_sir_size);
        }
    }
}

#[test]
fn sir_side_matches_standalone_sampler() {
    for (name, inst) in oracle_bases() {
        let n = inst.node_count();
        let root = (n - 1) as NodeId;
        let mut c = Coupler::new(&inst).unwrap();
        let mut s = RrSampler::new(&inst);
        let (mut r1, mut r2) = (stream(2, Purpose::Coupling, 0), stream(3, Purpose::ReverseReachable, 0));
        let mut coupled = vec![0u64; n];
        let mut alone = vec![0u64; n];
        for _ in 0..N {
            for v in c.sample(root, false, &mut r1).rr_sir {
                coupled[v as usize] += 1;
            }
            for v in s.sample_rooted(root, &mut r2).members {
                alone[v as usize] += 1;
            }
        }
        for v in 0..n {
            assert!(same_proportion(coupled[v], alone[v], N, 4.0), "{name} node {v}: {} vs {}", coupled[v], alone[v]);
        }
    }
}

#[test]
fn completed_realizations_have_the_right_laws() {
    for (name, sir) in oracle_bases() {
        let n = sir.node_count();
        let g = sir.graph();
        let ic = sir.matched_ic().unwrap();
        let root = 0;
        let mut c = Coupler::new(&sir).unwrap();
        let mut rng = stream(4, Purpose::Coupling, 0);
        let mut ic_edge = vec![0u64; sir.edge_count()];
        let mut patterns: Vec<Vec<u64>> = (0..n as NodeId).map(|u| vec![0; 1 << g.out_degree(u)]).collect();
        let mut full_ic = vec![0u64; n];
        let mut full_sir = vec![0u64; n];
        for _ in 0..N {
            let o = c.sample(root, true, &mut rng);
            let done = o.completed.as_ref().unwrap();
            let reach_ic = reverse_reach(g, &done.ic, root);
            let reach_sir = reverse_reach(g, &done.sir, root);
            // the revealed SIR set is the full reverse reach of its completion,
            // and the chain RR_IC(full) >= RR_1 >= RR_2 holds
            assert_eq!(reach_sir, mask_of(&o.rr_sir), "{name}");
            let rr1 = mask_of(&o.rr_ic);
            assert_eq!(rr1 & reach_ic, rr1, "{name}");
            assert_eq!(mask_of(&o.rr_sir) & rr1, mask_of(&o.rr_sir));
            for &e in &done.ic.live {
                ic_edge[e as usize] += 1;
            }
            for u in 0..n as NodeId {
                let pat = g.out_edge_ids(u).iter().enumerate().filter(|(_, &e)| done.sir.is_live(e)).fold(0, |m, (i, _)| m | 1 << i);
                patterns[u as usize][pat] += 1;
            }
            for v in 0..n {
                full_ic[v] += reach_ic >> v & 1;
                full_sir[v] += reach_sir >> v & 1;
            }
        }
        for (e, &c) in ic_edge.iter().enumerate() {
            assert!(within(c as f64 / N as f64, ic.edge_prob(e as u32), N, 4.0), "{name} edge {e}");
        }
        for u in 0..n as NodeId {
            let betas: Vec<f64> = g.out_edge_ids(u).iter().map(|&e| sir.edge_prob(e)).collect();
            if betas.is_empty() {
                continue;
            }
            let dist = joint_outedge_distribution(&betas, sir.recovery(u), 1e-15).unwrap();
            let p = chi_square_gof(&patterns[u as usize], &dist.probs);
            assert!(p > 1e-4, "{name} node {u}: p = {p}");
        }
        // full reverse reach agrees with the standalone samplers
        let mut a = RrSampler::new(&ic);
        let mut b = RrSampler::new(&sir);
        let mut rng = stream(5, Purpose::ReverseReachable, 0);
        let mut alone_ic = vec![0u64; n];
        let mut alone_sir = vec![0u64; n];
        for _ in 0..N {
            for v in a.sample_rooted(root, &mut rng).members {
                alone_ic[v as usize] += 1;
            }
            for v in b.sample_rooted(root, &mut rng).members {
                alone_sir[v as usize] += 1;
            }
        }
        for v in 0..n {
            assert!(same_proportion(full_ic[v], alone_ic[v], N, 4.0), "{name} IC node {v}");
            assert!(same_proportion(full_sir[v], alone_sir[v], N, 4.0), "{name} SIR node {v}");
        }
    }
}

#[test]
fn diamond_dominance() {
    let report = dominance_report(&diamond_sir(), &[vec![0]], 1_000_000, 6).unwrap();
    let row = &report.rows[0];
    assert_eq!(report.containment_violations, 0);
    assert_eq!(row.coverage_violations, 0);
    assert!(row.difference > 0.0, "{row:?}");
    assert!((row.difference - 2.0 / 63.0).abs() <= 4.0 * row.joint_stderr, "{row:?}");
}

#[test]
fn gamma_one_dominance_is_a_tie() {
    let base = random_sir(30, 0.1, 60);
    let inst = Instance::sir(base.graph().clone(), base.params().edge_prob.clone(), vec![1.0; 30]).unwrap();
    let report = dominance_report(&inst, &[vec![0], vec![3, 9]], 100_000, 7).unwrap();
    for row in &report.rows {
        assert!(row.difference.abs() <= 3.0 * row.joint_stderr, "{row:?}");
        assert_eq!(row.coverage_violations, 0);
    }
}

#[test]
fn gadget_dominance() {
    let spec = GeneratorSpec::Fig1Gadget { b: 50, n0: 2000, beta: 0.02, gamma: 0.15, model: Model::Sir };
    let inst = generate(&spec, &mut stream(0, Purpose::Generator, 0)).unwrap();
    let seed = GadgetLayout::fig1(50).seed;
    let report = dominance_report(&inst, &[vec![seed]], 20_000, 8).unwrap();
    let row = &report.rows[0];
    assert!(row.ic.mean >= row.sir.mean - 3.0 * row.joint_stderr, "{row:?}");
    assert_eq!(report.containment_violations, 0);
    assert_eq!(row.coverage_violations, 0);
    println!("gadget ratio {:.4}", row.ratio);
}

#[test]
fn argument_checks() {
    let sir = fork_sir();
    let mut rng = stream(0, Purpose::Coupling, 0);
    assert!(coupled_rr(&sir.matched_ic().unwrap(), 0, &mut rng).is_err());
    assert!(coupled_rr(&sir.with_model(Model::Tsir { horizon: 3 }).unwrap(), 0, &mut rng).is_err());
    assert!(coupled_rr_with(&sir, 9, true, &mut rng).is_err());
    assert!(dominance_report(&sir, &[vec![0]], 0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn contained_and_arborescent(n in 1usize..14, d in 0.05f64..0.6, gseed: u64, s: u64) {
        let inst = random_sir(n, d, gseed);
        let g = inst.graph();
        let mut c = Coupler::new(&inst).unwrap();
        let mut rng = stream(s, Purpose::Coupling, 0);
        for root in 0..n as NodeId {
            let o = c.sample(root, false, &mut rng);
            prop_assert!(o.is_contained());
            prop_assert_eq!(o.rr_sir[0], root);
            prop_assert_eq!(o.rr_ic[0], root);
            // each non-root SIR member has exactly one out-edge in edges_sir,
            // and following those edges reaches the root
            let mut next = vec![None; n];
            for &e in &o.edges_sir {
                let (u, v) = g.endpoints(e);
                prop_assert!(next[u as usize].is_none());
                prop_assert!(o.rr_sir.contains(&v));
                next[u as usize] = Some(v);
            }
            for &v in &o.rr_sir[1..] {
                let mut cur = v;
                let mut steps = 0;
                while cur != root {
                    cur = next[cur as usize].expect("member without a live edge");
                    steps += 1;
                    prop_assert!(steps <= n);
                }
            }
            prop_assert!(next[root as usize].is_none());
            prop_assert_eq!(o.edges_sir.len(), o.rr_sir.len() - 1);
            for &e in &o.edges_sir {
                prop_assert!(o.edges_ic.contains(&e));
            }
        }
    }
}

#![allow(dead_code)]

use cascade_core::generate::{generate, GeneratorSpec, Uniform};
use cascade_core::stream::{stream, unit, Purpose};
use cascade_core::{DirectedGraph, Instance, Model, NodeId};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A small instance with an exactly computable spread, and seed sets to
/// evaluate it on.
pub struct Oracle {
    pub name: String,
    pub inst: Instance,
    pub seed_sets: Vec<Vec<NodeId>>,
}

pub fn graph(n: usize, edges: &[(NodeId, NodeId)]) -> DirectedGraph {
    DirectedGraph::from_edges(n, edges).unwrap()
}

/// 0->1, 0->2 with beta = gamma = 1/2, then 1->3, 2->3 with beta = 1.
pub fn diamond_sir() -> Instance {
    let g = graph(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    Instance::sir(g, vec![0.5, 0.5, 1.0, 1.0], vec![0.5; 4]).unwrap()
}

pub fn fork_sir() -> Instance {
    Instance::sir(graph(3, &[(0, 1), (0, 2)]), vec![0.5; 2], vec![0.5; 3]).unwrap()
}

pub fn chain_sir(beta: f64, gamma: f64) -> Instance {
    Instance::sir(graph(3, &[(0, 1), (1, 2)]), vec![beta; 2], vec![gamma; 3]).unwrap()
}

/// Random SIR instance with heterogeneous parameters:
/// `beta in [0.15, 0.9]`, `gamma in [0.2, 1]`.
pub fn random_sir(n: usize, density: f64, seed: u64) -> Instance {
    let mut rng = stream(seed, Purpose::Generator, 0);
    let spec = GeneratorSpec::ErdosRenyi {
        n,
        edge_density: density,
        params: Uniform { model: Model::Sir, prob: 0.5, gamma: 0.5 },
    };
    let base = generate(&spec, &mut rng).unwrap();
    let beta = (0..base.edge_count()).map(|_| 0.15 + 0.75 * unit(&mut rng)).collect();
    let gamma = (0..n).map(|_| 0.2 + 0.8 * unit(&mut rng)).collect();
    Instance::sir(base.graph().clone(), beta, gamma).unwrap()
}

fn with_model(sir: &Instance, model: Model) -> Instance {
    match model {
        Model::Ic => sir.matched_ic().unwrap(),
        other => sir.with_model(other).unwrap(),
    }
}

/// The oracle-sized instances (n <= 8) in all three models.
pub fn oracle_instances() -> Vec<Oracle> {
    let bases: Vec<(&str, Instance, Vec<Vec<NodeId>>)> = vec![
        ("diamond", diamond_sir(), vec![vec![0], vec![1, 2], vec![3]]),
        ("fork", fork_sir(), vec![vec![0], vec![1]]),
        ("chain", chain_sir(0.7, 0.4), vec![vec![0], vec![1]]),
        ("random7", random_sir(7, 0.3, 11), vec![vec![0], vec![2, 5], vec![1, 3, 6]]),
        ("random8", random_sir(8, 0.25, 12), vec![vec![0], vec![4], vec![1, 7]]),
    ];
    let mut out = Vec::new();
    for (name, sir, sets) in bases {
        for model in [Model::Ic, Model::Sir, Model::Tsir { horizon: 2 }, Model::Tsir { horizon: 4 }] {
            out.push(Oracle {
                name: format!("{name}/{}{}", model.name(), model.horizon().map(|t| format!("{t}")).unwrap_or_default()),
                inst: with_model(&sir, model),
                seed_sets: sets.clone(),
            });
        }
    }
    out
}

/// Three oracle bases, used where a smaller sweep suffices.
pub fn oracle_bases() -> Vec<(String, Instance)> {
    vec![
        ("diamond".to_string(), diamond_sir()),
        ("random7".to_string(), random_sir(7, 0.3, 11)),
        ("random8".to_string(), random_sir(8, 0.25, 12)),
    ]
}

pub fn in_model(sir: &Instance, model: Model) -> Instance {
    with_model(sir, model)
}

pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `|freq - p| <= z * se`, with a floor for degenerate `p`.
pub fn within(freq: f64, p: f64, n: u64, z: f64) -> bool {
    (freq - p).abs() <= z * binomial_se(p, n).max(1.0 / n as f64)
}

/// Two-sample check for equal proportions `a/n` and `b/n`.
pub fn same_proportion(a: u64, b: u64, n: u64, z: f64) -> bool {
    let pa = a as f64 / n as f64;
    let pb = b as f64 / n as f64;
    let pooled = (pa + pb) / 2.0;
    let se = (2.0 * pooled * (1.0 - pooled) / n as f64).sqrt().max(1.0 / n as f64);
    (pa - pb).abs() <= z * se
}

/// Pearson goodness-of-fit p-value, pooling cells with expected count < 5.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * total as f64;
        if e < 5.0 {
            pool_obs += o as f64;
            pool_exp += e;
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    if pool_exp >= 5.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp;
        cells += 1;
    } else if pool_obs > 0.0 && pool_exp < 1e-9 {
        return 0.0;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Pearson two-sample homogeneity p-value over shared categories.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Bitmask of a node set (n <= 64).
pub fn mask_of(nodes: &[NodeId]) -> u64 {
    nodes.iter().fold(0, |m, &v| m | 1 << v)
}

pub fn mask_of_flags(flags: &[bool]) -> u64 {
    flags.iter().enumerate().filter(|(_, &f)| f).fold(0, |m, (v, _)| m | 1 << v)
}

/// Exact spread from the forward Markov chain over (infected, recovered)
/// masks. Independent of the library's realization-based oracle: it follows
/// the round-by-round dynamics directly. IC is run as SIR with gamma = 1.
pub fn forward_markov_sigma(inst: &Instance, seeds: &[NodeId]) -> f64 {
    let n = inst.node_count();
    assert!(n <= 12, "forward oracle is for tiny graphs");
    let g = inst.graph();
    let mut chain = Markov {
        inst,
        in_edges: (0..n as NodeId).map(|v| g.in_adj(v).collect()).collect(),
        memo: std::collections::HashMap::new(),
    };
    let seeds = mask_of(seeds) as u32;
    chain.value(seeds, 0, inst.horizon())
}

struct Markov<'a> {
    inst: &'a Instance,
    in_edges: Vec<Vec<(NodeId, u32)>>,
    memo: std::collections::HashMap<(u32, u32, u32), f64>,
}

impl Markov<'_> {
    fn value(&mut self, infected: u32, recovered: u32, rounds_left: Option<u32>) -> f64 {
        let ever = (infected | recovered).count_ones() as f64;
        if infected == 0 || rounds_left == Some(0) {
            return ever;
        }
        let key = (infected, recovered, rounds_left.unwrap_or(u32::MAX));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let n = self.inst.node_count();
        let touched = infected | recovered;
        // susceptible nodes with at least one infected in-neighbor
        let mut cand: Vec<(u32, f64)> = Vec::new();
        for v in 0..n as u32 {
            if touched >> v & 1 == 1 {
                continue;
            }
            let mut escape = 1.0;
            let mut hit = false;
            for &(u, e) in &self.in_edges[v as usize] {
                if infected >> u & 1 == 1 {
                    hit = true;
                    escape *= 1.0 - self.inst.edge_prob(e);
                }
            }
            if hit {
                cand.push((v, 1.0 - escape));
            }
        }
        let inf: Vec<(u32, f64)> = (0..n as u32)
            .filter(|&u| infected >> u & 1 == 1)
            .map(|u| (u, self.inst.recovery(u)))
            .collect();
        let next_left = rounds_left.map(|t| t - 1);
        let (mut total, mut stay) = (0.0, 0.0);
        let flips = cand.len() + inf.len();
        for outcome in 0u32..1 << flips {
            let mut p = 1.0;
            let mut new_inf = 0u32;
            let mut rec = 0u32;
            for (i, &(v, pv)) in cand.iter().enumerate() {
                if outcome >> i & 1 == 1 {
                    p *= pv;
                    new_inf |= 1 << v;
                } else {
                    p *= 1.0 - pv;
                }
            }
            for (j, &(u, gu)) in inf.iter().enumerate() {
                if outcome >> (cand.len() + j) & 1 == 1 {
                    p *= gu;
                    rec |= 1 << u;
                } else {
                    p *= 1.0 - gu;
                }
            }
            if p == 0.0 {
                continue;
            }
            let ni = (infected & !rec) | new_inf;
            let nr = recovered | rec;
            if next_left.is_none() && ni == infected && nr == recovered {
                stay += p;
                continue;
            }
            total += p * self.value(ni, nr, next_left);
        }
        let v = total / (1.0 - stay);
        self.memo.insert(key, v);
        v
    }
}

//! Exact expected spread on tiny instances, by dynamic programming over the
//! live-edge realization revealed one node at a time.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{Instance, Model, NodeId};
use crate::prob::{joint_outedge_distribution, MAX_JOINT_DEGREE};

pub const MAX_EXACT_NODES: usize = 10;
pub const MAX_EXACT_HORIZON: u32 = 16;
/// Cap on the number of memoized time-bounded states.
const MAX_TIMED_STATES: usize = 4_000_000;
/// Series truncation for SIR out-edge patterns.
const SERIES_TOL: f64 = 1e-15;

fn too_large(msg: String) -> Error {
    Error::TooLarge(msg)
}

/// `sigma(seeds)`: the expected number of influenced nodes.
///
/// Requires `n <= 10`, out-degree `<= 12`, and `T <= 16` for TSIR.
pub fn exact_sigma(inst: &Instance, seeds: &[NodeId]) -> Result<f64> {
    let seeds = inst.check_seeds(seeds)?;
    let n = inst.node_count();
    if n > MAX_EXACT_NODES {
        return Err(too_large(format!("{n} nodes, exact evaluation supports at most {MAX_EXACT_NODES}")));
    }
    let g = inst.graph();
    for u in 0..n as NodeId {
        if g.out_degree(u) > MAX_JOINT_DEGREE {
            return Err(too_large(format!("node {u} has out-degree {} > {MAX_JOINT_DEGREE}", g.out_degree(u))));
        }
    }
    if seeds.is_empty() {
        return Ok(0.0);
    }
    match inst.model() {
        Model::Ic | Model::Sir => Ok(ReachDp::new(inst)?.solve(&seeds)),
        Model::Tsir { horizon } => {
            if horizon > MAX_EXACT_HORIZON {
                return Err(too_large(format!("horizon {horizon} > {MAX_EXACT_HORIZON}")));
            }
            TimedDp::new(inst, horizon)?.solve(&seeds)
        }
    }
}

/// Untimed models: only the set of live out-neighbors of each node matters.
struct ReachDp {
    n: usize,
    /// Per node, the distribution of its live target set as a node mask.
    targets: Vec<Vec<(u32, f64)>>,
    memo: Vec<f64>,
}

impl ReachDp {
    fn new(inst: &Instance) -> Result<Self> {
        let n = inst.node_count();
        let g = inst.graph();
        let mut targets = Vec::with_capacity(n);
        for u in 0..n as NodeId {
            let outs = g.out_targets(u);
            let ids = g.out_edge_ids(u);
            let dist: Vec<(u32, f64)> = if outs.is_empty() {
                vec![(0, 1.0)]
            } else if inst.model() == Model::Ic {
                let mut dist = vec![(0u32, 1.0)];
                for (&v, &e) in outs.iter().zip(ids) {
                    let p = inst.edge_prob(e);
                    let mut next = Vec::with_capacity(dist.len() * 2);
                    for &(mask, w) in &dist {
                        next.push((mask, w * (1.0 - p)));
                        next.push((mask | 1 << v, w * p));
                    }
                    dist = next;
                }
                dist
            } else {
                let betas: Vec<f64> = ids.iter().map(|&e| inst.edge_prob(e)).collect();
                let joint = joint_outedge_distribution(&betas, inst.recovery(u), SERIES_TOL)?;
                joint
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(pattern, &w)| {
                        let mask = outs
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| pattern >> i & 1 == 1)
                            .fold(0u32, |m, (_, &v)| m | 1 << v);
                        (mask, w)
                    })
                    .collect()
            };
            targets.push(dist.into_iter().filter(|&(_, w)| w > 0.0).collect());
        }
        Ok(ReachDp { n, targets, memo: vec![f64::NAN; 1 << (2 * n)] })
    }

    fn solve(&mut self, seeds: &[NodeId]) -> f64 {
        let reached = seeds.iter().fold(0u32, |m, &s| m | 1 << s);
        self.value(reached, 0)
    }

    /// Expected final reach given `reached`, of which `processed` have had
    /// their out-edges revealed.
    fn value(&mut self, reached: u32, processed: u32) -> f64 {
        let pending = reached & !processed;
        if pending == 0 {
            return reached.count_ones() as f64;
        }
        let key = (reached as usize) | (processed as usize) << self.n;
        let cached = self.memo[key];
        if !cached.is_nan() {
            return cached;
        }
        let u = pending.trailing_zeros() as usize;
        let processed = processed | 1 << u;
        let mut total = 0.0;
        for i in 0..self.targets[u].len() {
            let (mask, w) = self.targets[u][i];
            total += w * self.value(reached | mask, processed);
        }
        self.memo[key] = total;
        total
    }
}

/// TSIR: nodes are settled in order of infection time (Dijkstra order); a
/// node settled at time `t` only needs its out-edge spans up to `T - t`.
struct TimedDp<'a> {
    inst: &'a Instance,
    n: usize,
    horizon: u32,
    memo: HashMap<u64, f64>,
}

const UNREACHED: u8 = 31;

impl<'a> TimedDp<'a> {
    fn new(inst: &'a Instance, horizon: u32) -> Result<Self> {
        let g = inst.graph();
        // branching per settled node is at most (T + 1)^out-degree
        let mut branching = 0f64;
        for u in 0..inst.node_count() as NodeId {
            branching += ((horizon + 1) as f64).powi(g.out_degree(u) as i32);
        }
        if branching > 1e6 {
            return Err(too_large(format!("time-bounded enumeration needs ~{branching:.0} branches per layer")));
        }
        Ok(TimedDp { inst, n: inst.node_count(), horizon, memo: HashMap::new() })
    }

    fn solve(&mut self, seeds: &[NodeId]) -> Result<f64> {
        let mut times = [UNREACHED; MAX_EXACT_NODES];
        for &s in seeds {
            times[s as usize] = 0;
        }
        self.value(&times, 0)
    }

    fn key(&self, times: &[u8; MAX_EXACT_NODES], settled: u32) -> u64 {
        let mut k = settled as u64;
        for &t in &times[..self.n] {
            k = k << 5 | t as u64;
        }
        k
    }

    fn value(&mut self, times: &[u8; MAX_EXACT_NODES], settled: u32) -> Result<f64> {
        // next node to settle: smallest tentative time, then smallest id
        let next = (0..self.n)
            .filter(|&v| settled >> v & 1 == 0 && times[v] != UNREACHED)
            .min_by_key(|&v| (times[v], v));
        let Some(u) = next else {
            return Ok(settled.count_ones() as f64);
        };
        let key = self.key(times, settled);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        if self.memo.len() >= MAX_TIMED_STATES {
            return Err(too_large("time-bounded state space exceeds the enumeration budget".into()));
        }

        let settled = settled | 1 << u;
        let t_u = times[u] as u32;
        let remaining = self.horizon - t_u;
        let g = self.inst.graph();

        // edges that could still lower a target's tentative time
        let mut edges: Vec<(usize, f64, u32)> = Vec::new();
        for (v, e) in g.out_adj(u as NodeId) {
            let v = v as usize;
            if settled >> v & 1 == 1 {
                continue;
            }
            let useful = if times[v] == UNREACHED {
                remaining
            } else {
                (times[v] as u32).saturating_sub(t_u + 1).min(remaining)
            };
            if useful > 0 {
                edges.push((v, self.inst.edge_prob(e), useful));
            }
        }
        if edges.is_empty() {
            let v = self.value(times, settled)?;
            self.memo.insert(key, v);
            return Ok(v);
        }

        // the cap on spans is min(recovery round, remaining)
        let gamma = self.inst.recovery(u as NodeId);
        let mut total = 0.0;
        for cap in 1..=remaining {
            let w_cap = if cap < remaining {
                gamma * (1.0 - gamma).powi(cap as i32 - 1)
            } else {
                (1.0 - gamma).powi(cap as i32 - 1)
            };
            if w_cap == 0.0 {
                continue;
            }
            total += w_cap * self.branch(times, settled, t_u, cap, &edges, 0)?;
        }
        self.memo.insert(key, total);
        Ok(total)
    }

    /// Enumerates spans of `edges[i..]` with every span capped at `cap`.
    fn branch(
        &mut self,
        times: &[u8; MAX_EXACT_NODES],
        settled: u32,
        t_u: u32,
        cap: u32,
        edges: &[(usize, f64, u32)],
        i: usize,
    ) -> Result<f64> {
        if i == edges.len() {
            return self.value(times, settled);
        }
        let (v, beta, useful) = edges[i];
        let top = useful.min(cap);
        let mut total = 0.0;
        let mut miss = 1.0;
        let mut fail_before = 1.0; // (1 - beta)^(s - 1)
        for span in 1..=top {
            let w = beta * fail_before;
            fail_before *= 1.0 - beta;
            if w > 0.0 {
                let mut next = *times;
                next[v] = (t_u + span) as u8;
                total += w * self.branch(&next, settled, t_u, cap, edges, i + 1)?;
            }
            miss -= w;
        }
        if miss > 0.0 {
            total += miss * self.branch(times, settled, t_u, cap, edges, i + 1)?;
        }
        Ok(total)
    }
}

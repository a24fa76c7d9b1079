//! Live-edge realizations: one random subgraph per cascade, in which a node
//! is influenced iff it is reachable from the seeds (within span budget `T`
//! for TSIR).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::error::Result;
use crate::graph::{DirectedGraph, EdgeId, Instance, NodeId};
use crate::stream::{first_success_by_trials, first_success_capped, unit};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveEdgeGraph {
    /// Live edge ids in increasing order.
    pub live: Vec<EdgeId>,
    /// Infection span of each live edge, aligned with `live` (TSIR only).
    pub span: Option<Vec<u32>>,
}

/// How geometric waiting times are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RoundDraw {
    /// One uniform per waiting time.
    #[default]
    InverseTransform,
    /// One coin per round.
    PerRound,
}

impl RoundDraw {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R, p: f64, cap: u32) -> u32 {
        match self {
            RoundDraw::InverseTransform => first_success_capped(rng, p, cap),
            RoundDraw::PerRound => first_success_by_trials(rng, p, cap),
        }
    }
}

impl LiveEdgeGraph {
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Per-edge weight: 0 for blocked edges, the span (or 1 without spans)
    /// for live ones.
    pub fn weights(&self, m: usize) -> Vec<u32> {
        let mut w = vec![0u32; m];
        match &self.span {
            Some(span) => {
                for (&e, &s) in self.live.iter().zip(span) {
                    w[e as usize] = s;
                }
            }
            None => {
                for &e in &self.live {
                    w[e as usize] = 1;
                }
            }
        }
        w
    }

    pub fn is_live(&self, e: EdgeId) -> bool {
        self.live.binary_search(&e).is_ok()
    }

    /// Nodes reachable from `seeds` through live edges.
    pub fn reachable(&self, g: &DirectedGraph, seeds: &[NodeId]) -> Vec<bool> {
        let w = self.weights(g.edge_count());
        let mut seen = vec![false; g.node_count()];
        let mut stack: Vec<NodeId> = Vec::new();
        for &s in seeds {
            if !seen[s as usize] {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for (v, e) in g.out_adj(u) {
                if w[e as usize] > 0 && !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Nodes whose span-weighted distance from `seeds` is at most `horizon`
    /// (Dijkstra).
    pub fn t_reachable(&self, g: &DirectedGraph, seeds: &[NodeId], horizon: u32) -> Vec<bool> {
        let w = self.weights(g.edge_count());
        let mut dist = vec![u32::MAX; g.node_count()];
        let mut heap = BinaryHeap::new();
        for &s in seeds {
            dist[s as usize] = 0;
            heap.push(Reverse((0u32, s)));
        }
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for (v, e) in g.out_adj(u) {
                let we = w[e as usize];
                if we == 0 {
                    continue;
                }
                let nd = d + we;
                if nd <= horizon && nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist.iter().map(|&d| d <= horizon).collect()
    }

    /// Influenced set under the instance's model.
    pub fn influenced(&self, inst: &Instance, seeds: &[NodeId]) -> Vec<bool> {
        match inst.horizon() {
            Some(t) => self.t_reachable(inst.graph(), seeds, t),
            None => self.reachable(inst.graph(), seeds),
        }
    }
}

/// Each edge independently live with probability `p_e`.
pub fn sample_live_ic<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<LiveEdgeGraph> {
    inst.expect_model("ic")?;
    let live = (0..inst.edge_count() as EdgeId)
        .filter(|&e| unit(rng) < inst.edge_prob(e))
        .collect();
    Ok(LiveEdgeGraph { live, span: None })
}

/// Per node `u`: recovery round `R ~ Geometric(gamma_u)`, and for each
/// out-edge the first successful attempt `F_e ~ Geometric(beta_e)`; the edge
/// is live iff `F_e <= R`. Both draws are exact inverse transforms.
pub fn sample_live_sir<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<LiveEdgeGraph> {
    inst.expect_model("sir")?;
    let g = inst.graph();
    let mut live = Vec::new();
    for u in 0..g.node_count() as NodeId {
        if g.out_degree(u) == 0 {
            continue;
        }
        let recovery = first_success_capped(rng, inst.recovery(u), u32::MAX - 1);
        for &e in g.out_edge_ids(u) {
            if first_success_capped(rng, inst.edge_prob(e), recovery) <= recovery {
                live.push(e);
            }
        }
    }
    live.sort_unstable();
    Ok(LiveEdgeGraph { live, span: None })
}

/// TSIR realization; spans are first-success rounds, live iff
/// `span <= min(R_u, T)`.
pub fn sample_live_tsir<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<LiveEdgeGraph> {
    sample_live_tsir_with(inst, RoundDraw::InverseTransform, rng)
}

pub fn sample_live_tsir_with<R: Rng + ?Sized>(
    inst: &Instance,
    draw: RoundDraw,
    rng: &mut R,
) -> Result<LiveEdgeGraph> {
    inst.expect_model("tsir")?;
    let horizon = inst.horizon().unwrap_or(0);
    let g = inst.graph();
    let mut pairs: Vec<(EdgeId, u32)> = Vec::new();
    if horizon > 0 {
        for u in 0..g.node_count() as NodeId {
            if g.out_degree(u) == 0 {
                continue;
            }
            // T + 1 stands for "not recovered within the horizon"
            let cap = draw.draw(rng, inst.recovery(u), horizon).min(horizon);
            for &e in g.out_edge_ids(u) {
                let span = draw.draw(rng, inst.edge_prob(e), cap);
                if span <= cap {
                    pairs.push((e, span));
                }
            }
        }
    }
    pairs.sort_unstable();
    let (live, span) = pairs.into_iter().unzip();
    Ok(LiveEdgeGraph { live, span: Some(span) })
}

/// Dispatches on the instance's model.
pub fn sample_live<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<LiveEdgeGraph> {
    match inst.model() {
        crate::graph::Model::Ic => sample_live_ic(inst, rng),
        crate::graph::Model::Sir => sample_live_sir(inst, rng),
        crate::graph::Model::Tsir { .. } => sample_live_tsir(inst, rng),
    }
}

//! Directed graphs in dual CSR form and diffusion instances built on them.
//!
//! Edge ids are assigned in insertion order. Both adjacency directions list
//! edges in increasing edge id, which is the "index order" the RR samplers
//! and the coupling reveal edges in.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::prob;

pub type NodeId = u32;
pub type EdgeId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    src: Vec<NodeId>,
    dst: Vec<NodeId>,
    out_offsets: Vec<usize>,
    out_edges: Vec<EdgeId>,
    out_targets: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_edges: Vec<EdgeId>,
    in_sources: Vec<NodeId>,
}

impl DirectedGraph {
    /// Builds a graph from `(src, dst)` pairs; the i-th pair gets edge id `i`.
    ///
    /// Rejects self-loops, duplicate pairs and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if n > NodeId::MAX as usize {
            return Err(Error::TooLarge(format!("{n} nodes exceed the 32-bit id space")));
        }
        if edges.len() > EdgeId::MAX as usize {
            return Err(Error::TooLarge(format!("{} edges exceed the 32-bit id space", edges.len())));
        }
        let mut src = Vec::with_capacity(edges.len());
        let mut dst = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            for x in [u, v] {
                if x as usize >= n {
                    return Err(Error::NodeOutOfRange { node: x as u64, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            src.push(u);
            dst.push(v);
        }

        let (out_offsets, out_edges) = bucket_by(n, &src);
        let (in_offsets, in_edges) = bucket_by(n, &dst);
        let out_targets = out_edges.iter().map(|&e| dst[e as usize]).collect();
        let in_sources = in_edges.iter().map(|&e| src[e as usize]).collect();

        let graph = DirectedGraph {
            n,
            src,
            dst,
            out_offsets,
            out_edges,
            out_targets,
            in_offsets,
            in_edges,
            in_sources,
        };
        graph.check_duplicates()?;
        Ok(graph)
    }

    fn check_duplicates(&self) -> Result<()> {
        let mut scratch = Vec::new();
        for u in 0..self.n as NodeId {
            let targets = self.out_targets(u);
            if targets.len() < 2 {
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(targets);
            scratch.sort_unstable();
            if let Some(w) = scratch.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateEdge { src: u, dst: w[0] });
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }

    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        (self.src[e as usize], self.dst[e as usize])
    }

    pub fn source(&self, e: EdgeId) -> NodeId {
        self.src[e as usize]
    }

    pub fn target(&self, e: EdgeId) -> NodeId {
        self.dst[e as usize]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    /// Out-edge ids of `u` in index order.
    pub fn out_edge_ids(&self, u: NodeId) -> &[EdgeId] {
        let u = u as usize;
        &self.out_edges[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    /// Targets of `u`'s out-edges, aligned with [`Self::out_edge_ids`].
    pub fn out_targets(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    pub fn in_edge_ids(&self, v: NodeId) -> &[EdgeId] {
        let v = v as usize;
        &self.in_edges[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// Sources of `v`'s in-edges, aligned with [`Self::in_edge_ids`].
    pub fn in_sources(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// `(target, edge)` pairs of `u` in index order.
    pub fn out_adj(&self, u: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        self.out_targets(u).iter().copied().zip(self.out_edge_ids(u).iter().copied())
    }

    /// `(source, edge)` pairs of `v` in index order.
    pub fn in_adj(&self, v: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        self.in_sources(v).iter().copied().zip(self.in_edge_ids(v).iter().copied())
    }

    /// All edges as `(src, dst)` in edge-id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.src.iter().copied().zip(self.dst.iter().copied())
    }

    /// Nodes reachable from `seeds` along out-edges, seeds included.
    pub fn forward_closure(&self, seeds: &[NodeId]) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = Vec::new();
        for &s in seeds {
            if !seen[s as usize] {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for &v in self.out_targets(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Stable counting sort of edge ids by `key[e]`.
fn bucket_by(n: usize, key: &[NodeId]) -> (Vec<usize>, Vec<EdgeId>) {
    let mut offsets = vec![0usize; n + 1];
    for &k in key {
        offsets[k as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut order = vec![0 as EdgeId; key.len()];
    for (e, &k) in key.iter().enumerate() {
        order[cursor[k as usize]] = e as EdgeId;
        cursor[k as usize] += 1;
    }
    (offsets, order)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Ic,
    Sir,
    Tsir { horizon: u32 },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Ic => "ic",
            Model::Sir => "sir",
            Model::Tsir { .. } => "tsir",
        }
    }

    pub fn horizon(&self) -> Option<u32> {
        match *self {
            Model::Tsir { horizon } => Some(horizon),
            _ => None,
        }
    }

    /// SIR and TSIR share the (beta, gamma) parameterization.
    pub fn has_recovery(&self) -> bool {
        !matches!(self, Model::Ic)
    }
}

/// Per-edge and per-node diffusion parameters.
///
/// `edge_prob` holds `p_e` under IC and `beta_e` under SIR/TSIR.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionParams {
    pub model: Model,
    pub edge_prob: Vec<f64>,
    pub node_recovery: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    graph: DirectedGraph,
    params: DiffusionParams,
}

impl Instance {
    pub fn new(graph: DirectedGraph, params: DiffusionParams) -> Result<Self> {
        if params.edge_prob.len() != graph.edge_count() {
            return Err(invalid(format!(
                "{} edge probabilities for {} edges",
                params.edge_prob.len(),
                graph.edge_count()
            )));
        }
        match (&params.model, &params.node_recovery) {
            (Model::Ic, None) => {
                for (e, &p) in params.edge_prob.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(invalid(format!("edge {e}: p = {p} outside [0, 1]")));
                    }
                }
            }
            (Model::Ic, Some(_)) => {
                return Err(invalid("IC instances carry no recovery probabilities"));
            }
            (_, None) => {
                return Err(invalid("SIR/TSIR instances need per-node recovery probabilities"));
            }
            (_, Some(gamma)) => {
                if gamma.len() != graph.node_count() {
                    return Err(invalid(format!(
                        "{} recovery probabilities for {} nodes",
                        gamma.len(),
                        graph.node_count()
                    )));
                }
                for (v, &g) in gamma.iter().enumerate() {
                    if !(g > 0.0 && g <= 1.0) {
                        return Err(invalid(format!("node {v}: gamma = {g} outside (0, 1]")));
                    }
                }
                for (e, &b) in params.edge_prob.iter().enumerate() {
                    if !(b > 0.0 && b <= 1.0) {
                        return Err(invalid(format!("edge {e}: beta = {b} outside (0, 1]")));
                    }
                }
            }
        }
        Ok(Instance { graph, params })
    }

    /// IC instance on `graph` with per-edge probabilities.
    pub fn ic(graph: DirectedGraph, p: Vec<f64>) -> Result<Self> {
        Self::new(graph, DiffusionParams { model: Model::Ic, edge_prob: p, node_recovery: None })
    }

    /// SIR instance with per-edge `beta` and per-node `gamma`.
    pub fn sir(graph: DirectedGraph, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        Self::new(
            graph,
            DiffusionParams { model: Model::Sir, edge_prob: beta, node_recovery: Some(gamma) },
        )
    }

    pub fn tsir(graph: DirectedGraph, beta: Vec<f64>, gamma: Vec<f64>, horizon: u32) -> Result<Self> {
        Self::new(
            graph,
            DiffusionParams {
                model: Model::Tsir { horizon },
                edge_prob: beta,
                node_recovery: Some(gamma),
            },
        )
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn params(&self) -> &DiffusionParams {
        &self.params
    }

    pub fn model(&self) -> Model {
        self.params.model
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// `p_e` (IC) or `beta_e` (SIR/TSIR).
    #[inline]
    pub fn edge_prob(&self, e: EdgeId) -> f64 {
        self.params.edge_prob[e as usize]
    }

    /// `gamma_v`; IC nodes behave as if `gamma = 1`.
    #[inline]
    pub fn recovery(&self, v: NodeId) -> f64 {
        match &self.params.node_recovery {
            Some(g) => g[v as usize],
            None => 1.0,
        }
    }

    pub fn horizon(&self) -> Option<u32> {
        self.params.model.horizon()
    }

    pub(crate) fn expect_model(&self, expected: &'static str) -> Result<()> {
        let found = self.params.model.name();
        if found == expected {
            Ok(())
        } else {
            Err(Error::ModelMismatch { expected, found })
        }
    }

    pub(crate) fn expect_recovery(&self) -> Result<()> {
        if self.params.model.has_recovery() {
            Ok(())
        } else {
            Err(Error::ModelMismatch { expected: "sir or tsir", found: "ic" })
        }
    }

    /// The IC instance whose edge marginals match this SIR/TSIR instance:
    /// `p_e = aggregate_edge_prob(beta_e, gamma_src(e))`.
    pub fn matched_ic(&self) -> Result<Instance> {
        self.expect_recovery()?;
        let p = (0..self.edge_count() as EdgeId)
            .map(|e| {
                let u = self.graph.source(e);
                prob::aggregate_edge_prob(self.edge_prob(e), self.recovery(u))
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::ic(self.graph.clone(), p)
    }

    /// Same graph and parameters, re-tagged with another recovery model.
    pub fn with_model(&self, model: Model) -> Result<Instance> {
        self.expect_recovery()?;
        if !model.has_recovery() {
            return Err(invalid("use matched_ic to translate to the IC model"));
        }
        Instance::new(
            self.graph.clone(),
            DiffusionParams { model, ..self.params.clone() },
        )
    }

    /// Validates a seed list and returns it deduplicated, order preserved.
    pub fn check_seeds(&self, seeds: &[NodeId]) -> Result<Vec<NodeId>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::with_capacity(seeds.len());
        for &s in seeds {
            if s as usize >= n {
                return Err(Error::NodeOutOfRange { node: s as u64, n });
            }
            if !seen[s as usize] {
                seen[s as usize] = true;
                out.push(s);
            }
        }
        Ok(out)
    }
}

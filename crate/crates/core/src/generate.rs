//! Instance generators: random graphs, simple shapes, and the two-layer
//! dominance gadget together with its star-vs-gadget composite.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::graph::{DirectedGraph, Instance, Model, NodeId};
use crate::prob::aggregate_edge_prob;
use crate::stream::unit;

/// Diffusion parameters applied uniformly to generated edges and nodes.
///
/// `prob` is `p` for IC and `beta` for SIR/TSIR; `gamma` is ignored for IC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    pub model: Model,
    pub prob: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    /// G(n, density) over ordered pairs without self-loops.
    ErdosRenyi { n: usize, edge_density: f64, params: Uniform },
    /// Center `0` with edges to leaves `1..=leaves`.
    Star { leaves: usize, params: Uniform },
    /// Chain `0 -> 1 -> ... -> length` (`length` edges).
    Path { length: usize, params: Uniform },
    /// Seed `v = 0` with `b` uncertain edges to middle nodes `1..=b`, each
    /// middle node wired deterministically to the hub `u = b + 1`, and the hub
    /// wired deterministically to `n0` sinks.
    ///
    /// `model` must be IC, SIR or TSIR; under IC the uncertain edges get the
    /// matched probability `aggregate_edge_prob(beta, gamma)`.
    Fig1Gadget { b: usize, n0: usize, beta: f64, gamma: f64, model: Model },
    /// Star (center `0`, leaves `1..=star_leaves`) next to `gadget_copies`
    /// copies of the two-layer gadget that share the seed node
    /// `v = star_leaves + 1`.
    ///
    /// Star edges fire with probability `left_edge_prob` in both models
    /// (under SIR the star center gets `gamma = 1`).
    Fig2Gadget {
        star_leaves: usize,
        gadget_copies: usize,
        b: usize,
        n0: usize,
        beta: f64,
        gamma: f64,
        left_edge_prob: f64,
        model: Model,
    },
}

/// Node layout of a generated two-layer gadget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GadgetLayout {
    pub seed: NodeId,
    pub hub: NodeId,
    pub first_middle: NodeId,
    pub first_sink: NodeId,
}

impl GadgetLayout {
    pub fn fig1(b: usize) -> Self {
        GadgetLayout { seed: 0, first_middle: 1, hub: b as NodeId + 1, first_sink: b as NodeId + 2 }
    }
}

struct Builder {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    probs: Vec<f64>,
    gamma: Vec<f64>,
}

impl Builder {
    fn new(n: usize, gamma: f64) -> Self {
        Builder { n, edges: Vec::new(), probs: Vec::new(), gamma: vec![gamma; n] }
    }

    fn edge(&mut self, u: usize, v: usize, p: f64) {
        self.edges.push((u as NodeId, v as NodeId));
        self.probs.push(p);
    }

    fn finish(self, model: Model) -> Result<Instance> {
        let graph = DirectedGraph::from_edges(self.n, &self.edges)?;
        match model {
            Model::Ic => Instance::ic(graph, self.probs),
            Model::Sir => Instance::sir(graph, self.probs, self.gamma),
            Model::Tsir { horizon } => Instance::tsir(graph, self.probs, self.gamma, horizon),
        }
    }
}

fn positive(name: &str, x: usize) -> Result<()> {
    if x == 0 {
        Err(invalid(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

fn check_uniform(params: &Uniform) -> Result<()> {
    if params.model.has_recovery() {
        if !(params.prob > 0.0 && params.prob <= 1.0) {
            return Err(invalid(format!("beta = {} outside (0, 1]", params.prob)));
        }
        if !(params.gamma > 0.0 && params.gamma <= 1.0) {
            return Err(invalid(format!("gamma = {} outside (0, 1]", params.gamma)));
        }
    } else if !(0.0..=1.0).contains(&params.prob) {
        return Err(invalid(format!("p = {} outside [0, 1]", params.prob)));
    }
    Ok(())
}

/// Appends one gadget hanging off `seed`, starting at node index `next`.
/// Returns the first unused node index.
fn add_gadget(bld: &mut Builder, seed: usize, next: usize, b: usize, n0: usize, dashed: f64) -> usize {
    let middle = next;
    let hub = middle + b;
    for i in 0..b {
        bld.edge(seed, middle + i, dashed);
    }
    for i in 0..b {
        bld.edge(middle + i, hub, 1.0);
    }
    for j in 0..n0 {
        bld.edge(hub, hub + 1 + j, 1.0);
    }
    hub + 1 + n0
}

fn dashed_prob(model: Model, beta: f64, gamma: f64) -> Result<f64> {
    match model {
        Model::Ic => aggregate_edge_prob(beta, gamma),
        _ => {
            aggregate_edge_prob(beta, gamma)?; // domain check
            Ok(beta)
        }
    }
}

pub fn generate<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<Instance> {
    match *spec {
        GeneratorSpec::ErdosRenyi { n, edge_density, params } => {
            positive("n", n)?;
            check_uniform(&params)?;
            if !(0.0..=1.0).contains(&edge_density) {
                return Err(invalid(format!("edge density {edge_density} outside [0, 1]")));
            }
            let mut bld = Builder::new(n, params.gamma);
            for (u, v) in erdos_renyi_pairs(n, edge_density, rng) {
                bld.edge(u, v, params.prob);
            }
            bld.finish(params.model)
        }
        GeneratorSpec::Star { leaves, params } => {
            positive("leaves", leaves)?;
            check_uniform(&params)?;
            let mut bld = Builder::new(leaves + 1, params.gamma);
            for leaf in 1..=leaves {
                bld.edge(0, leaf, params.prob);
            }
            bld.finish(params.model)
        }
        GeneratorSpec::Path { length, params } => {
            positive("length", length)?;
            check_uniform(&params)?;
            let mut bld = Builder::new(length + 1, params.gamma);
            for u in 0..length {
                bld.edge(u, u + 1, params.prob);
            }
            bld.finish(params.model)
        }
        GeneratorSpec::Fig1Gadget { b, n0, beta, gamma, model } => {
            positive("b", b)?;
            let dashed = dashed_prob(model, beta, gamma)?;
            let mut bld = Builder::new(b + n0 + 2, gamma);
            let end = add_gadget(&mut bld, 0, 1, b, n0, dashed);
            debug_assert_eq!(end, bld.n);
            bld.finish(model)
        }
        GeneratorSpec::Fig2Gadget {
            star_leaves,
            gadget_copies,
            b,
            n0,
            beta,
            gamma,
            left_edge_prob,
            model,
        } => {
            positive("star_leaves", star_leaves)?;
            positive("gadget_copies", gadget_copies)?;
            positive("b", b)?;
            let dashed = dashed_prob(model, beta, gamma)?;
            let valid_left = if model.has_recovery() {
                left_edge_prob > 0.0 && left_edge_prob <= 1.0
            } else {
                (0.0..=1.0).contains(&left_edge_prob)
            };
            if !valid_left {
                return Err(invalid(format!("left edge probability {left_edge_prob} out of range")));
            }
            let n = 1 + star_leaves + 1 + gadget_copies * (b + 1 + n0);
            let mut bld = Builder::new(n, gamma);
            bld.gamma[0] = 1.0;
            for leaf in 1..=star_leaves {
                bld.edge(0, leaf, left_edge_prob);
            }
            let seed = star_leaves + 1;
            let mut next = seed + 1;
            for _ in 0..gadget_copies {
                next = add_gadget(&mut bld, seed, next, b, n0, dashed);
            }
            debug_assert_eq!(next, n);
            bld.finish(model)
        }
    }
}

/// Ordered pairs `(u, v)`, `u != v`, each kept independently with
/// probability `density`, in lexicographic order. Geometric skipping makes
/// this O(n + m).
fn erdos_renyi_pairs<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if n < 2 || density <= 0.0 {
        return out;
    }
    let slots = (n as u64) * (n as u64 - 1);
    let to_pair = |k: u64| {
        let u = k / (n as u64 - 1);
        let mut v = k % (n as u64 - 1);
        if v >= u {
            v += 1;
        }
        (u as usize, v as usize)
    };
    if density >= 1.0 {
        return (0..slots).map(to_pair).collect();
    }
    let log_q = (-density).ln_1p();
    let mut k: u64 = 0;
    loop {
        let u = 1.0 - unit(rng);
        let skip = (u.ln() / log_q).floor();
        if skip >= (slots - k) as f64 {
            break;
        }
        k += skip as u64;
        out.push(to_pair(k));
        k += 1;
        if k >= slots {
            break;
        }
    }
    out
}

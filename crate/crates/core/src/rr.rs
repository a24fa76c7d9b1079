//! Reverse-reachable (RR) set sampling and RR collections.
//!
//! An RR set is the set of nodes that reach a uniformly random root in a
//! random live-edge realization. Edges are revealed only as needed:
//!
//! * IC: reverse BFS with one coin per scanned in-edge.
//! * SIR: candidates with unrevealed edges into the set are visited in
//!   increasing id; their edges into the set are revealed in edge-id order,
//!   each conditioned on all previously blocked out-edges of the same node,
//!   stopping at the first live one.
//! * TSIR: every in-edge of every discovered node is revealed with its
//!   infection span, then nodes farther than `T` from the root are pruned.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::graph::{EdgeId, Instance, Model, NodeId};
use crate::prob::live_given_blocked_product;
use crate::stream::{first_success_capped, stream, unit, Purpose};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RRSet {
    pub root: NodeId,
    /// Root first, then the other members in discovery order.
    pub members: Vec<NodeId>,
    /// In-edges scanned while sampling.
    pub work: u64,
}

/// Reusable sampler state for one instance. Marks are generation-stamped so
/// nothing is cleared between samples.
pub struct RrSampler<'a> {
    inst: &'a Instance,
    stamp: u32,
    member: Vec<u32>,
    queued: Vec<u32>,
    touched: Vec<u32>,
    blocked_product: Vec<f64>,
    pending: Vec<Vec<EdgeId>>,
    heap: BinaryHeap<Reverse<NodeId>>,
    recovery: Vec<u32>,
    dist: Vec<u32>,
    recorded: Vec<(NodeId, u32)>,
    discovered: Vec<NodeId>,
    recorded_range: Vec<(u32, u32)>,
    buckets: Vec<Vec<NodeId>>,
}

impl<'a> RrSampler<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let n = inst.node_count();
        let pending = if inst.model() == Model::Sir { vec![Vec::new(); n] } else { Vec::new() };
        let timed = matches!(inst.model(), Model::Tsir { .. });
        let n_timed = if timed { n } else { 0 };
        RrSampler {
            inst,
            stamp: 0,
            member: vec![0; n],
            queued: vec![0; n],
            touched: vec![0; n],
            blocked_product: vec![1.0; if inst.model() == Model::Sir { n } else { 0 }],
            pending,
            heap: BinaryHeap::new(),
            recovery: vec![0; n_timed],
            dist: vec![0; n_timed],
            recorded: Vec::new(),
            discovered: Vec::new(),
            recorded_range: vec![(0, 0); n_timed],
            buckets: Vec::new(),
        }
    }

    fn next_stamp(&mut self) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.member.fill(0);
            self.queued.fill(0);
            self.touched.fill(0);
            self.stamp = 1;
        }
    }

    /// RR set for a uniformly random root.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> RRSet {
        let root = rng.random_range(0..self.inst.node_count() as NodeId);
        self.sample_rooted(root, rng)
    }

    /// RR set of a given root. `root` must be a valid node id.
    pub fn sample_rooted<R: Rng + ?Sized>(&mut self, root: NodeId, rng: &mut R) -> RRSet {
        self.next_stamp();
        match self.inst.model() {
            Model::Ic => self.sample_ic(root, rng),
            Model::Sir => self.sample_sir(root, rng),
            Model::Tsir { horizon } => self.sample_tsir(root, horizon, rng),
        }
    }

    fn sample_ic<R: Rng + ?Sized>(&mut self, root: NodeId, rng: &mut R) -> RRSet {
        let g = self.inst.graph();
        let s = self.stamp;
        let mut members = vec![root];
        self.member[root as usize] = s;
        let mut work = 0u64;
        let mut head = 0;
        while head < members.len() {
            let x = members[head];
            head += 1;
            for (u, e) in g.in_adj(x) {
                work += 1;
                if self.member[u as usize] != s && unit(rng) < self.inst.edge_prob(e) {
                    self.member[u as usize] = s;
                    members.push(u);
                }
            }
        }
        RRSet { root, members, work }
    }

    fn sample_sir<R: Rng + ?Sized>(&mut self, root: NodeId, rng: &mut R) -> RRSet {
        let g = self.inst.graph();
        let s = self.stamp;
        let mut members = vec![root];
        self.member[root as usize] = s;
        let mut work = 0u64;
        self.heap.clear();

        let mut newest = root;
        loop {
            for (u, e) in g.in_adj(newest) {
                work += 1;
                let ui = u as usize;
                if self.member[ui] == s {
                    continue;
                }
                self.pending[ui].push(e);
                if self.queued[ui] != s {
                    self.queued[ui] = s;
                    self.heap.push(Reverse(u));
                }
            }
            // smallest-id candidate first
            let mut joined = None;
            while let Some(Reverse(u)) = self.heap.pop() {
                let ui = u as usize;
                self.queued[ui] = 0;
                if self.touched[ui] != s {
                    self.touched[ui] = s;
                    self.blocked_product[ui] = 1.0;
                }
                let mut pending = std::mem::take(&mut self.pending[ui]);
                pending.sort_unstable();
                let gamma = self.inst.recovery(u);
                let mut q = self.blocked_product[ui];
                let mut live = false;
                for &e in &pending {
                    let beta = self.inst.edge_prob(e);
                    if unit(rng) < live_given_blocked_product(beta, gamma, q) {
                        live = true;
                        break;
                    }
                    q *= 1.0 - beta;
                }
                self.blocked_product[ui] = q;
                pending.clear();
                self.pending[ui] = pending;
                if live {
                    joined = Some(u);
                    break;
                }
            }
            match joined {
                Some(u) => {
                    self.member[u as usize] = s;
                    members.push(u);
                    newest = u;
                }
                None => break,
            }
        }
        RRSet { root, members, work }
    }

    fn sample_tsir<R: Rng + ?Sized>(&mut self, root: NodeId, horizon: u32, rng: &mut R) -> RRSet {
        let g = self.inst.graph();
        let s = self.stamp;
        self.recorded.clear();
        let mut discovered = std::mem::take(&mut self.discovered);
        discovered.clear();
        discovered.push(root);
        self.member[root as usize] = s;
        let mut queue = VecDeque::from([root]);
        let mut work = 0u64;
        let mut max_span = 0u32;

        while let Some(u) = queue.pop_front() {
            let start = self.recorded.len() as u32;
            for (w, e) in g.in_adj(u) {
                work += 1;
                let wi = w as usize;
                if self.touched[wi] != s {
                    // T + 1 means "not recovered within the horizon"
                    self.touched[wi] = s;
                    self.recovery[wi] = first_success_capped(rng, self.inst.recovery(w), horizon);
                }
                let cap = self.recovery[wi].min(horizon);
                let span = first_success_capped(rng, self.inst.edge_prob(e), cap);
                if span <= cap {
                    self.recorded.push((w, span));
                    max_span = max_span.max(span);
                    if self.member[wi] != s {
                        self.member[wi] = s;
                        discovered.push(w);
                        queue.push_back(w);
                    }
                }
            }
            self.recorded_range[u as usize] = (start, self.recorded.len() as u32);
        }

        self.prune_by_distance(root, horizon, max_span, &discovered);
        let members = discovered.iter().copied().filter(|&v| self.dist[v as usize] <= horizon).collect();
        self.discovered = discovered;
        RRSet { root, members, work }
    }

    /// After a TSIR sample: every discovered node (before pruning) and the
    /// recorded live edges as `(source, target, span)`.
    pub fn tsir_trace(&self) -> (Vec<NodeId>, Vec<(NodeId, NodeId, u32)>) {
        let mut edges = Vec::with_capacity(self.recorded.len());
        for &u in &self.discovered {
            let (lo, hi) = self.recorded_range[u as usize];
            for &(w, span) in &self.recorded[lo as usize..hi as usize] {
                edges.push((w, u, span));
            }
        }
        (self.discovered.clone(), edges)
    }

    /// Dial's algorithm from `root` over the recorded (reversed) edges.
    /// Buckets are cyclic with period `max_span + 1`.
    fn prune_by_distance(&mut self, root: NodeId, horizon: u32, max_span: u32, discovered: &[NodeId]) {
        for &v in discovered {
            self.dist[v as usize] = u32::MAX;
        }
        let width = max_span as usize + 1;
        if self.buckets.len() < width {
            self.buckets.resize_with(width, Vec::new);
        }
        for b in &mut self.buckets[..width] {
            b.clear();
        }
        self.dist[root as usize] = 0;
        self.buckets[0].push(root);
        let mut live_entries = 1usize;
        let mut d = 0u32;
        while live_entries > 0 && d <= horizon {
            let slot = d as usize % width;
            let mut bucket = std::mem::take(&mut self.buckets[slot]);
            live_entries -= bucket.len();
            for &u in &bucket {
                if self.dist[u as usize] != d {
                    continue;
                }
                let (lo, hi) = self.recorded_range[u as usize];
                for i in lo..hi {
                    let (w, span) = self.recorded[i as usize];
                    let nd = d + span;
                    if nd <= horizon && nd < self.dist[w as usize] {
                        self.dist[w as usize] = nd;
                        self.buckets[nd as usize % width].push(w);
                        live_entries += 1;
                    }
                }
            }
            bucket.clear();
            self.buckets[slot] = bucket;
            d += 1;
        }
    }
}

fn sample_checked<R: Rng + ?Sized>(inst: &Instance, model: &'static str, rng: &mut R) -> Result<RRSet> {
    inst.expect_model(model)?;
    if inst.node_count() == 0 {
        return Err(invalid("cannot sample an RR set from an empty graph"));
    }
    Ok(RrSampler::new(inst).sample(rng))
}

pub fn sample_rr_ic<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<RRSet> {
    sample_checked(inst, "ic", rng)
}

pub fn sample_rr_sir<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<RRSet> {
    sample_checked(inst, "sir", rng)
}

pub fn sample_rr_tsir<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<RRSet> {
    sample_checked(inst, "tsir", rng)
}

/// RR sets stored flat, with a per-node inverted index of the sets that
/// contain each node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RRCollection {
    n: usize,
    offsets: Vec<usize>,
    members: Vec<NodeId>,
    inverted: Vec<Vec<u32>>,
    total_work: u64,
}

const CHUNK: u64 = 2048;

impl RRCollection {
    pub fn empty(n: usize) -> Self {
        RRCollection { n, offsets: vec![0], members: Vec::new(), inverted: vec![Vec::new(); n], total_work: 0 }
    }

    /// Collection over explicit sets (zero work); members are deduplicated.
    pub fn from_sets(n: usize, sets: &[Vec<NodeId>]) -> Result<Self> {
        let mut coll = Self::empty(n);
        for set in sets {
            let mut set = set.clone();
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(invalid("RR sets are never empty"));
            }
            if let Some(&v) = set.iter().find(|&&v| v as usize >= n) {
                return Err(crate::error::Error::NodeOutOfRange { node: v as u64, n });
            }
            coll.push(&set, 0);
        }
        Ok(coll)
    }

    fn push(&mut self, members: &[NodeId], work: u64) {
        let idx = self.len() as u32;
        for &v in members {
            self.inverted[v as usize].push(idx);
        }
        self.members.extend_from_slice(members);
        self.offsets.push(self.members.len());
        self.total_work += work;
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn set(&self, i: usize) -> &[NodeId] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn sets(&self) -> impl Iterator<Item = &[NodeId]> + '_ {
        (0..self.len()).map(move |i| self.set(i))
    }

    /// Indices of the sets containing `v`, increasing.
    pub fn covering(&self, v: NodeId) -> &[u32] {
        &self.inverted[v as usize]
    }

    pub fn total_work(&self) -> u64 {
        self.total_work
    }

    pub fn total_members(&self) -> usize {
        self.members.len()
    }

    /// Number of sets intersecting `seeds`.
    pub fn coverage_count(&self, seeds: &[NodeId]) -> u64 {
        let mut hit = vec![false; self.len()];
        let mut count = 0;
        for &s in seeds {
            for &i in self.covering(s) {
                if !hit[i as usize] {
                    hit[i as usize] = true;
                    count += 1;
                }
            }
        }
        count
    }

    /// Fraction of sets intersecting `seeds`; 0 for an empty collection.
    pub fn coverage_fraction(&self, seeds: &[NodeId]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.coverage_count(seeds) as f64 / self.len() as f64
    }

    /// Samples sets `len()..target` with per-index streams
    /// `(master_seed, ReverseReachable, i)`. The result does not depend on
    /// the thread pool.
    pub fn extend_to(&mut self, inst: &Instance, target: u64, master_seed: u64) -> Result<()> {
        if inst.node_count() != self.n {
            return Err(invalid("collection and instance disagree on the node count"));
        }
        if self.n == 0 {
            return Err(invalid("cannot sample RR sets from an empty graph"));
        }
        let start = self.len() as u64;
        if target <= start {
            return Ok(());
        }
        if target > u32::MAX as u64 {
            return Err(crate::error::Error::TooLarge(format!("{target} RR sets")));
        }
        let chunks: Vec<(u64, u64)> = (start..target)
            .step_by(CHUNK as usize)
            .map(|lo| (lo, (lo + CHUNK).min(target)))
            .collect();
        let batches: Vec<(Vec<u32>, Vec<NodeId>, u64)> = chunks
            .into_par_iter()
            .map_init(
                || RrSampler::new(inst),
                |sampler, (lo, hi)| {
                    let mut lens = Vec::with_capacity((hi - lo) as usize);
                    let mut members = Vec::new();
                    let mut work = 0;
                    for i in lo..hi {
                        let mut rng = stream(master_seed, Purpose::ReverseReachable, i);
                        let rr = sampler.sample(&mut rng);
                        lens.push(rr.members.len() as u32);
                        members.extend_from_slice(&rr.members);
                        work += rr.work;
                    }
                    (lens, members, work)
                },
            )
            .collect();
        for (lens, members, work) in batches {
            let mut at = 0usize;
            for len in lens {
                self.push(&members[at..at + len as usize], 0);
                at += len as usize;
            }
            self.total_work += work;
        }
        Ok(())
    }
}

/// `count` RR sets of `inst`'s model.
pub fn build_collection(inst: &Instance, count: u64, master_seed: u64) -> Result<RRCollection> {
    if count == 0 {
        return Err(invalid("count must be positive"));
    }
    let mut coll = RRCollection::empty(inst.node_count());
    coll.extend_to(inst, count, master_seed)?;
    Ok(coll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;

    fn chain3() -> DirectedGraph {
        DirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn coverage_examples() {
        let coll = RRCollection::from_sets(5, &[vec![1, 2], vec![2, 3], vec![4]]).unwrap();
        assert_eq!(coll.coverage_fraction(&[]), 0.0);
        assert!((coll.coverage_fraction(&[2]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(coll.coverage_fraction(&[2, 4]), 1.0);
        assert_eq!(coll.covering(2), &[0, 1]);
    }

    #[test]
    fn deterministic_edge_cases() {
        let mut rng = stream(0, Purpose::ReverseReachable, 0);
        let g = DirectedGraph::from_edges(2, &[(0, 1)]).unwrap();
        let inst = Instance::ic(g, vec![1.0]).unwrap();
        let mut sampler = RrSampler::new(&inst);
        assert_eq!(sampler.sample_rooted(1, &mut rng).members, vec![1, 0]);
        assert_eq!(sampler.sample_rooted(0, &mut rng).members, vec![0]);

        let tsir = Instance::tsir(chain3(), vec![1.0; 2], vec![1.0; 3], 1).unwrap();
        let mut sampler = RrSampler::new(&tsir);
        for _ in 0..10 {
            let mut m = sampler.sample_rooted(2, &mut rng).members;
            m.sort_unstable();
            assert_eq!(m, vec![1, 2]);
        }
        let tsir2 = tsir.with_model(Model::Tsir { horizon: 2 }).unwrap();
        let mut sampler = RrSampler::new(&tsir2);
        let mut m = sampler.sample_rooted(2, &mut rng).members;
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2]);
    }

    #[test]
    fn build_checks_and_determinism() {
        let inst = Instance::sir(chain3(), vec![0.5; 2], vec![0.5; 3]).unwrap();
        assert!(build_collection(&inst, 0, 1).is_err());
        let a = build_collection(&inst, 5000, 3).unwrap();
        let b = build_collection(&inst, 5000, 3).unwrap();
        assert_eq!(a, b);
        let mut c = build_collection(&inst, 1234, 3).unwrap();
        c.extend_to(&inst, 5000, 3).unwrap();
        assert_eq!(a, c);

        let single = Instance::ic(DirectedGraph::from_edges(1, &[]).unwrap(), vec![]).unwrap();
        let coll = build_collection(&single, 10, 0).unwrap();
        assert!(coll.sets().all(|s| s == [0]));
    }

    #[test]
    fn inverted_index_is_the_transpose() {
        let g = DirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let inst = Instance::sir(g, vec![0.6; 5], vec![0.4; 4]).unwrap();
        let coll = build_collection(&inst, 3000, 11).unwrap();
        let mut from_sets = vec![Vec::new(); 4];
        for (i, set) in coll.sets().enumerate() {
            for &v in set {
                from_sets[v as usize].push(i as u32);
            }
        }
        for v in 0..4 {
            assert_eq!(coll.covering(v), from_sets[v as usize].as_slice());
        }
    }
}

//! Reverse coupling of IC and SIR RR sets on shared randomness.
//!
//! The SIR side grows an in-arborescence exactly like the SIR RR sampler.
//! Every revealed edge consumes one uniform `x`; the edge is IC-live iff
//! `x < p_e` and SIR-live iff `x < Pr[e live | earlier siblings blocked]`.
//! The SIR threshold never exceeds `p_e`, so every SIR-live edge is IC-live
//! and the SIR set is contained in the IC set sample by sample.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeId, Instance, NodeId};
use crate::live::LiveEdgeGraph;
use crate::prob::live_given_blocked_product;
use crate::sim::{estimate_sigma, SigmaEstimate};
use crate::stream::{first_success_capped, stream, unit, Purpose};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoupledOutcome {
    pub root: NodeId,
    /// IC side, root first, in the order nodes were added.
    pub rr_ic: Vec<NodeId>,
    /// SIR side, root first, in the order nodes were added.
    pub rr_sir: Vec<NodeId>,
    pub edges_ic: Vec<EdgeId>,
    pub edges_sir: Vec<EdgeId>,
    /// Every edge whose uniform was drawn, in reveal order.
    pub revealed: Vec<EdgeId>,
    /// Full realizations after revealing the remaining edges, if requested.
    #[serde(skip)]
    pub completed: Option<CompletedRealizations>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletedRealizations {
    pub ic: LiveEdgeGraph,
    pub sir: LiveEdgeGraph,
}

impl CoupledOutcome {
    pub fn is_contained(&self) -> bool {
        let mut ic = self.rr_ic.clone();
        ic.sort_unstable();
        self.rr_sir.iter().all(|v| ic.binary_search(v).is_ok())
    }
}

/// Reusable buffers for coupled samples on one SIR instance.
pub struct Coupler<'a> {
    inst: &'a Instance,
    ic_prob: Vec<f64>,
    stamp: u32,
    in_sir: Vec<u32>,
    in_ic: Vec<u32>,
    queued: Vec<u32>,
    touched: Vec<u32>,
    blocked_product: Vec<f64>,
    pending: Vec<Vec<EdgeId>>,
    heap: std::collections::BinaryHeap<std::cmp::Reverse<NodeId>>,
}

impl<'a> Coupler<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        inst.expect_model("sir")?;
        let ic_prob = inst.matched_ic()?.params().edge_prob.clone();
        let n = inst.node_count();
        Ok(Coupler {
            inst,
            ic_prob,
            stamp: 0,
            in_sir: vec![0; n],
            in_ic: vec![0; n],
            queued: vec![0; n],
            touched: vec![0; n],
            blocked_product: vec![1.0; n],
            pending: vec![Vec::new(); n],
            heap: Default::default(),
        })
    }

    /// IC threshold of each edge.
    pub fn ic_thresholds(&self) -> &[f64] {
        &self.ic_prob
    }

    fn next_stamp(&mut self) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.in_sir.fill(0);
            self.in_ic.fill(0);
            self.queued.fill(0);
            self.touched.fill(0);
            self.stamp = 1;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, root: NodeId, complete: bool, rng: &mut R) -> CoupledOutcome {
        self.next_stamp();
        let s = self.stamp;
        let g = self.inst.graph();
        let mut out = CoupledOutcome {
            root,
            rr_ic: vec![root],
            rr_sir: vec![root],
            edges_ic: Vec::new(),
            edges_sir: Vec::new(),
            revealed: Vec::new(),
            completed: None,
        };
        self.in_sir[root as usize] = s;
        self.in_ic[root as usize] = s;
        self.heap.clear();

        let mut newest = root;
        loop {
            for (u, e) in g.in_adj(newest) {
                let ui = u as usize;
                if self.in_sir[ui] == s {
                    continue;
                }
                self.pending[ui].push(e);
                if self.queued[ui] != s {
                    self.queued[ui] = s;
                    self.heap.push(std::cmp::Reverse(u));
                }
            }
            let mut joined = None;
            while let Some(std::cmp::Reverse(u)) = self.heap.pop() {
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
                for &e in &pending {
                    let beta = self.inst.edge_prob(e);
                    let p_ic = self.ic_prob[e as usize];
                    // rounding guard; mathematically the conditional is <= p_ic
                    let p_sir = live_given_blocked_product(beta, gamma, q).min(p_ic);
                    let x = unit(rng);
                    out.revealed.push(e);
                    if x < p_ic {
                        out.edges_ic.push(e);
                        if self.in_ic[ui] != s {
                            self.in_ic[ui] = s;
                            out.rr_ic.push(u);
                        }
                    }
                    if x < p_sir {
                        out.edges_sir.push(e);
                        joined = Some(u);
                        break;
                    }
                    q *= 1.0 - beta;
                }
                self.blocked_product[ui] = q;
                pending.clear();
                self.pending[ui] = pending;
                if joined.is_some() {
                    break;
                }
            }
            match joined {
                Some(u) => {
                    self.in_sir[u as usize] = s;
                    out.rr_sir.push(u);
                    newest = u;
                }
                None => break,
            }
        }
        if complete {
            out.completed = Some(self.complete(&out, rng));
        }
        out
    }

    /// Reveals every edge not yet drawn. IC edges are independent. For SIR,
    /// each node's recovery round is drawn from its posterior given the
    /// revealed outcomes, then its unrevealed out-edges are drawn given it.
    fn complete<R: Rng + ?Sized>(&self, out: &CoupledOutcome, rng: &mut R) -> CompletedRealizations {
        let g = self.inst.graph();
        let m = g.edge_count();
        let mut revealed = vec![false; m];
        for &e in &out.revealed {
            revealed[e as usize] = true;
        }
        let mut sir_live = vec![false; m];
        for &e in &out.edges_sir {
            sir_live[e as usize] = true;
        }
        let mut ic_live = vec![false; m];
        for &e in &out.edges_ic {
            ic_live[e as usize] = true;
        }
        for e in 0..m {
            if !revealed[e] {
                ic_live[e] = unit(rng) < self.ic_prob[e];
            }
        }
        for u in 0..g.node_count() as NodeId {
            let ids = g.out_edge_ids(u);
            if ids.is_empty() {
                continue;
            }
            let gamma = self.inst.recovery(u);
            let mut q = 1.0;
            let mut live_edge = None;
            for &e in ids {
                if revealed[e as usize] {
                    if sir_live[e as usize] {
                        live_edge = Some(e);
                    } else {
                        q *= 1.0 - self.inst.edge_prob(e);
                    }
                }
            }
            // Posterior of R given blocked edges: geometric with success
            // probability 1 - (1-gamma) q. A live edge reweights by
            // 1 - (1-beta_e)^R, handled by rejection.
            let success = gamma + (1.0 - gamma) * (1.0 - q);
            let recovery = loop {
                let r = first_success_capped(rng, success, u32::MAX - 1);
                match live_edge {
                    None => break r,
                    Some(e) => {
                        let miss = (r as f64 * (-self.inst.edge_prob(e)).ln_1p()).exp();
                        if unit(rng) >= miss {
                            break r;
                        }
                    }
                }
            };
            for &e in ids {
                if !revealed[e as usize] {
                    sir_live[e as usize] = first_success_capped(rng, self.inst.edge_prob(e), recovery) <= recovery;
                }
            }
        }
        let collect = |flags: &[bool]| LiveEdgeGraph {
            live: (0..m as EdgeId).filter(|&e| flags[e as usize]).collect(),
            span: None,
        };
        CompletedRealizations { ic: collect(&ic_live), sir: collect(&sir_live) }
    }
}

/// One coupled sample from `root` on an SIR instance.
pub fn coupled_rr<R: Rng + ?Sized>(inst_sir: &Instance, root: NodeId, rng: &mut R) -> Result<CoupledOutcome> {
    coupled_rr_with(inst_sir, root, false, rng)
}

/// As [`coupled_rr`]; with `complete`, also reveals all remaining edges and
/// returns both full live-edge realizations.
pub fn coupled_rr_with<R: Rng + ?Sized>(
    inst_sir: &Instance,
    root: NodeId,
    complete: bool,
    rng: &mut R,
) -> Result<CoupledOutcome> {
    let mut coupler = Coupler::new(inst_sir)?;
    if root as usize >= inst_sir.node_count() {
        return Err(Error::NodeOutOfRange { node: root as u64, n: inst_sir.node_count() });
    }
    Ok(coupler.sample(root, complete, rng))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ContainmentStats {
    pub samples: u64,
    /// Samples where the SIR set is not inside the IC set.
    pub violations: u64,
    pub mean_ic_size: f64,
    pub mean_sir_size: f64,
    /// Samples where the two sets are equal.
    pub equal: u64,
}

/// `samples` coupled samples from a fixed root, sample `i` on stream
/// `(master_seed, Coupling, i)`.
pub fn containment_stats(inst_sir: &Instance, root: NodeId, samples: u64, master_seed: u64) -> Result<ContainmentStats> {
    if samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    if root as usize >= inst_sir.node_count() {
        return Err(Error::NodeOutOfRange { node: root as u64, n: inst_sir.node_count() });
    }
    Coupler::new(inst_sir)?;
    let (violations, equal, ic_total, sir_total) = (0..samples)
        .into_par_iter()
        .map_init(
            || Coupler::new(inst_sir).expect("validated above"),
            |c, i| {
                let mut rng = stream(master_seed, Purpose::Coupling, i);
                let o = c.sample(root, false, &mut rng);
                let bad = !o.is_contained() as u64;
                let eq = (o.rr_ic.len() == o.rr_sir.len() && bad == 0) as u64;
                (bad, eq, o.rr_ic.len() as u64, o.rr_sir.len() as u64)
            },
        )
        .reduce(|| (0, 0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));
    Ok(ContainmentStats {
        samples,
        violations,
        mean_ic_size: ic_total as f64 / samples as f64,
        mean_sir_size: sir_total as f64 / samples as f64,
        equal,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceRow {
    pub seeds: Vec<NodeId>,
    pub ic: SigmaEstimate,
    pub sir: SigmaEstimate,
    /// `ic.mean - sir.mean`.
    pub difference: f64,
    /// Standard error of the difference (independent runs).
    pub joint_stderr: f64,
    /// `ic.mean / sir.mean`.
    pub ratio: f64,
    /// `n` times the fraction of coupled SIR sets hit by the seeds.
    pub coupled_sir_estimate: f64,
    /// Same for the partially revealed IC sets (a lower bound on the IC
    /// spread in expectation).
    pub coupled_ic_lower: f64,
    /// Coupled samples where the seeds hit the SIR set but not the IC set.
    pub coverage_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
    pub runs: u64,
    pub coupled_samples: u64,
    /// Coupled samples whose SIR set is not inside the IC set.
    pub containment_violations: u64,
}

/// Compares the SIR instance with its matched IC instance on each seed set:
/// forward Monte-Carlo estimates under both models plus `runs` coupled RR
/// samples with uniform roots.
pub fn dominance_report(
    inst_sir: &Instance,
    seed_sets: &[Vec<NodeId>],
    runs: u64,
    master_seed: u64,
) -> Result<DominanceReport> {
    inst_sir.expect_model("sir")?;
    if runs == 0 {
        return Err(invalid("runs must be positive"));
    }
    let ic = inst_sir.matched_ic()?;
    let n = inst_sir.node_count();
    let sets = seed_sets
        .iter()
        .map(|s| inst_sir.check_seeds(s))
        .collect::<Result<Vec<_>>>()?;

    let k = sets.len();
    let zero = || (0u64, vec![0u64; k], vec![0u64; k], vec![0u64; k]);
    let (containment, hit_ic, hit_sir, bad_cov) = (0..runs)
        .into_par_iter()
        .map_init(
            || (Coupler::new(inst_sir).expect("checked model"), vec![false; n]),
            |(c, mark), i| {
                let mut rng = stream(master_seed, Purpose::Coupling, i);
                let root = rng.random_range(0..n as NodeId);
                let o = c.sample(root, false, &mut rng);
                let mut acc = zero();
                acc.0 = !o.is_contained() as u64;
                for (j, set) in sets.iter().enumerate() {
                    for &v in &o.rr_ic {
                        mark[v as usize] = true;
                    }
                    let in_ic = set.iter().any(|&s| mark[s as usize]);
                    for &v in &o.rr_ic {
                        mark[v as usize] = false;
                    }
                    for &v in &o.rr_sir {
                        mark[v as usize] = true;
                    }
                    let in_sir = set.iter().any(|&s| mark[s as usize]);
                    for &v in &o.rr_sir {
                        mark[v as usize] = false;
                    }
                    acc.1[j] = in_ic as u64;
                    acc.2[j] = in_sir as u64;
                    acc.3[j] = (in_sir && !in_ic) as u64;
                }
                acc
            },
        )
        .reduce(zero, |mut a, b| {
            a.0 += b.0;
            for j in 0..k {
                a.1[j] += b.1[j];
                a.2[j] += b.2[j];
                a.3[j] += b.3[j];
            }
            a
        });

    let mut rows = Vec::with_capacity(k);
    for (j, set) in sets.iter().enumerate() {
        let est_ic = estimate_sigma(&ic, set, runs, master_seed)?;
        let est_sir = estimate_sigma(inst_sir, set, runs, master_seed ^ 0x5151_5151)?;
        let joint = (est_ic.stderr.powi(2) + est_sir.stderr.powi(2)).sqrt();
        rows.push(DominanceRow {
            seeds: set.clone(),
            ic: est_ic,
            sir: est_sir,
            difference: est_ic.mean - est_sir.mean,
            joint_stderr: joint,
            ratio: if est_sir.mean > 0.0 { est_ic.mean / est_sir.mean } else { f64::NAN },
            coupled_sir_estimate: n as f64 * hit_sir[j] as f64 / runs as f64,
            coupled_ic_lower: n as f64 * hit_ic[j] as f64 / runs as f64,
            coverage_violations: bad_cov[j],
        });
    }
    Ok(DominanceReport { rows, runs, coupled_samples: runs, containment_violations: containment })
}

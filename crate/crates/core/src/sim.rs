//! Forward cascade simulation and Monte-Carlo spread estimation.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::graph::{Instance, Model, NodeId};
use crate::stream::{stream, unit, Purpose};

/// Nodes influenced by one cascade, in increasing id order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CascadeOutcome {
    pub influenced: Vec<NodeId>,
}

impl CascadeOutcome {
    pub fn len(&self) -> usize {
        self.influenced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.influenced.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(runs)`; 0 for a single run.
    pub stderr: f64,
    pub runs: u64,
}

impl SigmaEstimate {
    /// Builds an estimate from exact integer sums of the per-run counts.
    pub fn from_sums(sum: u64, sum_sq: u128, runs: u64) -> Self {
        let n = runs as f64;
        let mean = sum as f64 / n;
        let stderr = if runs > 1 {
            // centered second moment from exact integers
            let centered = sum_sq as f64 - (sum as f64) * mean;
            (centered.max(0.0) / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        SigmaEstimate { mean, stderr, runs }
    }
}

const SUSCEPTIBLE: u8 = 0;
const INFECTED: u8 = 1;
const RECOVERED: u8 = 2;

/// Reusable buffers for repeated cascades on one instance.
pub struct Simulator<'a> {
    inst: &'a Instance,
    state: Vec<u8>,
    touched: Vec<NodeId>,
    current: Vec<NodeId>,
    next: Vec<NodeId>,
}

impl<'a> Simulator<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        Simulator {
            inst,
            state: vec![SUSCEPTIBLE; inst.node_count()],
            touched: Vec::new(),
            current: Vec::new(),
            next: Vec::new(),
        }
    }

    /// Runs one cascade from `seeds` (already validated and deduplicated)
    /// and returns the number of influenced nodes.
    pub fn run<R: Rng + ?Sized>(&mut self, seeds: &[NodeId], rng: &mut R) -> usize {
        for &v in &self.touched {
            self.state[v as usize] = SUSCEPTIBLE;
        }
        self.touched.clear();
        self.current.clear();
        for &s in seeds {
            if self.state[s as usize] == SUSCEPTIBLE {
                self.state[s as usize] = INFECTED;
                self.touched.push(s);
                self.current.push(s);
            }
        }
        match self.inst.model() {
            Model::Ic => self.spread_ic(rng),
            Model::Sir => self.spread_sir(None, rng),
            Model::Tsir { horizon } => self.spread_sir(Some(horizon), rng),
        }
        self.touched.len()
    }

    /// Whether `v` was influenced in the last run.
    pub fn was_influenced(&self, v: NodeId) -> bool {
        self.state[v as usize] != SUSCEPTIBLE
    }

    /// Influenced nodes of the last run, sorted.
    pub fn influenced(&self) -> Vec<NodeId> {
        let mut out = self.touched.clone();
        out.sort_unstable();
        out
    }

    fn spread_ic<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let g = self.inst.graph();
        while !self.current.is_empty() {
            self.next.clear();
            for &u in &self.current {
                for (v, e) in g.out_adj(u) {
                    if self.state[v as usize] == SUSCEPTIBLE && unit(rng) < self.inst.edge_prob(e) {
                        self.state[v as usize] = INFECTED;
                        self.touched.push(v);
                        self.next.push(v);
                    }
                }
            }
            std::mem::swap(&mut self.current, &mut self.next);
        }
    }

    /// SIR rounds; with a horizon, stops after that many rounds.
    fn spread_sir<R: Rng + ?Sized>(&mut self, horizon: Option<u32>, rng: &mut R) {
        let g = self.inst.graph();
        let mut round = 0u32;
        while !self.current.is_empty() {
            if horizon.is_some_and(|t| round >= t) {
                break;
            }
            round += 1;
            self.next.clear();
            for &u in &self.current {
                for (v, e) in g.out_adj(u) {
                    if self.state[v as usize] == SUSCEPTIBLE && unit(rng) < self.inst.edge_prob(e) {
                        self.state[v as usize] = INFECTED;
                        self.touched.push(v);
                        self.next.push(v);
                    }
                }
                if unit(rng) < self.inst.recovery(u) {
                    self.state[u as usize] = RECOVERED;
                } else {
                    self.next.push(u);
                }
            }
            std::mem::swap(&mut self.current, &mut self.next);
        }
    }
}

fn run_checked<R: Rng + ?Sized>(
    inst: &Instance,
    model: &'static str,
    seeds: &[NodeId],
    rng: &mut R,
) -> Result<CascadeOutcome> {
    inst.expect_model(model)?;
    let seeds = inst.check_seeds(seeds)?;
    let mut sim = Simulator::new(inst);
    sim.run(&seeds, rng);
    Ok(CascadeOutcome { influenced: sim.influenced() })
}

pub fn run_ic<R: Rng + ?Sized>(inst: &Instance, seeds: &[NodeId], rng: &mut R) -> Result<CascadeOutcome> {
    run_checked(inst, "ic", seeds, rng)
}

/// Returns the recovered set at termination.
pub fn run_sir<R: Rng + ?Sized>(inst: &Instance, seeds: &[NodeId], rng: &mut R) -> Result<CascadeOutcome> {
    run_checked(inst, "sir", seeds, rng)
}

/// Returns every node infected by the end of round `T`, seeds included.
pub fn run_tsir<R: Rng + ?Sized>(inst: &Instance, seeds: &[NodeId], rng: &mut R) -> Result<CascadeOutcome> {
    run_checked(inst, "tsir", seeds, rng)
}

/// Any model.
pub fn run_cascade<R: Rng + ?Sized>(inst: &Instance, seeds: &[NodeId], rng: &mut R) -> Result<CascadeOutcome> {
    run_checked(inst, inst.model().name(), seeds, rng)
}

/// Mean influenced count over `runs` cascades. Run `i` uses stream
/// `(master_seed, Cascade, i)`, so the result does not depend on the thread
/// pool.
pub fn estimate_sigma(inst: &Instance, seeds: &[NodeId], runs: u64, master_seed: u64) -> Result<SigmaEstimate> {
    if runs == 0 {
        return Err(invalid("runs must be positive"));
    }
    let seeds = inst.check_seeds(seeds)?;
    let (sum, sum_sq) = (0..runs)
        .into_par_iter()
        .map_init(
            || Simulator::new(inst),
            |sim, i| {
                let mut rng = stream(master_seed, Purpose::Cascade, i);
                let c = sim.run(&seeds, &mut rng) as u64;
                (c, (c as u128) * (c as u128))
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(SigmaEstimate::from_sums(sum, sum_sq, runs))
}

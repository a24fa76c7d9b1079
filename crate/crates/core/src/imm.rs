//! IMM seed selection: greedy max-coverage over RR collections whose size
//! follows the two-phase martingale stopping rule.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exact::exact_sigma;
use crate::graph::{Instance, NodeId};
use crate::rr::RRCollection;

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Constants driving the sample counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImmParams {
    pub n: u64,
    pub k: u64,
    pub eps: f64,
    pub ell: f64,
    pub alpha: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub ell_prime: f64,
    pub eps_prime: f64,
    pub lambda_prime: f64,
    pub lambda_star: f64,
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k == 0 || k >= n {
        return 0.0;
    }
    let lg = |x: f64| libm::lgamma(x);
    lg(n as f64 + 1.0) - lg(k as f64 + 1.0) - lg((n - k) as f64 + 1.0)
}

pub fn imm_params(n: u64, k: u64, eps: f64, ell: f64) -> Result<ImmParams> {
    if n < 2 {
        return Err(invalid(format!("n = {n}, need at least 2 nodes")));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} outside 1..={n}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon = {eps} outside (0, 1)")));
    }
    if ell.is_nan() || ell < 1.0 {
        return Err(invalid(format!("ell = {ell} must be at least 1")));
    }
    let ln_n = (n as f64).ln();
    let ln2 = std::f64::consts::LN_2;
    let lnc = ln_binomial(n, k);
    let alpha = (ell * ln_n + ln2).sqrt();
    let beta_hat = (ONE_MINUS_INV_E * (lnc + ell * ln_n + ln2)).sqrt();
    let gamma_hat = 4.0 + (8.0 * ln_n).ln() / ln_n;
    let ell_prime = ell + ln2 / ln_n + gamma_hat;
    let eps_prime = std::f64::consts::SQRT_2 * eps;
    let lambda_prime = (2.0 + 2.0 * eps_prime / 3.0) * (lnc + ell_prime * ln_n + (n as f64).log2().ln()) * n as f64
        / (eps_prime * eps_prime);
    let lambda_star = 2.0 * n as f64 * (ONE_MINUS_INV_E * alpha + beta_hat).powi(2) / (eps * eps);
    Ok(ImmParams {
        n,
        k,
        eps,
        ell,
        alpha,
        beta_hat,
        gamma_hat,
        ell_prime,
        eps_prime,
        lambda_prime,
        lambda_star,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub seeds: Vec<NodeId>,
    /// Fraction of sets covered by `seeds`.
    pub coverage: f64,
    /// Newly covered sets per pick, in pick order.
    pub marginal_gains: Vec<u64>,
}

/// Greedy max-coverage with lazy re-evaluation. Ties go to the smallest
/// node id. Stops early once every set is covered.
pub fn node_selection(coll: &RRCollection, k: usize) -> Selection {
    let n = coll.node_count();
    let mut covered = vec![false; coll.len()];
    let mut picked = vec![false; n];
    // (upper bound on gain, node, round the bound was computed in)
    let mut heap: BinaryHeap<(u64, Reverse<NodeId>, usize)> =
        (0..n as NodeId).map(|v| (coll.covering(v).len() as u64, Reverse(v), 0)).collect();
    let mut seeds = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut total = 0u64;
    while seeds.len() < k && (coll.is_empty() || (total as usize) < coll.len()) {
        let Some((gain, Reverse(v), round)) = heap.pop() else { break };
        if picked[v as usize] {
            continue;
        }
        if round != seeds.len() {
            let fresh = coll.covering(v).iter().filter(|&&i| !covered[i as usize]).count() as u64;
            heap.push((fresh, Reverse(v), seeds.len()));
            continue;
        }
        picked[v as usize] = true;
        for &i in coll.covering(v) {
            covered[i as usize] = true;
        }
        debug_assert!(gains.last().is_none_or(|&g| g >= gain));
        seeds.push(v);
        gains.push(gain);
        total += gain;
    }
    Selection { seeds, coverage: fraction(total, coll.len()), marginal_gains: gains }
}

/// The literal greedy: each pick rescans every node for the largest gain.
pub fn node_selection_exhaustive(coll: &RRCollection, k: usize) -> Selection {
    let n = coll.node_count();
    let mut covered = vec![false; coll.len()];
    let mut picked = vec![false; n];
    let mut seeds = Vec::new();
    let mut gains = Vec::new();
    let mut total = 0u64;
    while seeds.len() < k && (coll.is_empty() || (total as usize) < coll.len()) {
        let mut best: Option<(u64, NodeId)> = None;
        for v in 0..n as NodeId {
            if picked[v as usize] {
                continue;
            }
            let g = coll.covering(v).iter().filter(|&&i| !covered[i as usize]).count() as u64;
            if best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, v));
            }
        }
        let Some((g, v)) = best else { break };
        picked[v as usize] = true;
        for &i in coll.covering(v) {
            covered[i as usize] = true;
        }
        seeds.push(v);
        gains.push(g);
        total += g;
    }
    Selection { seeds, coverage: fraction(total, coll.len()), marginal_gains: gains }
}

fn fraction(count: u64, len: usize) -> f64 {
    if len == 0 {
        0.0
    } else {
        count as f64 / len as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedSelectionResult {
    pub seeds: Vec<NodeId>,
    pub coverage: f64,
    /// `n * coverage`.
    pub spread_estimate: f64,
    pub samples_used: u64,
    /// Lower bound on OPT from the first phase (1 if no round passed).
    pub lb: f64,
    /// Collection size at the end of the first phase.
    pub phase1_samples: u64,
    /// Sample target of the second phase.
    pub theta: f64,
    pub total_work: u64,
    pub params: ImmParams,
}

/// Number of samples `while |R| <= theta` leaves in the collection.
fn samples_for(theta: f64) -> u64 {
    theta.max(0.0).floor() as u64 + 1
}

/// IMM on `inst`'s model with RR sets drawn from `master_seed`.
pub fn imm(inst: &Instance, k: usize, eps: f64, ell: f64, master_seed: u64) -> Result<SeedSelectionResult> {
    let n = inst.node_count() as u64;
    if k as u64 > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    let params = imm_params(n, k as u64, eps, ell)?;
    let nf = n as f64;
    let mut coll = RRCollection::empty(inst.node_count());
    let mut lb = 1.0;
    let rounds = (nf.log2().ceil() as u64).saturating_sub(1);
    for i in 1..=rounds {
        let x = nf / 2f64.powi(i as i32);
        let theta_i = params.lambda_prime / x;
        coll.extend_to(inst, samples_for(theta_i), master_seed)?;
        let sel = node_selection(&coll, k);
        if nf * sel.coverage >= (1.0 + params.eps_prime) * x {
            lb = nf * sel.coverage / (1.0 + params.eps_prime);
            break;
        }
    }
    let phase1_samples = coll.len() as u64;
    let theta = params.lambda_star / lb;
    coll.extend_to(inst, samples_for(theta), master_seed)?;
    let sel = node_selection(&coll, k);
    Ok(SeedSelectionResult {
        spread_estimate: nf * sel.coverage,
        coverage: sel.coverage,
        seeds: sel.seeds,
        samples_used: coll.len() as u64,
        lb,
        phase1_samples,
        theta,
        total_work: coll.total_work(),
        params,
    })
}

/// Exhaustive maximum of `exact_sigma` over all `k`-subsets, first maximum
/// in lexicographic order.
pub fn brute_force_opt(inst: &Instance, k: usize) -> Result<(Vec<NodeId>, f64)> {
    let n = inst.node_count();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} outside 1..={n}")));
    }
    let subsets = ln_binomial(n as u64, k as u64).exp();
    if subsets > 1e4 + 0.5 {
        return Err(Error::TooLarge(format!("C({n}, {k}) = {subsets:.0} subsets exceed 10^4")));
    }
    let mut combo: Vec<NodeId> = (0..k as NodeId).collect();
    let mut best: Option<(Vec<NodeId>, f64)> = None;
    loop {
        let value = exact_sigma(inst, &combo)?;
        // tolerance keeps ties among symmetric sets lexicographic
        if best.as_ref().is_none_or(|(_, b)| value > b + 1e-12 * b.abs().max(1.0)) {
            best = Some((combo.clone(), value));
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(best.expect("at least one subset"));
            }
            i -= 1;
            if (combo[i] as usize) < n - k + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

//! Closed-form probabilities relating SIR to IC.
//!
//! A SIR node `u` with recovery probability `gamma` attempts each out-edge `e`
//! once per round until it recovers. Write `R` for its recovery round and
//! `F_e` for the first round an attempt along `e` succeeds; `e` is live iff
//! `F_e <= R`. Everything below is a geometric series over `R`, summed in
//! closed form. The truncated series in [`joint_outedge_distribution`] is the
//! brute-force reference for all of them.

use crate::error::{invalid, Error, Result};

/// Largest out-degree accepted by [`joint_outedge_distribution`].
pub const MAX_JOINT_DEGREE: usize = 12;

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} outside (0, 1]")))
    }
}

/// Probability that an infected SIR node infects a given out-neighbor before
/// recovering: `1 - gamma (1 - beta) / (gamma + beta - gamma beta)`.
pub fn aggregate_edge_prob(beta: f64, gamma: f64) -> Result<f64> {
    check_open_unit("beta", beta)?;
    check_open_unit("gamma", gamma)?;
    Ok(live_given_blocked_product(beta, gamma, 1.0))
}

/// `Pr[e live | every edge in blocked_betas blocked]` for edges sharing the
/// source node.
pub fn conditional_live_prob(beta_e: f64, gamma: f64, blocked_betas: &[f64]) -> Result<f64> {
    check_open_unit("beta_e", beta_e)?;
    check_open_unit("gamma", gamma)?;
    let mut q = 1.0;
    for &b in blocked_betas {
        check_open_unit("blocked beta", b)?;
        q *= 1.0 - b;
    }
    Ok(live_given_blocked_product(beta_e, gamma, q))
}

/// Unchecked kernel of [`conditional_live_prob`]; `q` is the product of
/// `1 - beta_f` over the blocked siblings (1 when there are none).
///
/// `1 - r (1 - (1-gamma) q) / (1 - (1-gamma) q r)` with `r = 1 - beta`,
/// evaluated as `1 - (1-gamma) x = gamma + (1-gamma)(1-x)` so that nothing
/// cancels when `q` is close to 1.
#[inline]
pub fn live_given_blocked_product(beta: f64, gamma: f64, q: f64) -> f64 {
    let r = 1.0 - beta;
    let stay = 1.0 - gamma;
    let blocked = gamma + stay * (1.0 - q);
    let blocked_too = gamma + stay * (1.0 - q * r);
    1.0 - r * blocked / blocked_too
}

/// Probability that none of `b` out-edges (all with the same `beta`) of a
/// SIR node fires: `gamma (1-beta)^b / (1 - (1-gamma)(1-beta)^b)`.
fn all_blocked_homogeneous(b: u64, beta: f64, gamma: f64) -> f64 {
    let rb = (b as f64 * (-beta).ln_1p()).exp();
    gamma * rb / (gamma + (1.0 - gamma) * (1.0 - rb))
}

/// Infection probability of the hub `u` in the two-layer gadget, where the
/// seed reaches `b` middle nodes through edges with `(beta, gamma)` and every
/// middle node feeds `u` deterministically.
///
/// Returns `(p1, p2)`: `p1` under the matched IC model
/// (`1 - (1-p)^b`), `p2` under SIR.
pub fn gadget_probs(b: u64, beta: f64, gamma: f64) -> Result<(f64, f64)> {
    if b == 0 {
        return Err(invalid("gadget width b must be positive"));
    }
    let p = aggregate_edge_prob(beta, gamma)?;
    let p1 = -((b as f64) * (-p).ln_1p()).exp_m1();
    let p2 = 1.0 - all_blocked_homogeneous(b, beta, gamma);
    Ok((p1, p2))
}

/// Distribution over the live/blocked patterns of one node's out-edges.
///
/// `probs[mask]` is the probability that exactly the edges whose bit is set in
/// `mask` are live (bit `i` = `i`-th edge).
#[derive(Clone, Debug)]
pub struct OutEdgeJointDist {
    pub probs: Vec<f64>,
    /// Upper bound on the probability mass dropped by truncating the series.
    pub truncation_error: f64,
}

impl OutEdgeJointDist {
    pub fn degree(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }

    /// Probability that edge `i` is live.
    pub fn marginal(&self, i: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> i & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Joint out-edge distribution by direct summation over the recovery round:
/// `Pr[A live] = sum_t gamma (1-gamma)^(t-1) prod_{A} (1-(1-b)^t) prod_{not A} (1-b)^t`.
///
/// The sum stops once the remaining mass `(1-gamma)^t` drops below `tol`.
pub fn joint_outedge_distribution(betas: &[f64], gamma: f64, tol: f64) -> Result<OutEdgeJointDist> {
    let d = betas.len();
    if d == 0 || d > MAX_JOINT_DEGREE {
        return Err(Error::TooLarge(format!(
            "joint distribution needs 1..={MAX_JOINT_DEGREE} edges, got {d}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    check_open_unit("gamma", gamma)?;
    for &b in betas {
        check_open_unit("beta", b)?;
    }

    let mut probs = vec![0.0; 1 << d];
    // blocked[i] = (1 - beta_i)^t for the current round t
    let mut blocked: Vec<f64> = vec![1.0; d];
    let mut term = vec![0.0; 1 << d];
    let mut weight = gamma; // gamma (1-gamma)^(t-1)
    let mut tail = 1.0; // (1-gamma)^(t-1): mass of R >= t
    loop {
        for (bl, &b) in blocked.iter_mut().zip(betas) {
            *bl *= 1.0 - b;
        }
        // product over edges, built up one edge at a time
        term[0] = weight;
        for (i, &bl) in blocked.iter().enumerate() {
            let half = 1 << i;
            for mask in (0..half).rev() {
                let t = term[mask];
                term[mask | half] = t * (1.0 - bl);
                term[mask] = t * bl;
            }
        }
        for (p, t) in probs.iter_mut().zip(&term) {
            *p += t;
        }
        tail *= 1.0 - gamma;
        if tail < tol {
            break;
        }
        weight *= 1.0 - gamma;
    }
    Ok(OutEdgeJointDist { probs, truncation_error: tail })
}

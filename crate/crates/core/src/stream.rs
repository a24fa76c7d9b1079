//! Deterministic random streams.
//!
//! Every parallel unit of work (one cascade, one RR set, one coupled sample)
//! draws from its own ChaCha8 stream keyed by `(master_seed, purpose, index)`,
//! so results never depend on how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Distinguishes the consumers of one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Cascade = 1,
    ReverseReachable = 2,
    Coupling = 3,
    LiveEdge = 4,
    Generator = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream number `index` for `purpose` under `master_seed`.
pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(purpose as u64)));
    rng.set_stream(index);
    rng
}

/// Uniform draw in `[0, 1)`; `unit(rng) < p` fires with probability `p`.
#[inline]
pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Index of the first success in a sequence of Bernoulli(`p`) trials,
/// clamped to `cap + 1` ("later than `cap`"). Inverse-transform sampling,
/// one uniform per call.
#[inline]
pub fn first_success_capped<R: Rng + ?Sized>(rng: &mut R, p: f64, cap: u32) -> u32 {
    if p >= 1.0 {
        return 1;
    }
    if p <= 0.0 {
        return cap.saturating_add(1);
    }
    // (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let k = (u.ln() / (-p).ln_1p()).floor();
    if k >= cap as f64 {
        cap.saturating_add(1)
    } else {
        1 + k as u32
    }
}

/// Same as [`first_success_capped`] but by flipping one coin per trial.
pub fn first_success_by_trials<R: Rng + ?Sized>(rng: &mut R, p: f64, cap: u32) -> u32 {
    let mut t = 1u32;
    while t <= cap {
        if unit(rng) < p {
            return t;
        }
        t += 1;
    }
    cap.saturating_add(1)
}

//! The reflected walk `W` on the non-negative integers: from `j >= 1` it
//! steps down, stays or steps up with probabilities 1/4, 5/8, 1/8; from 0 it
//! stays with probability 3/4 and otherwise steps up.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::greedy::WTrace;
use crate::error::{param, Result};
use crate::par::{map_indices, Exec};
use crate::rng::RngSeed;

/// Exact one-step transition probability `P(i -> j)`.
pub fn transition_probability(i: u32, j: u32) -> f64 {
    match (i, j as i64 - i as i64) {
        (0, 0) => 0.75,
        (0, 1) => 0.25,
        (_, -1) if i > 0 => 0.25,
        (_, 0) => 0.625,
        (_, 1) => 0.125,
        _ => 0.0,
    }
}

/// One transition driven by three fair bits (`bits < 8`).
#[inline]
fn next_state(w: u32, bits: u32) -> u32 {
    if w == 0 {
        u32::from(bits >= 6)
    } else {
        match bits {
            0 | 1 => w - 1,
            7 => w + 1,
            _ => w,
        }
    }
}

/// Run the walk from `w0` for `n` transitions; the trace holds `n + 1` values.
pub fn wchain_simulate(n: usize, w0: u32, seed: RngSeed) -> WTrace {
    let mut rng = seed.rng();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = w0;
    values.push(w);
    let mut word = 0u64;
    let mut left = 0;
    for _ in 0..n {
        if left == 0 {
            word = rng.next_u64();
            left = 21;
        }
        w = next_state(w, (word & 7) as u32);
        word >>= 3;
        left -= 1;
        values.push(w);
    }
    WTrace {
        values,
        target: None,
        crossings: Vec::new(),
    }
}

fn final_value(n: usize, w0: u32, rng: &mut impl RngCore) -> u32 {
    let mut w = w0;
    let mut left = n;
    while left > 0 {
        let mut word = rng.next_u64();
        for _ in 0..left.min(21) {
            w = next_state(w, (word & 7) as u32);
            word >>= 3;
        }
        left -= left.min(21);
    }
    w
}

/// The stationary law: `pi_0 = pi_1 = 1/3` and `pi_{j+1} = pi_j / 2` for
/// `j >= 1` (detailed balance `pi_j / 8 = pi_{j+1} / 4`, with
/// `pi_0 / 4 = pi_1 / 4` at the boundary).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stationary;

impl Stationary {
    pub fn probability(&self, j: u32) -> f64 {
        if j == 0 {
            1.0 / 3.0
        } else {
            (2.0 / 3.0) * 0.5f64.powi(j as i32)
        }
    }

    /// `P(W > k)`.
    pub fn tail(&self, k: u32) -> f64 {
        (2.0 / 3.0) * 0.5f64.powi(k as i32)
    }
}

pub fn wchain_stationary() -> Stationary {
    Stationary
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub r: u32,
    pub k: u32,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub stderr: f64,
}

fn split_trials(trials: u64) -> Vec<u64> {
    const CHUNK: u64 = 1 << 14;
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .map(|c| CHUNK.min(trials - c * CHUNK))
        .collect()
}

/// Counts of `W_n` over independent runs from `w0`; index `j` holds the number
/// of runs ending at `j`.
pub fn wchain_final_histogram(n: usize, w0: u32, trials: u64, seed: RngSeed, exec: Exec) -> Vec<u64> {
    let sizes = split_trials(trials);
    let parts = map_indices(exec, sizes.len(), |c| {
        let mut rng = seed.derive(c as u64).rng();
        let mut counts = Vec::new();
        for _ in 0..sizes[c] {
            let w = final_value(n, w0, &mut rng) as usize;
            if counts.len() <= w {
                counts.resize(w + 1, 0u64);
            }
            counts[w] += 1;
        }
        counts
    });
    let mut total = Vec::new();
    for part in parts {
        if total.len() < part.len() {
            total.resize(part.len(), 0);
        }
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    total
}

/// Monte Carlo estimate of `P(W_n > k | W_0 = r)`. Requires `n > 9r`. Since
/// the walk moves by at most one per step the answer is exactly 0 when
/// `k >= r + n`, in particular whenever `k > 2n`.
pub fn tail_estimate(n: usize, r: u32, k: u32, trials: u64, seed: RngSeed, exec: Exec) -> Result<TailEstimate> {
    if n <= 9 * r as usize {
        return Err(param("n", format!("need n > 9r, got n={n}, r={r}")));
    }
    if trials == 0 {
        return Err(param("trials", "must be positive"));
    }
    let hits = if k as u64 >= r as u64 + n as u64 {
        0
    } else {
        let hist = wchain_final_histogram(n, r, trials, seed, exec);
        hist.iter().skip(k as usize + 1).sum()
    };
    Ok(estimate_from_counts(n, r, k, trials, hits))
}

pub(crate) fn estimate_from_counts(n: usize, r: u32, k: u32, trials: u64, hits: u64) -> TailEstimate {
    let p = hits as f64 / trials as f64;
    TailEstimate {
        n,
        r,
        k,
        trials,
        hits,
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
    }
}

/// Tail estimates for several `k` from one shared batch of runs.
pub fn tail_curve(n: usize, r: u32, ks: &[u32], trials: u64, seed: RngSeed, exec: Exec) -> Result<Vec<TailEstimate>> {
    if n <= 9 * r as usize {
        return Err(param("n", format!("need n > 9r, got n={n}, r={r}")));
    }
    if trials == 0 {
        return Err(param("trials", "must be positive"));
    }
    let hist = wchain_final_histogram(n, r, trials, seed, exec);
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = hist.iter().skip(k as usize + 1).sum();
            estimate_from_counts(n, r, k, trials, hits)
        })
        .collect())
}

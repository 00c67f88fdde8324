//! Seeded, portable randomness.
//!
//! Everything stochastic in this crate draws from ChaCha20 streams so that
//! results are bit-reproducible across runs and platforms. A simulation
//! seed is split into independent sub-streams by ChaCha's 64-bit stream
//! number:
//!
//! * stream 0 — initial opinions `x0`
//! * stream 1 — initial graph sampling (BCM-G)
//! * stream `2 + t` — all event draws of time step `t`
//!
//! Derived seeds (per grid cell, per ABC simulation, per chain) come from
//! [`stable_hash`], a fixed FNV-1a/SplitMix64 combination that is part of
//! the file-format contract and must not change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream number for initial-opinion sampling.
pub const STREAM_X0: u64 = 0;
/// Stream number for initial-graph sampling.
pub const STREAM_GRAPH: u64 = 1;
/// First per-step stream; step `t` uses stream `STREAM_STEP_BASE + t`.
pub const STREAM_STEP_BASE: u64 = 2;

/// A fresh ChaCha20 generator on `stream` of the generator family keyed by
/// `seed`. Each call starts at position zero of that stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic 64-bit hash of a list of integers, used to derive
/// sub-seeds (grid cells, ABC simulations, replicates).
///
/// FNV-1a over little-endian bytes followed by a SplitMix64 finalizer.
pub fn stable_hash(parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    // SplitMix64 finalizer for avalanche.
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Standard normal draw via Box–Muller; depends only on the generator's
/// uniform stream, so it stays stable across `rand` API evolution.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard Gumbel draw: `-ln(-ln(u))`.
pub fn standard_gumbel<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    -(-u.ln()).ln()
}

/// Fill `out` with i.i.d. standard normal draws.
pub fn fill_standard_normal<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = standard_normal(rng);
    }
}

/// Fill `out` with i.i.d. standard Gumbel draws.
pub fn fill_standard_gumbel<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = standard_gumbel(rng);
    }
}

/// Draws `k` distinct indices from `0..n` in draw order, reusing its
/// buffers across calls.
///
/// Partial Fisher–Yates over an internal permutation of `0..n`; each call
/// records its swaps and undoes them afterwards, so a call costs O(k)
/// regardless of `n`.
pub struct DistinctSampler {
    scratch: Vec<u32>,
    swaps: Vec<(u32, u32)>,
}

impl DistinctSampler {
    pub fn new(n: usize) -> Self {
        Self {
            scratch: (0..n as u32).collect(),
            swaps: Vec::new(),
        }
    }

    /// Sample `k` distinct values from `0..n` into `out` (cleared first).
    /// Panics if `k > n`.
    pub fn sample<R: Rng>(&mut self, rng: &mut R, k: usize, out: &mut Vec<u32>) {
        let n = self.scratch.len();
        assert!(k <= n, "cannot sample {k} distinct values from {n}");
        out.clear();
        self.swaps.clear();
        for i in 0..k {
            let j = rng.random_range(i..n);
            self.scratch.swap(i, j);
            self.swaps.push((i as u32, j as u32));
            out.push(self.scratch[i]);
        }
        for &(i, j) in self.swaps.iter().rev() {
            self.scratch.swap(i as usize, j as usize);
        }
    }
}

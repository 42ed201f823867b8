//! Seeded, platform-independent randomness.
//!
//! Every random decision in the crate is drawn from a [`ChaCha8Rng`] seeded
//! through [`rng_from_seed`]. Permutations use [`shuffle`], a Fisher–Yates
//! pass whose bounded draws are computed with a 64×64→128-bit multiply-shift,
//! so results depend only on the ChaCha8 output stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform index in `0..bound` from one 64-bit draw.
#[inline]
pub fn bounded(rng: &mut impl RngCore, bound: usize) -> usize {
    debug_assert!(bound > 0);
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

/// Uniform real in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// In-place Fisher–Yates shuffle: for `i` from `len-1` down to 1, swap
/// position `i` with `bounded(rng, i + 1)`.
pub fn shuffle<X>(items: &mut [X], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = bounded(rng, i + 1);
        items.swap(i, j);
    }
}

/// The permutation of `0..n` produced by [`shuffle`].
pub fn permutation(n: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, rng);
    order
}

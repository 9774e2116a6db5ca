//! Counter-based standard normal draws.
//!
//! Draw i of path p under master seed s is a pure function of (s, p, i):
//! the ChaCha8 key holds (s, level), the stream id is p, and draw i sits at
//! word position 4i. Box–Muller consumes two 64-bit words per draw and keeps
//! the cosine branch only, so no state is carried between draws.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_DRAW: u128 = 4;

fn generator(master: u64, level: u64, path: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&level.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}

/// Uniform on the open interval (0, 1).
fn open_unit(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(w1: u64, w2: u64) -> f64 {
    let (u1, u2) = (open_unit(w1), open_unit(w2));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Sequential standard normals for one (master, level, path) key.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(master: u64, path: u64) -> Self {
        Self::keyed(master, 0, path)
    }

    /// `level` separates independent families of draws under one master
    /// seed, e.g. successive bridge refinements.
    pub fn keyed(master: u64, level: u64, path: u64) -> Self {
        NormalStream { rng: generator(master, level, path) }
    }

    /// Jump to draw index i.
    pub fn seek(&mut self, i: u64) {
        self.rng.set_word_pos(WORDS_PER_DRAW * i as u128);
    }
}

impl Iterator for NormalStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let w1 = self.rng.next_u64();
        let w2 = self.rng.next_u64();
        Some(box_muller(w1, w2))
    }
}

/// Draw i of the given key, without iterating.
pub fn normal_at(master: u64, level: u64, path: u64, i: u64) -> f64 {
    let mut s = NormalStream::keyed(master, level, path);
    s.seek(i);
    s.next().unwrap_or_default()
}

/// A master seed for an independent sub-experiment.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

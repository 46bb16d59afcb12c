//! Seeded, labeled random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, stream_id)`. ChaCha
//! is counter-based and its output is fixed by the algorithm, so a given
//! `(seed, stream_id)` produces the same sequence on every platform. Floats
//! and bounded integers are derived from raw `u64` words here rather than
//! through `rand`'s distribution helpers, whose integer sampling depends on
//! the target's pointer width.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream named by `label` ("cnn-init", "sca", ...). Depends only
    /// on this stream's `(seed, stream_id)`, never on how far it has been
    /// consumed.
    pub fn child(&self, label: &str) -> RngStream {
        RngStream::new(derive(self.seed, self.stream_id, fnv1a(label.as_bytes())), 0)
    }

    /// Child stream keyed by an integer, e.g. an agent or run index.
    pub fn child_indexed(&self, index: u64) -> RngStream {
        RngStream::new(
            derive(self.seed, self.stream_id, index ^ 0xA5A5_5A5A_C3C3_3C3C),
            0,
        )
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when `lo == hi`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.next_f64();
        if v >= hi && hi > lo {
            // rounding can land exactly on `hi`
            hi.next_down()
        } else {
            v
        }
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift; `n > 0`).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `rows x cols` matrix with entries uniform in `[lo, hi)`.
    pub fn matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.uniform_in(lo, hi))
    }
}

/// `count` values uniform in `[lo, hi)`.
pub fn uniform(stream: &mut RngStream, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::Domain(format!("uniform bounds lo={lo} > hi={hi}")));
    }
    Ok((0..count).map(|_| stream.uniform_in(lo, hi)).collect())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive(seed: u64, stream_id: u64, key: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream_id)) ^ key)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

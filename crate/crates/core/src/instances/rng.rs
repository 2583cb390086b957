//! Reproducible random streams for instance generation.
//!
//! Each instance owns a ChaCha20 stream keyed by
//! `SHA-256("stiefel-relax/instance/v1" ‖ class ‖ n ‖ p ‖ seed)`. Normals come
//! from the Box–Muller transform evaluated with the pure-Rust `libm`
//! routines, so the same key yields the same bits on every platform.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

pub const ALGORITHM: &str = "chacha20+box-muller";

const DOMAIN: &[u8] = b"stiefel-relax/instance/v1";

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha20Rng,
    spare_normal: Option<f64>,
    draws: u64,
}

impl RngStream {
    /// Stream for one instance of `class` at size (n, p).
    pub fn for_instance(class_tag: &str, n: usize, p: usize, seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update((class_tag.len() as u64).to_le_bytes());
        h.update(class_tag.as_bytes());
        h.update((n as u64).to_le_bytes());
        h.update((p as u64).to_le_bytes());
        h.update(seed.to_le_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self {
            seed,
            rng: ChaCha20Rng::from_seed(key),
            spare_normal: None,
            draws: 0,
        }
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words consumed so far.
    pub fn position(&self) -> u64 {
        self.draws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// Uniform on (0, 1].
    fn open_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [0, 1).
    fn half_open_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller; the second variate of each pair is
    /// cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.open_unit();
        let u2 = self.half_open_unit();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    /// Uniform integer on `lo..=hi` by rejection, free of modulo bias.
    pub fn uniform_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        let zone = u64::MAX - (u64::MAX % span);
        loop {
            let v = self.next_u64();
            if v < zone {
                return lo + (v % span) as usize;
            }
        }
    }
}

/// 64-bit digest of arbitrary labelled parts, used for deriving suite seeds.
pub fn hash_parts(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

//! Keyed random streams for reproducible parallel simulation.
//!
//! Every stream is identified by `(master seed, cell, replication, purpose)`.
//! The key is hashed into a ChaCha seed, so a stream's draws depend only on
//! its key and never on which thread runs it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedMaterial {
    pub master: u64,
    pub cell: u64,
    pub replication: u64,
    pub purpose: u64,
}

/// Distribution laws the simulation draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    StandardNormal,
    Bernoulli(f64),
    ChiSquared(f64),
    Uniform,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    material: SeedMaterial,
    rng: ChaCha12Rng,
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash, used to turn textual identities into cell ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RngStream {
    pub fn new(material: SeedMaterial) -> Self {
        let words = [
            material.master,
            material.cell,
            material.replication,
            material.purpose,
        ];
        let mut seed = [0u8; 32];
        let mut state = 0u64;
        for (k, w) in words.iter().enumerate() {
            state = mix64(state ^ mix64(*w ^ (k as u64).wrapping_mul(0xA076_1D64_78BD_642F)));
            seed[k * 8..(k + 1) * 8].copy_from_slice(&state.to_le_bytes());
        }
        Self {
            material,
            rng: ChaCha12Rng::from_seed(seed),
        }
    }

    pub fn material(&self) -> SeedMaterial {
        self.material
    }

    /// Independent child stream for a sub-purpose. Derived from the key only,
    /// so it does not depend on how much of the parent has been consumed.
    pub fn substream(&self, tag: u64) -> RngStream {
        let mut m = self.material;
        m.purpose = mix64(m.purpose ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(m)
    }

    pub fn draw(&mut self, law: Law) -> Result<f64> {
        match law {
            Law::StandardNormal => Ok(self.standard_normal()),
            Law::Uniform => Ok(self.uniform()),
            Law::Bernoulli(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Argument(format!("bernoulli p = {p} outside [0, 1]")));
                }
                Ok(if self.bernoulli(p) { 1.0 } else { 0.0 })
            }
            Law::ChiSquared(df) => {
                if !(df >= 1.0) {
                    return Err(Error::Argument(format!("chi-squared df = {df} below 1")));
                }
                Ok(self.chi_squared(df))
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `p` must lie in `[0, 1]`; `p = 0` never fires and `p = 1` always does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn chi_squared(&mut self, df: f64) -> f64 {
        ChiSquared::new(df)
            .expect("chi-squared df validated by caller")
            .sample(&mut self.rng)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(purpose: u64) -> RngStream {
        RngStream::new(SeedMaterial {
            master: 20240928,
            cell: 7,
            replication: 3,
            purpose,
        })
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut s = stream(0);
        for _ in 0..1000 {
            assert_eq!(s.draw(Law::Bernoulli(0.0)).unwrap(), 0.0);
            assert_eq!(s.draw(Law::Bernoulli(1.0)).unwrap(), 1.0);
        }
    }

    #[test]
    fn parameter_validation() {
        let mut s = stream(0);
        assert!(s.draw(Law::Bernoulli(1.5)).is_err());
        assert!(s.draw(Law::Bernoulli(-0.1)).is_err());
        assert!(s.draw(Law::ChiSquared(0.5)).is_err());
        assert!(s.draw(Law::ChiSquared(f64::NAN)).is_err());
    }

    #[test]
    fn same_key_same_sequence() {
        let a: Vec<f64> = stream(1).normal_vec(64);
        let b: Vec<f64> = stream(1).normal_vec(64);
        assert_eq!(a, b);
        let c: Vec<f64> = stream(2).normal_vec(64);
        assert_ne!(a, c);
    }

    #[test]
    fn substream_ignores_parent_consumption() {
        let parent = stream(5);
        let mut used = stream(5);
        used.normal_vec(10);
        assert_eq!(
            parent.substream(9).normal_vec(8),
            used.substream(9).normal_vec(8)
        );
        assert_ne!(parent.substream(9).normal_vec(8), parent.substream(10).normal_vec(8));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = stream(4);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}

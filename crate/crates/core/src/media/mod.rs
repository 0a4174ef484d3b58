//! Reproducible randomness: seeded streams, Poisson arrow processes on
//! directed edges, and exponential edge weights.
//!
//! Edge-level randomness is counter based: the `i`-th uniform of an edge is
//! a hash of `(stream key, edge label, i)`, so an edge's values do not
//! depend on which other edges were generated, or in what order.

mod percolation;
mod weights;

pub use percolation::{EventScan, PercolationStructure, ScanEvent};
pub use weights::EdgeWeightField;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

#[inline]
pub(crate) fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b).rotate_left(17))
}

/// Uniform on the open interval `(0, 1)`, a pure function of its inputs.
#[inline]
pub(crate) fn counter_uniform(key: u64, counter: u64) -> f64 {
    let h = combine(key, counter.wrapping_mul(0xd1b5_4a32_d192_ed03));
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub(crate) fn counter_exp1(key: u64, counter: u64) -> f64 {
    -counter_uniform(key, counter).ln()
}

/// Derivation labels for one replicate's random streams.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub experiment: String,
    pub replicate: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, experiment: impl Into<String>, replicate: u64) -> Self {
        SeedSpec {
            master_seed,
            experiment: experiment.into(),
            replicate,
        }
    }

    /// 64-bit key of the named stream.
    pub fn key(&self, stream: &str) -> u64 {
        let h = combine(mix64(self.master_seed), hash_str(&self.experiment));
        let h = combine(h, self.replicate);
        combine(h, hash_str(stream))
    }

    /// Sequential generator for the named stream.
    pub fn rng(&self, stream: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key(stream))
    }

    pub fn with_replicate(&self, replicate: u64) -> Self {
        SeedSpec {
            replicate,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_pure_functions_of_labels() {
        let a = SeedSpec::new(7, "exp", 3);
        let b = SeedSpec::new(7, "exp", 3);
        let xs: Vec<u64> = a.rng("gillespie").random_iter().take(5).collect();
        let ys: Vec<u64> = b.rng("gillespie").random_iter().take(5).collect();
        assert_eq!(xs, ys);
        assert_ne!(a.key("gillespie"), a.key("arrows"));
        assert_ne!(a.key("x"), a.with_replicate(4).key("x"));
        assert_ne!(a.key("x"), SeedSpec::new(8, "exp", 3).key("x"));
        assert_ne!(a.key("x"), SeedSpec::new(7, "exq", 3).key("x"));
    }

    #[test]
    fn counter_uniform_in_open_unit_interval() {
        let mut sum = 0.0;
        let n = 200_000;
        for i in 0..n {
            let u = counter_uniform(12345, i);
            assert!(u > 0.0 && u < 1.0);
            sum += u;
        }
        let mean = sum / n as f64;
        // sd of the mean = 1/sqrt(12 n)
        assert!((mean - 0.5).abs() < 3.0 / (12.0 * n as f64).sqrt());
    }
}

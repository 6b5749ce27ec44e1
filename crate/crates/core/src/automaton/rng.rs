use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Identifier of the bit generator, recorded in every report. Bump the
/// version suffix if the bit extraction order ever changes.
pub const GENERATOR_ID: &str = "chacha12-seed_from_u64-lsb-v1";

/// Deterministic stream of fair bits `ξ_1, ξ_2, …`.
///
/// Bits are taken least-significant first from successive `u64` words of a
/// ChaCha12 generator seeded with `SeedableRng::seed_from_u64`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
    word: u64,
    left: u32,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
            word: 0,
            left: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        b
    }

    /// `bits` fair bits packed little-endian into an integer.
    #[inline]
    pub fn next_bits(&mut self, bits: u32) -> u64 {
        debug_assert!(bits <= 64);
        if bits < 64 && bits <= self.left {
            let v = self.word & ((1u64 << bits) - 1);
            self.word >>= bits;
            self.left -= bits;
            return v;
        }
        let mut v = 0u64;
        for i in 0..bits {
            if self.next_bit() {
                v |= 1 << i;
            }
        }
        v
    }

    /// Uniform integer in `0..n` by rejection on `ceil(log2 n)` fair bits.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        if n == 1 {
            return 0;
        }
        let bits = 64 - (n - 1).leading_zeros();
        loop {
            let v = self.next_bits(bits);
            if v < n {
                return v;
            }
        }
    }
}

/// Seed of trial `index` under `master`: one SplitMix64 output on
/// `master + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_bits() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..10_000 {
            assert_eq!(a.next_bit(), b.next_bit());
        }
        let mut c = RngStream::new(43);
        let diff = (0..256).filter(|_| a.next_bit() != c.next_bit()).count();
        assert!(diff > 0);
    }

    #[test]
    fn chunked_bits_match_single_bits() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for k in 0..2000u32 {
            let n = 1 + k % 13;
            let mut v = 0u64;
            for i in 0..n {
                v |= u64::from(b.next_bit()) << i;
            }
            assert_eq!(a.next_bits(n), v);
        }
    }

    #[test]
    fn frequency_sanity_default_seed() {
        let mut r = RngStream::new(crate::DEFAULT_SEED);
        let ones = (0..1_000_000).filter(|_| r.next_bit()).count();
        let freq = ones as f64 / 1e6;
        assert!((freq - 0.5).abs() < 0.002, "frequency {freq}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = RngStream::new(1);
        let mut counts = [0u32; 6];
        for _ in 0..60_000 {
            counts[r.below(6) as usize] += 1;
        }
        for c in counts {
            assert!((9_000..11_000).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn trial_seeds_distinct() {
        let seeds: HashSet<u64> = (0..100_000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 100_000);
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
    }
}

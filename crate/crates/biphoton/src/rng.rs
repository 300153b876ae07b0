//! Deterministic per-subsystem RNG streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream keyed
//! by (master seed, subsystem label, index). Separate streams keep the
//! signal and idler arms statistically independent and, more
//! importantly, make them *insensitive to each other's configuration*:
//! removing the idler filter cannot shift a single draw on the signal
//! side. Slice and scan-point indices go into the key, so partitioned or
//! parallel generation reproduces the single-worker stream exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Factory for labeled, indexed ChaCha8 RNGs derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// RNG for subsystem `label`, stream `index`.
    pub fn rng(&self, label: &str, index: u64) -> ChaCha8Rng {
        let mut state = self.master ^ fnv1a64(label.as_bytes());
        let mut key = [0u8; 32];
        let a = splitmix64(&mut state);
        let mut state2 = a ^ index.wrapping_mul(0xA24B_AED4_963E_E407);
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state2).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Stream factory for a derived scope (e.g. one scan point), so the
    /// scope can hand out its own labeled streams.
    pub fn scoped(&self, label: &str, index: u64) -> SeedStream {
        let mut state = self.master ^ fnv1a64(label.as_bytes());
        let a = splitmix64(&mut state);
        let mut state2 = a ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25);
        SeedStream {
            master: splitmix64(&mut state2),
        }
    }
}

//! Deterministic 64-bit generator used by instance generation and tests.

/// SplitMix64.
///
/// The full recurrence, so the stream can be reproduced in any language:
///
/// ```text
/// state += 0x9E37_79B9_7F4A_7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
/// z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
/// output = z ^ (z >> 31)
/// ```
///
/// Identical seeds give identical streams on every platform; instance
/// generation is a pure function of its spec.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-enough value in `0..bound` (plain modulo; the tiny bias is
    /// irrelevant for instance generation).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }
}

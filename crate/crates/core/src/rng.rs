use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies an independent random stream for replay.
///
/// A stream is keyed by a master seed and the coordinates of the draw site:
/// the outer refinement round, the cell within that round and the
/// repetition index of the boosted tree build. The same key always yields
/// the same sequence regardless of which thread consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub round: u64,
    pub cell: u64,
    pub repetition: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            round: 0,
            cell: 0,
            repetition: 0,
        }
    }

    pub fn at(self, round: u64, cell: u64, repetition: u64) -> Self {
        Self {
            round,
            cell,
            repetition,
            ..self
        }
    }

    pub fn with_repetition(self, repetition: u64) -> Self {
        Self { repetition, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.seed, self.round, self.cell, self.repetition])
        {
            state = splitmix64(state ^ splitmix64(word));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(seed ^ splitmix64(label.wrapping_add(0x51_7c_c1_b7_27_22_0a_95)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

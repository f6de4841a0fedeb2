//! Seeded RNG streams.
//!
//! A run must be a pure function of (config, seed), and the points selected
//! by different methods on the same seed must stay comparable: the
//! acquisition stream at iteration t has to produce the same draws whether
//! or not an EBM or a policy consumed randomness earlier in the loop. Each
//! consumer therefore gets its own stream, derived from the master seed and
//! a (purpose, index) pair instead of sharing one sequential generator.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial Latin-hypercube design.
    InitDesign,
    /// Energy-model weight initialization.
    EbmInit,
    /// Energy-model training (shuffling + Langevin noise) at iteration t.
    EbmTrain(u64),
    /// Acquisition candidate generation at iteration t.
    Acquisition(u64),
    /// Policy/value network initialization.
    PolicyInit,
    /// Policy action sampling at iteration t.
    PolicyAct(u64),
    /// Policy update shuffling at iteration t.
    PolicyUpdate(u64),
    /// Probe-point set for state featurization.
    Probes,
    /// Random-search proposal at iteration t.
    RandomSearch(u64),
}

impl Stream {
    fn tag(self) -> (u64, u64) {
        match self {
            Stream::InitDesign => (1, 0),
            Stream::EbmInit => (2, 0),
            Stream::EbmTrain(t) => (3, t),
            Stream::Acquisition(t) => (4, t),
            Stream::PolicyInit => (5, 0),
            Stream::PolicyAct(t) => (6, t),
            Stream::PolicyUpdate(t) => (7, t),
            Stream::Probes => (8, 0),
            Stream::RandomSearch(t) => (9, t),
        }
    }
}

/// Derives independent deterministic RNGs from one master seed.
#[derive(Debug, Clone, Copy)]
pub struct RngFactory {
    master_seed: u64,
}

impl RngFactory {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// RNG for one purpose; identical (seed, stream) pairs yield identical draws.
    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let (kind, index) = stream.tag();
        let mixed = splitmix64(splitmix64(self.master_seed ^ kind.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ index);
        ChaCha8Rng::seed_from_u64(mixed)
    }
}

/// SplitMix64 finalizer; spreads low-entropy seeds over the full state space.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Keyed random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream, addressed by
//! `(master seed, purpose, a, b)`. The master seed fixes the cipher key and
//! the rest selects the 64-bit stream id, so a stream's contents never depend
//! on how many other streams were used before it or on which thread asks.
//!
//! | purpose      | a           | b           | used for                                   |
//! |--------------|-------------|-------------|--------------------------------------------|
//! | `EnvGen`     | band / item | attempt     | procedural environments                    |
//! | `Init`       | 0           | 0           | initial population weights                 |
//! | `Evaluation` | generation  | 0           | shared start state and noise seed per gen  |
//! | `Selection`  | generation  | 0           | roulette draws and offspring mutation      |
//! | `SweepCell`  | band        | env, run    | master seed of one sweep evolution         |
//! | `Replay`     | 0           | 0           | start state for replays without one given  |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    EnvGen,
    Init,
    Evaluation,
    Selection,
    SweepCell,
    Replay,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::EnvGen => 0x656e_7667,
            Purpose::Init => 0x696e_6974,
            Purpose::Evaluation => 0x6576_616c,
            Purpose::Selection => 0x7365_6c65,
            Purpose::SweepCell => 0x7377_6570,
            Purpose::Replay => 0x7265_706c,
        }
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
    key: [u8; 32],
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        let mut key = [0u8; 32];
        let mut z = master;
        for chunk in key.chunks_exact_mut(8) {
            z = mix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        SeedStreams { master, key }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    fn stream_id(purpose: Purpose, a: u64, b: u64) -> u64 {
        mix64(purpose.tag() ^ mix64(a ^ mix64(b.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn stream(&self, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(Self::stream_id(purpose, a, b));
        rng
    }

    /// A 64-bit seed drawn from the addressed stream, for handing to
    /// components that take a plain seed.
    pub fn derive_seed(&self, purpose: Purpose, a: u64, b: u64) -> u64 {
        use rand::RngCore;
        self.stream(purpose, a, b).next_u64()
    }
}

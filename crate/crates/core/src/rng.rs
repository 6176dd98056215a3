//! Counter-keyed random streams.
//!
//! Every random draw in a simulation is taken from a stream keyed by
//! `(master_seed, purpose, trial, user, antenna)`, so results do not depend on
//! how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Payload = 1,
    Power = 2,
    Cfo = 3,
    Channel = 4,
    Noise = 5,
    FrozenSignature = 6,
    SpreadingSequence = 7,
    Pilot = 8,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream key. `trial`, `user` and `antenna` are zero when not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub purpose: Purpose,
    pub trial: u64,
    pub user: u64,
    pub antenna: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, purpose: Purpose) -> Self {
        Self {
            master_seed,
            purpose,
            trial: 0,
            user: 0,
            antenna: 0,
        }
    }

    pub fn trial(mut self, trial: u64) -> Self {
        self.trial = trial;
        self
    }

    pub fn user(mut self, user: u64) -> Self {
        self.user = user;
        self
    }

    pub fn antenna(mut self, antenna: u64) -> Self {
        self.antenna = antenna;
        self
    }

    pub fn seed(&self) -> u64 {
        let mut h = splitmix64(self.master_seed);
        for part in [self.purpose as u64, self.trial, self.user, self.antenna] {
            h = splitmix64(h ^ part);
        }
        h
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

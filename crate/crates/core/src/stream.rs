//! Deterministic random streams keyed by (seed, replication, level, role).
//!
//! Each [`SeedSpec`] is hashed with SHA-256 into the 32-byte key of a ChaCha8
//! generator. ChaCha is counter-based, so the values a stream produces depend
//! only on its key and never on which thread consumes it or when.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamRole {
    Pilot,
    LevelSampling,
    MinimizerProbe,
}

impl StreamRole {
    fn tag(self) -> u8 {
        match self {
            StreamRole::Pilot => 1,
            StreamRole::LevelSampling => 2,
            StreamRole::MinimizerProbe => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication_index: u64,
    pub level_index: u64,
    pub stream_role: StreamRole,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            replication_index: 0,
            level_index: 0,
            stream_role: StreamRole::LevelSampling,
        }
    }

    pub fn replication(self, replication_index: u64) -> Self {
        Self { replication_index, ..self }
    }

    pub fn level(self, level_index: u64) -> Self {
        Self { level_index, ..self }
    }

    pub fn role(self, stream_role: StreamRole) -> Self {
        Self { stream_role, ..self }
    }

    fn key(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"mlmc-saa/stream/v1");
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(self.replication_index.to_le_bytes());
        hasher.update(self.level_index.to_le_bytes());
        hasher.update([self.stream_role.tag()]);
        hasher.finalize().into()
    }

    pub fn stream(&self) -> Stream {
        Stream { rng: ChaCha8Rng::from_seed(self.key()) }
    }
}

/// A random stream bound to one [`SeedSpec`]. Not shared across threads.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// Standard normal variate.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform variate on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn rng(&mut self) -> &mut impl RngCore {
        &mut self.rng
    }
}

//! Seed splitting. A single experiment seed is expanded into independent
//! ChaCha20 streams, one per purpose:
//!
//! | stream | purpose                              |
//! |--------|--------------------------------------|
//! | 1      | ground-truth field / path            |
//! | 2      | observation noise                    |
//! | 3      | sampler initialization               |
//! | 4 + i  | chain `i` (moves, proposals)         |
//!
//! Each stream is `ChaCha20Rng::seed_from_u64(seed)` with `set_stream(id)`,
//! so re-running one stage never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Truth,
    Noise,
    Init,
    Chain(u32),
}

impl Purpose {
    pub fn stream_id(self) -> u64 {
        match self {
            Purpose::Truth => 1,
            Purpose::Noise => 2,
            Purpose::Init => 3,
            Purpose::Chain(i) => 4 + u64::from(i),
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose.stream_id());
    rng
}

/// Serializable position of a ChaCha20 generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Word position as a decimal string (it is a 68-bit counter).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha20Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha20Rng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad RNG position {:?}", self.word_pos)))?;
        let mut rng = ChaCha20Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

//! Counter-style random streams: every stream is a ChaCha generator seeded by
//! a SHA-256 digest of a user seed plus a key path, so draws never depend on
//! the order in which streams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub(crate) struct StreamKey(Sha256);

impl StreamKey {
    pub(crate) fn new(seed: u64, domain: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"stereo-eeg/v1");
        h.update(seed.to_le_bytes());
        let k = Self(h);
        k.str(domain)
    }

    pub(crate) fn str(mut self, s: &str) -> Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    pub(crate) fn num(mut self, v: u64) -> Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub(crate) fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.0.finalize().into())
    }
}

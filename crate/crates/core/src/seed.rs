//! Stable seed derivation. `std`'s hashers are not guaranteed stable across
//! releases, so seeds are derived with FNV-1a followed by a splitmix64 finalizer.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
pub struct SeedHasher(u64);

impl Default for SeedHasher {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl SeedHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(mut self, bytes: &[u8]) -> Self {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        // field separator so ("ab", "c") != ("a", "bc")
        self.0 ^= 0xff;
        self.0 = self.0.wrapping_mul(FNV_PRIME);
        self
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn finish(self) -> u64 {
        splitmix64(self.0)
    }
}

/// Seed for one rollout of one task.
pub fn rollout_seed(task_id: &str, rollout: usize, master_seed: u64) -> u64 {
    SeedHasher::new().str(task_id).u64(rollout as u64).u64(master_seed).finish()
}

/// Child seed for the `n`-th random draw within a stream.
pub fn derive(seed: u64, label: &str, n: u64) -> u64 {
    SeedHasher::new().u64(seed).str(label).u64(n).finish()
}

//! Splittable, purpose-labelled random streams.
//!
//! A [`Stream`] is a SplitMix64 generator keyed by a 64-bit stream id. Child
//! streams are derived from a parent id and a label (a string, hashed with
//! FNV-1a, or an integer index) without consuming any draws from the parent,
//! so adding a new consumer somewhere never perturbs existing sequences.
//!
//! Derivation scheme:
//!
//! ```text
//! root(seed)          id = mix(seed ^ ROOT_SALT)
//! child(id, label)    id' = mix(id ^ mix(fnv1a(label) ^ LABEL_SALT))
//! index(id, i)        id' = mix(id ^ mix(i ^ INDEX_SALT))
//! next_u64            counter += GOLDEN; out = mix(id ^ counter)
//! ```
//!
//! `mix` is the SplitMix64 finalizer. Streams implement [`rand::RngCore`],
//! so the `rand` and `rand_distr` samplers can be used on top of them.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const ROOT_SALT: u64 = 0x6A09_E667_F3BC_C909;
const LABEL_SALT: u64 = 0x94D0_49BB_1331_11EB;
const INDEX_SALT: u64 = 0xBF58_476D_1CE4_E5B9;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a label.
pub fn label_hash(label: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in label.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    id: u64,
    counter: u64,
}

impl Stream {
    /// Root stream for a master seed.
    pub fn root(seed: u64) -> Self {
        Self::from_id(mix(seed ^ ROOT_SALT))
    }

    fn from_id(id: u64) -> Self {
        Self { id, counter: mix(id ^ GOLDEN) }
    }

    /// Identifier of this stream; stable across draws.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Child stream for a named purpose. Does not advance `self`.
    pub fn child(&self, label: &str) -> Self {
        Self::from_id(mix(self.id ^ mix(label_hash(label) ^ LABEL_SALT)))
    }

    /// Child stream for an integer index (replication, attribute, cell...).
    pub fn index(&self, i: u64) -> Self {
        Self::from_id(mix(self.id ^ mix(i ^ INDEX_SALT)))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (Lemire's nearly-divisionless method).
    ///
    /// # Panics
    /// Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            let low = m as u64;
            if low >= n || low >= n.wrapping_neg() % n {
                return (m >> 64) as usize;
            }
        }
    }

    /// Raw 64-bit draw, e.g. to seed a derived landscape.
    pub fn next_seed(&mut self) -> u64 {
        self.next_u64()
    }

    /// Bernoulli draw. Always consumes exactly one `u64`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN);
        mix(self.id ^ self.counter)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};
use sha3::{Digest, Keccak256};

/// Width of every on-chain digest, in bytes (80 bits).
pub const HASH80_BYTES: usize = 10;

/// An 80-bit truncated digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Hash80(pub [u8; HASH80_BYTES]);

impl Hash80 {
    pub fn as_bytes(&self) -> &[u8; HASH80_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        let arr: [u8; HASH80_BYTES] = v.try_into().ok()?;
        Some(Hash80(arr))
    }
}

impl fmt::Debug for Hash80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash80({})", self.to_hex())
    }
}

impl fmt::Display for Hash80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A digest function producing 80-bit outputs.
///
/// The default is [`Keccak80`]; a lightweight sponge can be dropped in by
/// implementing this trait and using the `*_with` variants of the tree
/// builders.
pub trait Hasher80 {
    fn hash80(&self, data: &[u8]) -> Hash80;

    fn hash80_concat(&self, parts: &[&[u8]]) -> Hash80 {
        let total = parts.iter().map(|p| p.len()).sum();
        let mut buf = Vec::with_capacity(total);
        for p in parts {
            buf.extend_from_slice(p);
        }
        self.hash80(&buf)
    }
}

/// Keccak-256 truncated to its first 80 bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct Keccak80;

impl Hasher80 for Keccak80 {
    fn hash80(&self, data: &[u8]) -> Hash80 {
        let full = Keccak256::digest(data);
        let mut out = [0u8; HASH80_BYTES];
        out.copy_from_slice(&full[..HASH80_BYTES]);
        Hash80(out)
    }

    fn hash80_concat(&self, parts: &[&[u8]]) -> Hash80 {
        let mut h = Keccak256::new();
        for p in parts {
            h.update(p);
        }
        let full = h.finalize();
        let mut out = [0u8; HASH80_BYTES];
        out.copy_from_slice(&full[..HASH80_BYTES]);
        Hash80(out)
    }
}

/// [`Keccak80`] digest of `data`.
pub fn hash80(data: &[u8]) -> Hash80 {
    Keccak80.hash80(data)
}

pub(crate) fn hash80_concat(parts: &[&[u8]]) -> Hash80 {
    Keccak80.hash80_concat(parts)
}

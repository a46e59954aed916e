//! Pluggable signing.
//!
//! The bundled scheme is a deterministic keyed hash expanded to 1024 bits. It
//! is a simulation stand-in: verification needs the signer's secret, which the
//! [`KeyRegistry`] holds on behalf of every node.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha3::{Digest, Keccak256};

use super::{NodeId, Signature, SIG_BYTES};

pub trait Signer {
    fn node_id(&self) -> NodeId;
    fn sign(&self, msg: &[u8]) -> Signature;
}

pub trait Verifier {
    fn verify(&self, signer: NodeId, msg: &[u8], sig: &Signature) -> bool;
}

#[derive(Clone)]
pub struct KeyPair {
    secret: [u8; 32],
    public: [u8; 32],
    id: NodeId,
}

impl KeyPair {
    /// Derives a key pair from a stable label (for example a node name).
    pub fn from_label(label: &str) -> Self {
        let secret: [u8; 32] = Keccak256::new()
            .chain_update(b"lwchain/secret/")
            .chain_update(label.as_bytes())
            .finalize()
            .into();
        let public: [u8; 32] = Keccak256::new()
            .chain_update(b"lwchain/public/")
            .chain_update(secret)
            .finalize()
            .into();
        KeyPair {
            secret,
            public,
            id: NodeId::from_public_key(&public),
        }
    }

    pub fn public_key(&self) -> &[u8; 32] {
        &self.public
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("id", &self.id).finish_non_exhaustive()
    }
}

/// `Keccak(secret ‖ msg)`, stretched to 1024 bits by a ChaCha8 stream
/// seeded with the digest.
fn keyed_signature(secret: &[u8; 32], msg: &[u8]) -> Signature {
    let digest: [u8; 32] = Keccak256::new().chain_update(secret).chain_update(msg).finalize().into();
    let mut out = [0u8; SIG_BYTES];
    ChaCha8Rng::from_seed(digest).fill_bytes(&mut out);
    Signature(out)
}

impl Signer for KeyPair {
    fn node_id(&self) -> NodeId {
        self.id
    }

    fn sign(&self, msg: &[u8]) -> Signature {
        keyed_signature(&self.secret, msg)
    }
}

/// Simulated PKI: maps node ids to their keys.
#[derive(Clone, Debug, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<NodeId, KeyPair>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `key`; returns the id back as an error if it is already taken.
    pub fn register(&mut self, key: KeyPair) -> Result<(), NodeId> {
        let id = key.id;
        if self.keys.contains_key(&id) {
            return Err(id);
        }
        self.keys.insert(id, key);
        Ok(())
    }

    pub fn get(&self, id: NodeId) -> Option<&KeyPair> {
        self.keys.get(&id)
    }
}

impl Verifier for KeyRegistry {
    fn verify(&self, signer: NodeId, msg: &[u8], sig: &Signature) -> bool {
        self.keys
            .get(&signer)
            .is_some_and(|k| keyed_signature(&k.secret, msg) == *sig)
    }
}

/// Remembers the outcome of every `(signer, message, signature)` check.
///
/// Verification is a pure function, so the cache never changes a result.
/// It is cleared once it holds `capacity` entries.
#[derive(Debug)]
pub struct MemoVerifier<V> {
    inner: V,
    capacity: usize,
    seen: RefCell<HashMap<Vec<u8>, bool>>,
}

impl<V: Verifier> MemoVerifier<V> {
    pub fn new(inner: V, capacity: usize) -> Self {
        MemoVerifier {
            inner,
            capacity,
            seen: RefCell::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }
}

impl<V: Verifier> Verifier for MemoVerifier<V> {
    fn verify(&self, signer: NodeId, msg: &[u8], sig: &Signature) -> bool {
        let mut key = Vec::with_capacity(1 + msg.len() + SIG_BYTES);
        key.push(signer.0);
        key.extend_from_slice(&sig.0);
        key.extend_from_slice(msg);
        if let Some(ok) = self.seen.borrow().get(&key) {
            return *ok;
        }
        let ok = self.inner.verify(signer, msg, sig);
        let mut seen = self.seen.borrow_mut();
        if seen.len() >= self.capacity {
            seen.clear();
        }
        seen.insert(key, ok);
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_ids_and_signatures() {
        let a = KeyPair::from_label("edge-1");
        let b = KeyPair::from_label("edge-1");
        assert_eq!(a.node_id(), b.node_id());
        assert_eq!(a.sign(b"m"), b.sign(b"m"));
        assert_ne!(a.sign(b"m"), a.sign(b"n"));
    }

    #[test]
    fn registry_verifies() {
        let k = KeyPair::from_label("cloud");
        let mut reg = KeyRegistry::new();
        reg.register(k.clone()).unwrap();
        let sig = k.sign(b"hello");
        assert!(reg.verify(k.node_id(), b"hello", &sig));
        assert!(!reg.verify(k.node_id(), b"hellp", &sig));
        assert_eq!(reg.register(k.clone()), Err(k.node_id()));
    }

    #[test]
    fn memo_matches_inner_and_survives_clearing() {
        let k = KeyPair::from_label("cloud");
        let mut reg = KeyRegistry::new();
        reg.register(k.clone()).unwrap();
        let memo = MemoVerifier::new(reg, 2);
        let sig = k.sign(b"hello");
        for _ in 0..3 {
            assert!(memo.verify(k.node_id(), b"hello", &sig));
            assert!(!memo.verify(k.node_id(), b"hellp", &sig));
            assert!(!memo.verify(NodeId(k.node_id().0 ^ 1), b"hello", &sig));
        }
    }
}

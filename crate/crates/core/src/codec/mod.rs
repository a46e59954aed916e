//! Bit-exact wire formats for sub-chain blocks and transactions.
//!
//! Layouts, all fields packed most-significant-bit first in the order listed,
//! with no padding:
//!
//! ```text
//! header       CURRENT_HASH(80) PRE_HASH(80) TMP(24) ROOT_REP(80) ROOT_TRANS(80)  = 344 bits
//! transaction  TYPE(4) ID_FROM(8) ID_TARGET(8) SIG(1024) ADD(1024)                = 2068 bits
//! ```
//!
//! A block's `current_hash` is the 80-bit digest of
//! `pre_hash ‖ tmp ‖ root_rep ‖ root_trans`; it never covers itself.

mod bits;
mod hash;
mod merkle;
mod reptrie;
mod sig;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bits::{BitReader, BitString};
pub use hash::{hash80, Hash80, Hasher80, Keccak80, HASH80_BYTES};
pub use merkle::{
    merkle_proof, merkle_proof_from_leaves, merkle_root, merkle_root_from_leaves, verify_proof,
    verify_proof_with, MerkleProof,
};
pub use reptrie::{reputation_leaf, reputation_root, reputation_root_with};
pub use sig::{KeyPair, KeyRegistry, MemoVerifier, Signer, Verifier};

pub(crate) use hash::hash80_concat;

pub const HEADER_BITS: usize = 80 + 80 + 24 + 80 + 80;
pub const TRANSACTION_BITS: usize = 4 + 8 + 8 + 1024 + 1024;
pub const SIG_BYTES: usize = 128;
pub const ADD_BYTES: usize = 128;
pub const TIMESTAMP_MODULUS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("{what}: expected {expected} bits, got {actual}")]
    WrongLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("undefined transaction type tag {0}")]
    UnknownTxType(u8),
    #[error("field `{field}` value {value} does not fit in {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        bits: u32,
    },
    #[error("duplicate reputation delta for node {0}")]
    DuplicateNode(NodeId),
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid hex: {0}")]
    Hex(String),
}

/// 8-bit node identifier, taken from the first byte of the node's public key digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u8);

impl NodeId {
    pub fn from_public_key(public_key: &[u8]) -> Self {
        NodeId(hash80(public_key).0[0])
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TxType {
    Query = 0,
    Reply = 1,
    Update = 2,
    Rate = 3,
    Assert = 4,
}

impl TxType {
    pub const ALL: [TxType; 5] = [
        TxType::Query,
        TxType::Reply,
        TxType::Update,
        TxType::Rate,
        TxType::Assert,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self, CodecError> {
        TxType::ALL
            .get(usize::from(tag))
            .copied()
            .ok_or(CodecError::UnknownTxType(tag))
    }
}

/// 1024-bit sender signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIG_BYTES]);

impl Default for Signature {
    fn default() -> Self {
        Signature([0; SIG_BYTES])
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..6]))
    }
}

/// 1024-bit transaction note (the ADD field).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Payload(pub [u8; ADD_BYTES]);

impl Default for Payload {
    fn default() -> Self {
        Payload([0; ADD_BYTES])
    }
}

impl Payload {
    /// Copies `data` into a zero-padded payload. Fails if it exceeds 128 bytes.
    pub fn from_slice(data: &[u8]) -> Result<Self, CodecError> {
        if data.len() > ADD_BYTES {
            return Err(CodecError::FieldOverflow {
                field: "add",
                value: data.len() as u64,
                bits: (ADD_BYTES * 8) as u32,
            });
        }
        let mut p = [0u8; ADD_BYTES];
        p[..data.len()].copy_from_slice(data);
        Ok(Payload(p))
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload({}..)", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Transaction {
    pub tx_type: TxType,
    pub id_from: NodeId,
    pub id_target: NodeId,
    pub sig: Signature,
    pub add: Payload,
}

impl Transaction {
    /// Builds and signs a transaction with `signer`'s key.
    pub fn signed(
        tx_type: TxType,
        signer: &impl Signer,
        id_target: NodeId,
        add: Payload,
    ) -> Transaction {
        let mut tx = Transaction {
            tx_type,
            id_from: signer.node_id(),
            id_target,
            sig: Signature::default(),
            add,
        };
        tx.sig = signer.sign(&tx.signing_bytes());
        tx
    }

    /// Every field except the signature, in wire order.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 + ADD_BYTES);
        out.push(self.tx_type.tag());
        out.push(self.id_from.0);
        out.push(self.id_target.0);
        out.extend_from_slice(&self.add.0);
        out
    }

    pub fn verify(&self, verifier: &impl Verifier) -> bool {
        verifier.verify(self.id_from, &self.signing_bytes(), &self.sig)
    }

    /// Merkle leaf: the digest of the padded 2068-bit encoding.
    pub fn leaf_hash(&self) -> Hash80 {
        hash80(encode_transaction(self).as_bytes())
    }
}

/// The 24-bit TMP field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Timestamp24(u32);

impl Timestamp24 {
    pub fn new(value: u32) -> Result<Self, CodecError> {
        if u64::from(value) >= TIMESTAMP_MODULUS {
            return Err(CodecError::FieldOverflow {
                field: "tmp",
                value: u64::from(value),
                bits: 24,
            });
        }
        Ok(Timestamp24(value))
    }

    /// Simulation tick modulo 2^24.
    pub fn from_tick(tick: u64) -> Self {
        Timestamp24((tick % TIMESTAMP_MODULUS) as u32)
    }

    pub fn value(self) -> u32 {
        self.0
    }

    fn to_be_bytes(self) -> [u8; 3] {
        let b = self.0.to_be_bytes();
        [b[1], b[2], b[3]]
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct BlockHeader {
    pub current_hash: Hash80,
    pub pre_hash: Hash80,
    pub tmp: Timestamp24,
    pub root_rep: Hash80,
    pub root_trans: Hash80,
}

impl BlockHeader {
    /// Builds a header and fills in its `current_hash`.
    pub fn sealed(pre_hash: Hash80, tmp: Timestamp24, root_rep: Hash80, root_trans: Hash80) -> Self {
        let mut h = BlockHeader {
            current_hash: Hash80::default(),
            pre_hash,
            tmp,
            root_rep,
            root_trans,
        };
        h.current_hash = h.compute_hash();
        h
    }

    pub fn compute_hash(&self) -> Hash80 {
        hash80_concat(&[
            &self.pre_hash.0,
            &self.tmp.to_be_bytes(),
            &self.root_rep.0,
            &self.root_trans.0,
        ])
    }

    pub fn hash_is_consistent(&self) -> bool {
        self.current_hash == self.compute_hash()
    }
}

/// A node's score after a block is applied. Only modified nodes are recorded.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ReputationDelta {
    pub node: NodeId,
    pub new_score: f64,
}

/// Proposer identity attached to a block outside the 344-bit header.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BlockSeal {
    pub proposer: NodeId,
    pub signature: Signature,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    pub rep_deltas: Vec<ReputationDelta>,
    pub seal: Option<BlockSeal>,
}

impl Block {
    /// Computes both roots and the header hash for the given body.
    pub fn assemble(
        pre_hash: Hash80,
        tmp: Timestamp24,
        transactions: Vec<Transaction>,
        rep_deltas: Vec<ReputationDelta>,
    ) -> Result<Block, CodecError> {
        let root_rep = reputation_root(&rep_deltas)?;
        let root_trans = merkle_root(&transactions);
        Ok(Block {
            header: BlockHeader::sealed(pre_hash, tmp, root_rep, root_trans),
            transactions,
            rep_deltas,
            seal: None,
        })
    }

    pub fn genesis() -> Block {
        Block::assemble(Hash80::default(), Timestamp24::default(), Vec::new(), Vec::new())
            .expect("empty genesis body is well formed")
    }

    pub fn seal_with(mut self, signer: &impl Signer) -> Block {
        self.seal = Some(BlockSeal {
            proposer: signer.node_id(),
            signature: signer.sign(&self.header.current_hash.0),
        });
        self
    }

    pub fn hash(&self) -> Hash80 {
        self.header.current_hash
    }

    pub fn proposer(&self) -> Option<NodeId> {
        self.seal.map(|s| s.proposer)
    }

    /// True when both roots recompute from the body.
    pub fn roots_match_body(&self) -> bool {
        merkle_root(&self.transactions) == self.header.root_trans
            && reputation_root(&self.rep_deltas).is_ok_and(|r| r == self.header.root_rep)
    }
}

pub fn encode_transaction(tx: &Transaction) -> BitString {
    let mut out = BitString::with_capacity(TRANSACTION_BITS);
    out.push_bits(u64::from(tx.tx_type.tag()), 4);
    out.push_bits(u64::from(tx.id_from.0), 8);
    out.push_bits(u64::from(tx.id_target.0), 8);
    out.push_bytes(&tx.sig.0);
    out.push_bytes(&tx.add.0);
    debug_assert_eq!(out.len(), TRANSACTION_BITS);
    out
}

pub fn decode_transaction(bits: &BitString) -> Result<Transaction, CodecError> {
    if bits.len() != TRANSACTION_BITS {
        return Err(CodecError::WrongLength {
            what: "transaction",
            expected: TRANSACTION_BITS,
            actual: bits.len(),
        });
    }
    let mut r = bits.reader();
    let tx_type = TxType::from_tag(r.read_bits(4) as u8)?;
    let id_from = NodeId(r.read_bits(8) as u8);
    let id_target = NodeId(r.read_bits(8) as u8);
    let sig = Signature(r.read_bytes::<SIG_BYTES>());
    let add = Payload(r.read_bytes::<ADD_BYTES>());
    Ok(Transaction {
        tx_type,
        id_from,
        id_target,
        sig,
        add,
    })
}

pub fn encode_header(h: &BlockHeader) -> BitString {
    let mut out = BitString::with_capacity(HEADER_BITS);
    out.push_bytes(&h.current_hash.0);
    out.push_bytes(&h.pre_hash.0);
    out.push_bits(u64::from(h.tmp.value()), 24);
    out.push_bytes(&h.root_rep.0);
    out.push_bytes(&h.root_trans.0);
    debug_assert_eq!(out.len(), HEADER_BITS);
    out
}

pub fn decode_header(bits: &BitString) -> Result<BlockHeader, CodecError> {
    if bits.len() != HEADER_BITS {
        return Err(CodecError::WrongLength {
            what: "block header",
            expected: HEADER_BITS,
            actual: bits.len(),
        });
    }
    let mut r = bits.reader();
    let current_hash = Hash80(r.read_bytes());
    let pre_hash = Hash80(r.read_bytes());
    let tmp = Timestamp24::new(r.read_bits(24) as u32)?;
    let root_rep = Hash80(r.read_bytes());
    let root_trans = Hash80(r.read_bytes());
    Ok(BlockHeader {
        current_hash,
        pre_hash,
        tmp,
        root_rep,
        root_trans,
    })
}

//! Inter-domain chain run by the cloud nodes.
//!
//! A terminal or edge node reaches another domain by committing an UPDATE
//! whose payload starts with [`RELAY_MARKER`] to its own sub-chain. Its cloud
//! node wraps that transaction, the committing header and a Merkle proof into
//! a [`RelayMessage`]. Accepted relays are packaged into the next global
//! block; the proposer of each global round is drawn with probability
//! proportional to stake.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    Block, BlockHeader, Hash80, MerkleProof, NodeId, Payload, Signer, Timestamp24, Transaction,
    TxType, ADD_BYTES,
};
use crate::ledger::{spv_verify, Chain, ChainMode};
use crate::reputation::ReputationLedger;

/// First ADD byte of a cross-domain UPDATE.
pub const RELAY_MARKER: u8 = 0xcd;
/// First ADD byte of the UPDATE a target cloud injects for a relayed payload.
pub const RELAYED_MARKER: u8 = 0xce;
/// Room left for the payload after marker, domain, node and length bytes.
pub const RELAY_PAYLOAD_MAX: usize = ADD_BYTES - 4;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct DomainId(pub u8);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlobalError {
    #[error("total stake is zero")]
    NoStake,
    #[error("stake {0} is negative or not finite")]
    InvalidStake(f64),
    #[error("relay payload of {0} bytes exceeds {RELAY_PAYLOAD_MAX}")]
    PayloadTooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudStake {
    pub domain: DomainId,
    pub stake: f64,
}

/// Draws the proposer of a global round with probability `stake / Σ stake`.
pub fn select_proposer(stakes: &[CloudStake], rng: &mut impl Rng) -> Result<DomainId, GlobalError> {
    if let Some(bad) = stakes.iter().find(|s| !(s.stake >= 0.0 && s.stake.is_finite())) {
        return Err(GlobalError::InvalidStake(bad.stake));
    }
    let total: f64 = stakes.iter().map(|s| s.stake).sum();
    if total <= 0.0 {
        return Err(GlobalError::NoStake);
    }
    let mut draw = rng.random::<f64>() * total;
    for s in stakes {
        if s.stake > 0.0 && draw < s.stake {
            return Ok(s.domain);
        }
        draw -= s.stake;
    }
    let last = stakes.iter().rev().find(|s| s.stake > 0.0).expect("positive total");
    Ok(last.domain)
}

/// Builds the ADD field of a cross-domain UPDATE.
pub fn relay_payload(to: (DomainId, NodeId), data: &[u8]) -> Result<Payload, GlobalError> {
    wrap(RELAY_MARKER, to, data)
}

/// Builds the ADD field a target cloud uses when injecting a relayed payload.
pub fn relayed_payload(from: (DomainId, NodeId), data: &[u8]) -> Result<Payload, GlobalError> {
    wrap(RELAYED_MARKER, from, data)
}

fn wrap(marker: u8, peer: (DomainId, NodeId), data: &[u8]) -> Result<Payload, GlobalError> {
    if data.len() > RELAY_PAYLOAD_MAX {
        return Err(GlobalError::PayloadTooLarge(data.len()));
    }
    let mut buf = vec![marker, peer.0 .0, peer.1 .0, data.len() as u8];
    buf.extend_from_slice(data);
    Ok(Payload::from_slice(&buf).expect("length checked"))
}

/// Splits an ADD field built by [`relay_payload`] or [`relayed_payload`].
pub fn parse_relay(marker: u8, add: &Payload) -> Option<((DomainId, NodeId), Vec<u8>)> {
    let a = &add.0;
    let len = usize::from(a[3]);
    if a[0] != marker || len > RELAY_PAYLOAD_MAX {
        return None;
    }
    Some(((DomainId(a[1]), NodeId(a[2])), a[4..4 + len].to_vec()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayMessage {
    pub from: (DomainId, NodeId),
    pub to: (DomainId, NodeId),
    pub payload: Vec<u8>,
    /// The originating UPDATE as committed in the source sub-chain.
    pub source_tx: Transaction,
    pub anchor: BlockHeader,
    pub proof: MerkleProof,
}

impl RelayMessage {
    /// Wraps a committed cross-domain UPDATE. Returns `None` if the
    /// transaction is not one.
    pub fn from_committed(
        source_domain: DomainId,
        tx: Transaction,
        anchor: BlockHeader,
        proof: MerkleProof,
    ) -> Option<RelayMessage> {
        if tx.tx_type != TxType::Update {
            return None;
        }
        let (to, payload) = parse_relay(RELAY_MARKER, &tx.add)?;
        Some(RelayMessage {
            from: (source_domain, tx.id_from),
            to,
            payload,
            source_tx: tx,
            anchor,
            proof,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Error)]
#[serde(rename_all = "kebab-case")]
pub enum RelayReject {
    #[error("bad-anchor")]
    BadAnchor,
    #[error("unknown-header")]
    UnknownHeader,
    #[error("isolated-sender")]
    IsolatedSender,
    #[error("malformed")]
    Malformed,
    #[error("same-domain")]
    SameDomain,
}

/// Checks a relay against the source cloud's chain and the source domain's
/// reputation ledger.
pub fn relay(
    msg: &RelayMessage,
    source_chain: &Chain,
    source_ledger: &ReputationLedger,
    target_domain: DomainId,
) -> Result<(), RelayReject> {
    if msg.to.0 != target_domain {
        return Err(RelayReject::Malformed);
    }
    if msg.from.0 == target_domain {
        return Err(RelayReject::SameDomain);
    }
    if msg.source_tx.id_from != msg.from.1
        || parse_relay(RELAY_MARKER, &msg.source_tx.add) != Some((msg.to, msg.payload.clone()))
    {
        return Err(RelayReject::Malformed);
    }
    if !spv_verify(&msg.anchor, &msg.source_tx, &msg.proof) {
        return Err(RelayReject::BadAnchor);
    }
    if source_chain.header_by_hash(msg.anchor.current_hash) != Some(&msg.anchor) {
        return Err(RelayReject::UnknownHeader);
    }
    if source_ledger.is_isolated(msg.from.1) {
        return Err(RelayReject::IsolatedSender);
    }
    Ok(())
}

/// A relay packaged into a global block, ready for the target cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PackagedRelay {
    pub message: RelayMessage,
    pub global_block: Hash80,
    pub global_round: u64,
}

/// Global-chain replicas of every cloud node plus the shared relay pool.
///
/// Cloud nodes are few and delivery is synchronous, so every replica appends
/// the same block in the same round.
#[derive(Debug, Clone)]
pub struct GlobalChain {
    replicas: BTreeMap<DomainId, Chain>,
    pending: Vec<RelayMessage>,
    round: u64,
}

impl GlobalChain {
    pub fn new(domains: impl IntoIterator<Item = DomainId>) -> Self {
        GlobalChain {
            replicas: domains
                .into_iter()
                .map(|d| (d, Chain::new(ChainMode::Full)))
                .collect(),
            pending: Vec::new(),
            round: 0,
        }
    }

    pub fn submit(&mut self, msg: RelayMessage) {
        self.pending.push(msg);
    }

    pub fn pending(&self) -> &[RelayMessage] {
        &self.pending
    }

    pub fn replica(&self, domain: DomainId) -> Option<&Chain> {
        self.replicas.get(&domain)
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Runs one global round: the proposer packages every pending relay into
    /// a block that all replicas append. Each packaged relay is re-encoded as
    /// an UPDATE signed by the proposer cloud, carrying the original ADD.
    pub fn run_round(
        &mut self,
        proposer: &impl Signer,
        tick: u64,
    ) -> Result<Vec<PackagedRelay>, crate::codec::CodecError> {
        let round = self.round;
        self.round += 1;
        if self.pending.is_empty() {
            return Ok(Vec::new());
        }
        let relays = std::mem::take(&mut self.pending);
        let txs: Vec<Transaction> = relays
            .iter()
            .map(|r| Transaction::signed(TxType::Update, proposer, r.to.1, r.source_tx.add))
            .collect();
        let tip = self
            .replicas
            .values()
            .next()
            .map(|c| c.tip().current_hash)
            .unwrap_or_default();
        let block = Block::assemble(tip, Timestamp24::from_tick(tick), txs, Vec::new())?.seal_with(proposer);
        let hash = block.hash();
        for chain in self.replicas.values_mut() {
            chain
                .append(block.clone())
                .expect("replicas advance in lockstep");
        }
        Ok(relays
            .into_iter()
            .map(|message| PackagedRelay {
                message,
                global_block: hash,
                global_round: round,
            })
            .collect())
    }
}

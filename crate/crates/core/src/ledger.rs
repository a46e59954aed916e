//! Per-node chain storage and block validation.
//!
//! Edge and cloud nodes keep full blocks; terminals keep headers only and
//! check inclusion with Merkle proofs. A checkpoint release moves every entry
//! before the tip into an [`Archive`] and replaces them with a single
//! [`CheckpointBlock`] carrying their summary hash, so a released chain is
//! `[checkpoint, tip]`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{
    encode_header, hash80, verify_proof, Block, BlockHeader, Hash80, MerkleProof, NodeId,
    ReputationDelta, Transaction, Verifier,
};
use crate::reputation::ReputationLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChainMode {
    Full,
    HeadersOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GenesisKind {
    Original,
    ConsensusCheckpoint,
}

/// Why a transaction or block was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Error)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    #[error("bad-signature")]
    BadSignature,
    #[error("isolated-sender")]
    IsolatedSender,
    #[error("hash-mismatch")]
    HashMismatch,
    #[error("trans-root-mismatch")]
    TransRootMismatch,
    #[error("rep-root-mismatch")]
    RepRootMismatch,
    #[error("pre-hash-mismatch")]
    PreHashMismatch,
    #[error("missing-seal")]
    MissingSeal,
    #[error("bad-seal")]
    BadSeal,
    #[error("isolated-proposer")]
    IsolatedProposer,
    #[error("wrong-proposer")]
    WrongProposer,
    #[error("round-filled")]
    RoundFilled,
    #[error("budget-exhausted")]
    BudgetExhausted,
    #[error("invalid-tx")]
    InvalidTx,
    #[error("rep-delta-mismatch")]
    RepDeltaMismatch,
}

impl RejectReason {
    pub const ALL: [RejectReason; 14] = [
        RejectReason::BadSignature,
        RejectReason::IsolatedSender,
        RejectReason::HashMismatch,
        RejectReason::TransRootMismatch,
        RejectReason::RepRootMismatch,
        RejectReason::PreHashMismatch,
        RejectReason::MissingSeal,
        RejectReason::BadSeal,
        RejectReason::IsolatedProposer,
        RejectReason::WrongProposer,
        RejectReason::RoundFilled,
        RejectReason::BudgetExhausted,
        RejectReason::InvalidTx,
        RejectReason::RepDeltaMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BadSignature => "bad-signature",
            RejectReason::IsolatedSender => "isolated-sender",
            RejectReason::HashMismatch => "hash-mismatch",
            RejectReason::TransRootMismatch => "trans-root-mismatch",
            RejectReason::RepRootMismatch => "rep-root-mismatch",
            RejectReason::PreHashMismatch => "pre-hash-mismatch",
            RejectReason::MissingSeal => "missing-seal",
            RejectReason::BadSeal => "bad-seal",
            RejectReason::IsolatedProposer => "isolated-proposer",
            RejectReason::WrongProposer => "wrong-proposer",
            RejectReason::RoundFilled => "round-filled",
            RejectReason::BudgetExhausted => "budget-exhausted",
            RejectReason::InvalidTx => "invalid-tx",
            RejectReason::RepDeltaMismatch => "rep-delta-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("block {block} does not extend tip {tip}")]
    NotChild { block: Hash80, tip: Hash80 },
    #[error("nodes disagree on the tip; release refused")]
    TipDisagreement,
    #[error("chain has nothing to release")]
    NothingToRelease,
    #[error("block {0} not found in chain")]
    UnknownBlock(Hash80),
    #[error("archive export failed: {0}")]
    Export(String),
}

/// Header hash, transaction root and reputation root against the body.
pub fn check_roots(block: &Block) -> Result<(), RejectReason> {
    if !block.header.hash_is_consistent() {
        return Err(RejectReason::HashMismatch);
    }
    if crate::codec::merkle_root(&block.transactions) != block.header.root_trans {
        return Err(RejectReason::TransRootMismatch);
    }
    if !crate::codec::reputation_root(&block.rep_deltas).is_ok_and(|r| r == block.header.root_rep) {
        return Err(RejectReason::RepRootMismatch);
    }
    Ok(())
}

/// Accepts iff the signature verifies for `id_from` and the sender is not isolated.
pub fn validate_transaction(
    tx: &Transaction,
    verifier: &impl Verifier,
    ledger: &ReputationLedger,
) -> Result<(), RejectReason> {
    if !tx.verify(verifier) {
        return Err(RejectReason::BadSignature);
    }
    if ledger.is_isolated(tx.id_from) {
        return Err(RejectReason::IsolatedSender);
    }
    Ok(())
}

/// Everything besides the chain that a block is judged against.
pub struct BlockContext<'a, V: Verifier> {
    pub verifier: &'a V,
    pub ledger: &'a ReputationLedger,
    /// The miner consensus scheduled for this round; `None` skips the check.
    pub expected_proposer: Option<NodeId>,
    /// The receiver already accepted a block for this round.
    pub round_filled: bool,
    pub proposer_exhausted: bool,
    /// Deltas the receiver recomputed for this block; `None` skips the check.
    pub expected_deltas: Option<&'a [ReputationDelta]>,
    /// The caller has already confirmed that this exact block's header hash
    /// and both roots match its body; those checks are skipped.
    pub roots_checked: bool,
}

impl<'a, V: Verifier> BlockContext<'a, V> {
    pub fn new(verifier: &'a V, ledger: &'a ReputationLedger) -> Self {
        BlockContext {
            verifier,
            ledger,
            expected_proposer: None,
            round_filled: false,
            proposer_exhausted: false,
            expected_deltas: None,
            roots_checked: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredBlock {
    Full(Block),
    Header(BlockHeader),
}

impl StoredBlock {
    pub fn header(&self) -> &BlockHeader {
        match self {
            StoredBlock::Full(b) => &b.header,
            StoredBlock::Header(h) => h,
        }
    }

    pub fn body(&self) -> Option<&Block> {
        match self {
            StoredBlock::Full(b) => Some(b),
            StoredBlock::Header(_) => None,
        }
    }
}

/// Handle to one release in an archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ArchiveRef(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckpointBlock {
    pub summary_hash: Hash80,
    pub released_count: u64,
    pub archived_to: ArchiveRef,
}

const CHECKPOINT_TAG: u8 = 0xc0;

impl CheckpointBlock {
    /// `0xc0 ‖ summary_hash ‖ released_count ‖ archive ref`, integers big-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(27);
        out.push(CHECKPOINT_TAG);
        out.extend_from_slice(&self.summary_hash.0);
        out.extend_from_slice(&self.released_count.to_be_bytes());
        out.extend_from_slice(&self.archived_to.0.to_be_bytes());
        out
    }
}

/// One entry moved out of a chain by a release.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchivedEntry {
    Header(BlockHeader),
    Checkpoint(CheckpointBlock),
}

impl ArchivedEntry {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            ArchivedEntry::Header(h) => encode_header(h).as_bytes().to_vec(),
            ArchivedEntry::Checkpoint(c) => c.encode(),
        }
    }
}

/// Digest of the concatenated encodings of released entries.
pub fn summary_hash(entries: &[ArchivedEntry]) -> Hash80 {
    let mut buf = Vec::with_capacity(entries.len() * 43);
    for e in entries {
        buf.extend_from_slice(&e.encode());
    }
    hash80(&buf)
}

/// Append-only store of released entries, keyed by the height of the first
/// entry in each release.
pub trait Archive {
    fn store(&mut self, first_height: u64, entries: Vec<ArchivedEntry>) -> ArchiveRef;
    fn entries(&self, r: ArchiveRef) -> Option<&[ArchivedEntry]>;
}

#[derive(Debug, Clone, Default)]
pub struct MemoryArchive {
    releases: Vec<(u64, Vec<ArchivedEntry>)>,
}

impl MemoryArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.releases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.releases.is_empty()
    }

    /// Entries of every release by first height.
    pub fn by_height(&self) -> BTreeMap<u64, &[ArchivedEntry]> {
        self.releases.iter().map(|(h, e)| (*h, e.as_slice())).collect()
    }

    /// Mutable access for fault-injection tests.
    pub fn entries_mut(&mut self, r: ArchiveRef) -> Option<&mut Vec<ArchivedEntry>> {
        self.releases.get_mut(r.0 as usize).map(|(_, e)| e)
    }

    /// Writes `release-NNNN.hex` per release, one hex-encoded entry per line.
    pub fn export(&self, dir: &Path) -> Result<(), LedgerError> {
        let err = |e: std::io::Error| LedgerError::Export(e.to_string());
        std::fs::create_dir_all(dir).map_err(err)?;
        for (i, (_, entries)) in self.releases.iter().enumerate() {
            let mut f = std::fs::File::create(dir.join(format!("release-{i:04}.hex"))).map_err(err)?;
            for e in entries {
                writeln!(f, "{}", hex::encode(e.encode())).map_err(err)?;
            }
        }
        Ok(())
    }
}

impl Archive for MemoryArchive {
    fn store(&mut self, first_height: u64, entries: Vec<ArchivedEntry>) -> ArchiveRef {
        self.releases.push((first_height, entries));
        ArchiveRef(self.releases.len() as u64 - 1)
    }

    fn entries(&self, r: ArchiveRef) -> Option<&[ArchivedEntry]> {
        self.releases.get(r.0 as usize).map(|(_, e)| e.as_slice())
    }
}

/// Recomputes a checkpoint's summary hash from the archive.
pub fn audit(checkpoint: &CheckpointBlock, archive: &impl Archive) -> bool {
    archive.entries(checkpoint.archived_to).is_some_and(|e| {
        e.len() as u64 == checkpoint.released_count && summary_hash(e) == checkpoint.summary_hash
    })
}

/// SPV check: is `tx` committed under `header.root_trans`?
pub fn spv_verify(header: &BlockHeader, tx: &Transaction, proof: &MerkleProof) -> bool {
    verify_proof(header.root_trans, tx.leaf_hash(), proof)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForkCheck {
    /// Child of the tip.
    Extends,
    /// Same block already stored.
    Duplicate,
    /// Shares its parent with a stored block but differs from it.
    Fork,
    /// Parent unknown.
    Unrelated,
}

#[derive(Debug, Clone)]
pub struct Chain {
    mode: ChainMode,
    checkpoint: Option<CheckpointBlock>,
    blocks: Vec<StoredBlock>,
    first_height: u64,
}

impl Chain {
    pub fn new(mode: ChainMode) -> Self {
        let mut chain = Chain {
            mode,
            checkpoint: None,
            blocks: Vec::new(),
            first_height: 0,
        };
        chain.push(Block::genesis());
        chain
    }

    pub fn mode(&self) -> ChainMode {
        self.mode
    }

    pub fn genesis_kind(&self) -> GenesisKind {
        if self.checkpoint.is_some() {
            GenesisKind::ConsensusCheckpoint
        } else {
            GenesisKind::Original
        }
    }

    pub fn checkpoint(&self) -> Option<&CheckpointBlock> {
        self.checkpoint.as_ref()
    }

    pub fn blocks(&self) -> &[StoredBlock] {
        &self.blocks
    }

    /// Stored entries, counting a checkpoint as one.
    pub fn len(&self) -> usize {
        self.blocks.len() + usize::from(self.checkpoint.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tip(&self) -> &BlockHeader {
        self.blocks
            .last()
            .expect("a chain always retains its tip")
            .header()
    }

    /// Height of the tip; the original genesis is height 0.
    pub fn height(&self) -> u64 {
        self.first_height + self.blocks.len() as u64 - 1
    }

    fn push(&mut self, block: Block) {
        let stored = match self.mode {
            ChainMode::Full => StoredBlock::Full(block),
            ChainMode::HeadersOnly => StoredBlock::Header(block.header),
        };
        self.blocks.push(stored);
    }

    pub fn header_by_hash(&self, hash: Hash80) -> Option<&BlockHeader> {
        self.blocks
            .iter()
            .map(StoredBlock::header)
            .find(|h| h.current_hash == hash)
    }

    pub fn validate_block<V: Verifier>(
        &self,
        block: &Block,
        ctx: &BlockContext<'_, V>,
    ) -> Result<(), RejectReason> {
        self.validate_block_on(block, self.tip().current_hash, ctx)
    }

    /// Validates `block` as a child of `parent` instead of the tip. Used to
    /// decide whether a sibling of a stored block is a genuine fork.
    pub fn validate_block_on<V: Verifier>(
        &self,
        block: &Block,
        parent: Hash80,
        ctx: &BlockContext<'_, V>,
    ) -> Result<(), RejectReason> {
        if !ctx.roots_checked {
            check_roots(block)?;
        }
        if block.header.pre_hash != parent || self.header_by_hash(parent).is_none() {
            return Err(RejectReason::PreHashMismatch);
        }
        let seal = block.seal.ok_or(RejectReason::MissingSeal)?;
        if !ctx
            .verifier
            .verify(seal.proposer, &block.header.current_hash.0, &seal.signature)
        {
            return Err(RejectReason::BadSeal);
        }
        if ctx.ledger.is_isolated(seal.proposer) {
            return Err(RejectReason::IsolatedProposer);
        }
        if ctx.expected_proposer.is_some_and(|p| p != seal.proposer) {
            return Err(RejectReason::WrongProposer);
        }
        if ctx.round_filled {
            return Err(RejectReason::RoundFilled);
        }
        if ctx.proposer_exhausted {
            return Err(RejectReason::BudgetExhausted);
        }
        if block
            .transactions
            .iter()
            .any(|tx| validate_transaction(tx, ctx.verifier, ctx.ledger).is_err())
        {
            return Err(RejectReason::InvalidTx);
        }
        if let Some(expected) = ctx.expected_deltas {
            let same = expected.len() == block.rep_deltas.len()
                && expected.iter().zip(&block.rep_deltas).all(|(a, b)| {
                    a.node == b.node && a.new_score.to_bits() == b.new_score.to_bits()
                });
            if !same {
                return Err(RejectReason::RepDeltaMismatch);
            }
        }
        Ok(())
    }

    /// Appends a validated block. Headers-only chains keep just the header.
    pub fn append(&mut self, block: Block) -> Result<(), LedgerError> {
        let tip = self.tip().current_hash;
        if block.header.pre_hash != tip {
            return Err(LedgerError::NotChild {
                block: block.hash(),
                tip,
            });
        }
        self.push(block);
        Ok(())
    }

    pub fn detect_fork(&self, incoming: &BlockHeader) -> ForkCheck {
        let mut sibling = false;
        for stored in &self.blocks {
            let h = stored.header();
            if h.current_hash == incoming.current_hash {
                return ForkCheck::Duplicate;
            }
            if h.pre_hash == incoming.pre_hash {
                sibling = true;
            }
        }
        if sibling {
            ForkCheck::Fork
        } else if incoming.pre_hash == self.tip().current_hash {
            ForkCheck::Extends
        } else {
            ForkCheck::Unrelated
        }
    }

    /// Removes every block after `hash` and returns the full bodies removed,
    /// oldest first (headers-only entries have no body to return).
    pub fn rollback_to(&mut self, hash: Hash80) -> Result<Vec<Block>, LedgerError> {
        let pos = self
            .blocks
            .iter()
            .position(|b| b.header().current_hash == hash)
            .ok_or(LedgerError::UnknownBlock(hash))?;
        Ok(self
            .blocks
            .drain(pos + 1..)
            .filter_map(|b| match b {
                StoredBlock::Full(b) => Some(b),
                StoredBlock::Header(_) => None,
            })
            .collect())
    }

    /// Entries a release would archive: everything before the tip.
    pub fn releasable(&self) -> Vec<ArchivedEntry> {
        let mut out: Vec<ArchivedEntry> = self.checkpoint.iter().map(|c| ArchivedEntry::Checkpoint(*c)).collect();
        out.extend(
            self.blocks[..self.blocks.len() - 1]
                .iter()
                .map(|b| ArchivedEntry::Header(*b.header())),
        );
        out
    }

    /// Replaces everything before the tip with `checkpoint`.
    pub fn install_checkpoint(&mut self, checkpoint: CheckpointBlock) {
        let tip = self.blocks.pop().expect("a chain always retains its tip");
        self.first_height = self.height() + 1;
        self.blocks = vec![tip];
        self.checkpoint = Some(checkpoint);
    }

    pub fn checkpoint_release(&mut self, archive: &mut impl Archive) -> Result<CheckpointBlock, LedgerError> {
        let entries = self.releasable();
        if entries.is_empty() {
            return Err(LedgerError::NothingToRelease);
        }
        let checkpoint = CheckpointBlock {
            summary_hash: summary_hash(&entries),
            released_count: entries.len() as u64,
            archived_to: archive.store(self.first_height, entries),
        };
        self.install_checkpoint(checkpoint);
        Ok(checkpoint)
    }

    /// Copy of `source` in the given storage mode, for a node rejoining the network.
    pub fn resynced(source: &Chain, mode: ChainMode) -> Chain {
        let blocks = source
            .blocks
            .iter()
            .map(|b| match (mode, b) {
                (ChainMode::HeadersOnly, _) => StoredBlock::Header(*b.header()),
                (ChainMode::Full, b) => b.clone(),
            })
            .collect();
        Chain {
            mode,
            checkpoint: source.checkpoint,
            blocks,
            first_height: source.first_height,
        }
    }

    /// Recomputes every stored hash and, in full mode, both roots.
    pub fn verify_integrity(&self) -> bool {
        let headers_ok = self.blocks.iter().all(|b| b.header().hash_is_consistent());
        let links_ok = self
            .blocks
            .windows(2)
            .all(|w| w[1].header().pre_hash == w[0].header().current_hash);
        let bodies_ok = self
            .blocks
            .iter()
            .filter_map(StoredBlock::body)
            .all(Block::roots_match_body);
        headers_ok && links_ok && bodies_ok
    }
}

/// Releases every chain at once. All chains must share the same tip; the
/// archive receives one copy of the released entries.
pub fn release_agreed(chains: &mut [&mut Chain], archive: &mut impl Archive) -> Result<CheckpointBlock, LedgerError> {
    let (first, rest) = chains.split_first_mut().ok_or(LedgerError::NothingToRelease)?;
    let tip = first.tip().current_hash;
    if rest.iter().any(|c| c.tip().current_hash != tip) {
        return Err(LedgerError::TipDisagreement);
    }
    let checkpoint = first.checkpoint_release(archive)?;
    for c in rest.iter_mut() {
        c.install_checkpoint(checkpoint);
    }
    Ok(checkpoint)
}

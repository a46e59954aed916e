//! Two-layer lightweight blockchain for cross-domain IoT communication.
//!
//! Each domain (one cloud server with its edge and terminal devices) runs a
//! sub-chain whose miners are chosen by a reputation-driven consensus; cloud
//! servers additionally run a global chain that relays anchored messages
//! between domains.
//!
//! Modules, bottom up:
//!
//! - [`codec`]: bit-exact block and transaction layouts, 80-bit hashing,
//!   transaction Merkle tree and reputation trie, pluggable signatures.
//! - [`reputation`]: pairwise scoring, trimming and reputation-weighted fusion.
//! - [`consensus`]: the epoch state machine switching between committee
//!   rotation and random miner selection, with halving and isolation.
//! - [`ledger`]: per-node chain storage, block validation, fork detection,
//!   checkpoint release and SPV proofs.
//! - [`globalchain`]: stake-weighted proposer selection and relay checks.
//! - [`netsim`]: deterministic discrete-event simulator with adversaries.
//! - [`cli`]: scenario files and the `run` / `figure1` / `validate` commands.

pub mod cli;
pub mod codec;
pub mod consensus;
pub mod globalchain;
pub mod ledger;
pub mod netsim;
pub mod reputation;

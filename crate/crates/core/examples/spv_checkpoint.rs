//! A terminal keeps headers only and checks inclusion with a Merkle proof;
//! a full node releases its history into an archive and keeps validating.
//!
//! cargo run --example spv_checkpoint

use lwchain::codec::{merkle_proof, Block, KeyPair, KeyRegistry, Payload, Signer, Timestamp24, Transaction, TxType};
use lwchain::ledger::{audit, spv_verify, BlockContext, Chain, ChainMode, MemoryArchive};
use lwchain::reputation::ReputationLedger;

fn main() {
    let miner = KeyPair::from_label("edge-spv");
    let sensor = KeyPair::from_label("term-spv");
    let mut registry = KeyRegistry::new();
    let mut ledger = ReputationLedger::new();
    for k in [&miner, &sensor] {
        registry.register(k.clone()).unwrap();
        ledger.admit_node(k.node_id()).unwrap();
    }
    let ctx = BlockContext::new(&registry, &ledger);

    let mut full = Chain::new(ChainMode::Full);
    let mut light = Chain::new(ChainMode::HeadersOnly);
    let mut last_txs = Vec::new();
    for i in 1..=40u64 {
        let txs: Vec<Transaction> = (0..3u64)
            .map(|j| {
                let note = (i * 10 + j).to_be_bytes();
                Transaction::signed(TxType::Update, &sensor, miner.node_id(), Payload::from_slice(&note).unwrap())
            })
            .collect();
        let block = Block::assemble(full.tip().current_hash, Timestamp24::from_tick(i), txs.clone(), Vec::new())
            .unwrap()
            .seal_with(&miner);
        full.validate_block(&block, &ctx).unwrap();
        full.append(block.clone()).unwrap();
        light.append(block).unwrap();
        last_txs = txs;
    }
    println!("full chain: {} blocks, light chain: {} headers", full.len(), light.len());

    let proof = merkle_proof(&last_txs, 1).unwrap();
    println!("SPV check of a tx in the tip block: {}", spv_verify(light.tip(), &last_txs[1], &proof));

    let mut archive = MemoryArchive::new();
    let checkpoint = full.checkpoint_release(&mut archive).unwrap();
    println!(
        "released {} entries into archive {:?}; chain now holds {} entries",
        checkpoint.released_count,
        checkpoint.archived_to,
        full.len()
    );
    println!("archive audit: {}", audit(&checkpoint, &archive));

    let next = Block::assemble(full.tip().current_hash, Timestamp24::from_tick(41), Vec::new(), Vec::new())
        .unwrap()
        .seal_with(&miner);
    println!("next block after release validates: {:?}", full.validate_block(&next, &ctx));
}

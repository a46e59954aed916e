//! Encode a signed transaction and a block header to their exact wire size,
//! decode them back, and print the Merkle root of a small batch.
//!
//! cargo run --example wire_codec

use lwchain::codec::{
    decode_header, decode_transaction, encode_header, encode_transaction, merkle_proof,
    verify_proof, Block, KeyPair, Payload, Signer, Timestamp24, Transaction, TxType,
};

fn main() {
    let sensor = KeyPair::from_label("term-demo");
    let gateway = KeyPair::from_label("edge-demo");

    let txs: Vec<Transaction> = (0..5u8)
        .map(|i| {
            let note = format!("temperature reading #{i}");
            Transaction::signed(
                TxType::Update,
                &sensor,
                gateway.node_id(),
                Payload::from_slice(note.as_bytes()).unwrap(),
            )
        })
        .collect();

    let bits = encode_transaction(&txs[0]);
    println!("transaction: {} bits, {} bytes on the wire", bits.len(), bits.as_bytes().len());
    assert_eq!(decode_transaction(&bits).unwrap(), txs[0]);

    let genesis = Block::genesis();
    let block = Block::assemble(genesis.hash(), Timestamp24::from_tick(1), txs.clone(), Vec::new())
        .unwrap()
        .seal_with(&gateway);
    let header_bits = encode_header(&block.header);
    println!("header:      {} bits: {}", header_bits.len(), header_bits.to_hex());
    assert_eq!(decode_header(&header_bits).unwrap(), block.header);

    println!("current hash {}", block.hash());
    println!("trans root   {}", block.header.root_trans);

    let proof = merkle_proof(&txs, 3).unwrap();
    let ok = verify_proof(block.header.root_trans, txs[3].leaf_hash(), &proof);
    println!("inclusion proof for tx 3 ({} siblings): {}", proof.siblings.len(), ok);
}

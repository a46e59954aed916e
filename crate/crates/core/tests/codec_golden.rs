use lwchain::codec::{
    decode_header, decode_transaction, encode_header, encode_transaction, hash80, merkle_root,
    reputation_root, BitString, BlockHeader, Hash80, KeyPair, NodeId, Payload, ReputationDelta,
    Signature, Signer, Timestamp24, Transaction, TxType, HEADER_BITS, TRANSACTION_BITS,
};
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixtures {
    empty_hash: String,
    transactions: Vec<TxCase>,
    merkle_roots: Vec<RootCase>,
    headers: Vec<HeaderCase>,
    reputation_roots: Vec<TrieCase>,
    node_ids: Vec<IdCase>,
}

#[derive(Deserialize)]
struct TxCase {
    tag: u8,
    from: u8,
    target: u8,
    sig: String,
    add: String,
    encoding: String,
    leaf: String,
}

#[derive(Deserialize)]
struct RootCase {
    count: usize,
    root: String,
}

#[derive(Deserialize)]
struct HeaderCase {
    pre_hash: String,
    tmp: u32,
    root_rep: String,
    root_trans: String,
    current_hash: String,
    encoding: String,
}

#[derive(Deserialize)]
struct TrieCase {
    deltas: Vec<(u8, f64)>,
    root: String,
}

#[derive(Deserialize)]
struct IdCase {
    label: String,
    id: u8,
}

fn fixtures() -> Fixtures {
    serde_json::from_str(include_str!("fixtures/codec.json")).unwrap()
}

fn h(s: &str) -> Hash80 {
    Hash80::from_hex(s).unwrap()
}

fn tx(c: &TxCase) -> Transaction {
    Transaction {
        tx_type: TxType::from_tag(c.tag).unwrap(),
        id_from: NodeId(c.from),
        id_target: NodeId(c.target),
        sig: Signature(hex::decode(&c.sig).unwrap().try_into().unwrap()),
        add: Payload::from_slice(&hex::decode(&c.add).unwrap()).unwrap(),
    }
}

#[test]
fn empty_digest() {
    assert_eq!(hash80(b"").to_hex(), fixtures().empty_hash);
}

#[test]
fn transaction_encodings_match_reference() {
    for c in &fixtures().transactions {
        let t = tx(c);
        let bits = encode_transaction(&t);
        assert_eq!(bits.len(), TRANSACTION_BITS);
        assert_eq!(bits.to_hex(), c.encoding);
        assert_eq!(t.leaf_hash().to_hex(), c.leaf);
        let back = decode_transaction(&BitString::from_hex(&c.encoding, TRANSACTION_BITS).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}

#[test]
fn merkle_roots_match_reference() {
    let f = fixtures();
    let txs: Vec<Transaction> = f.transactions.iter().map(tx).collect();
    for c in &f.merkle_roots {
        assert_eq!(merkle_root(&txs[..c.count]).to_hex(), c.root, "{} leaves", c.count);
    }
}

#[test]
fn header_encodings_match_reference() {
    for c in &fixtures().headers {
        let hdr = BlockHeader::sealed(
            h(&c.pre_hash),
            Timestamp24::new(c.tmp).unwrap(),
            h(&c.root_rep),
            h(&c.root_trans),
        );
        assert_eq!(hdr.current_hash.to_hex(), c.current_hash);
        let bits = encode_header(&hdr);
        assert_eq!(bits.len(), HEADER_BITS);
        assert_eq!(bits.to_hex(), c.encoding);
        assert_eq!(decode_header(&bits).unwrap(), hdr);
    }
}

#[test]
fn reputation_roots_match_reference() {
    for c in &fixtures().reputation_roots {
        let deltas: Vec<ReputationDelta> = c
            .deltas
            .iter()
            .map(|&(node, new_score)| ReputationDelta {
                node: NodeId(node),
                new_score,
            })
            .collect();
        assert_eq!(reputation_root(&deltas).unwrap().to_hex(), c.root, "{} deltas", deltas.len());
    }
}

#[test]
fn node_ids_match_reference() {
    for c in &fixtures().node_ids {
        assert_eq!(KeyPair::from_label(&c.label).node_id(), NodeId(c.id), "{}", c.label);
    }
}

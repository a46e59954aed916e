//! Binary Merkle tree over transaction leaves.
//!
//! Leaves are `hash80(encode_transaction(tx))`. Interior nodes hash the
//! concatenation of their children; a level with an odd number of nodes pairs
//! its last node with itself. A single leaf is its own root and the empty list
//! hashes to `hash80("")`.

use super::{CodecError, Hash80, Hasher80, Keccak80, Transaction};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleProof {
    pub index: usize,
    pub siblings: Vec<Hash80>,
}

pub fn merkle_root(txs: &[Transaction]) -> Hash80 {
    let leaves: Vec<Hash80> = txs.iter().map(Transaction::leaf_hash).collect();
    merkle_root_from_leaves(&Keccak80, &leaves)
}

pub fn merkle_root_from_leaves(h: &impl Hasher80, leaves: &[Hash80]) -> Hash80 {
    if leaves.is_empty() {
        return h.hash80(&[]);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(h, &level);
    }
    level[0]
}

fn next_level(h: &impl Hasher80, level: &[Hash80]) -> Vec<Hash80> {
    level
        .chunks(2)
        .map(|pair| {
            let left = pair[0];
            let right = *pair.get(1).unwrap_or(&left);
            h.hash80_concat(&[&left.0, &right.0])
        })
        .collect()
}

pub fn merkle_proof(txs: &[Transaction], index: usize) -> Result<MerkleProof, CodecError> {
    let leaves: Vec<Hash80> = txs.iter().map(Transaction::leaf_hash).collect();
    merkle_proof_from_leaves(&Keccak80, &leaves, index)
}

pub fn merkle_proof_from_leaves(
    h: &impl Hasher80,
    leaves: &[Hash80],
    index: usize,
) -> Result<MerkleProof, CodecError> {
    if index >= leaves.len() {
        return Err(CodecError::IndexOutOfRange {
            index,
            len: leaves.len(),
        });
    }
    let mut siblings = Vec::new();
    let mut level = leaves.to_vec();
    let mut pos = index;
    while level.len() > 1 {
        let sib = pos ^ 1;
        siblings.push(*level.get(sib).unwrap_or(&level[pos]));
        level = next_level(h, &level);
        pos /= 2;
    }
    Ok(MerkleProof { index, siblings })
}

pub fn verify_proof(root: Hash80, leaf: Hash80, proof: &MerkleProof) -> bool {
    verify_proof_with(&Keccak80, root, leaf, proof)
}

pub fn verify_proof_with(h: &impl Hasher80, root: Hash80, leaf: Hash80, proof: &MerkleProof) -> bool {
    // The index must be addressable by a tree of this depth.
    if proof.siblings.len() < usize::BITS as usize && proof.index >> proof.siblings.len() != 0 {
        return false;
    }
    let mut acc = leaf;
    let mut pos = proof.index;
    for sib in &proof.siblings {
        acc = if pos & 1 == 0 {
            h.hash80_concat(&[&acc.0, &sib.0])
        } else {
            h.hash80_concat(&[&sib.0, &acc.0])
        };
        pos >>= 1;
    }
    acc == root
}

#[cfg(test)]
mod tests {
    use super::super::hash80;
    use super::*;

    fn leaves(n: usize) -> Vec<Hash80> {
        (0..n).map(|i| hash80(&[i as u8])).collect()
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(merkle_root_from_leaves(&Keccak80, &[]), hash80(b""));
        let l = leaves(1);
        assert_eq!(merkle_root_from_leaves(&Keccak80, &l), l[0]);
        let p = merkle_proof_from_leaves(&Keccak80, &l, 0).unwrap();
        assert!(p.siblings.is_empty());
        assert!(verify_proof(l[0], l[0], &p));
    }

    #[test]
    fn three_leaves_duplicate_last() {
        let l = leaves(3);
        let h = |a: Hash80, b: Hash80| hash80(&[a.0, b.0].concat());
        let expected = h(h(l[0], l[1]), h(l[2], l[2]));
        assert_eq!(merkle_root_from_leaves(&Keccak80, &l), expected);
    }

    #[test]
    fn every_proof_verifies_and_tamper_fails() {
        for n in 1..=9 {
            let l = leaves(n);
            let root = merkle_root_from_leaves(&Keccak80, &l);
            for i in 0..n {
                let p = merkle_proof_from_leaves(&Keccak80, &l, i).unwrap();
                assert!(verify_proof(root, l[i], &p), "n={n} i={i}");
                let mut bad = l[i];
                bad.0[3] ^= 0x10;
                assert!(!verify_proof(root, bad, &p));
            }
        }
    }

    #[test]
    fn out_of_range_index() {
        assert!(matches!(
            merkle_proof_from_leaves(&Keccak80, &leaves(4), 4),
            Err(CodecError::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn index_beyond_depth_rejected() {
        let l = leaves(2);
        let root = merkle_root_from_leaves(&Keccak80, &l);
        let mut p = merkle_proof_from_leaves(&Keccak80, &l, 0).unwrap();
        p.index = 2;
        assert!(!verify_proof(root, l[0], &p));
    }
}

//! Reputation tree: a two-level hexary radix trie keyed by the two nibbles
//! of a node id. Only nodes whose score changed in a block appear in it.

use std::collections::BTreeMap;

use super::{CodecError, Hash80, Hasher80, Keccak80, ReputationDelta};

const LEAF_TAG: u8 = 0x00;
const BRANCH_TAG: u8 = 0x01;

/// Leaf digest of `(node, score)`; the score is hashed as its IEEE-754 bits.
pub fn reputation_leaf(h: &impl Hasher80, delta: &ReputationDelta) -> Hash80 {
    h.hash80_concat(&[&[LEAF_TAG, delta.node.0], &delta.new_score.to_bits().to_be_bytes()])
}

pub fn reputation_root(deltas: &[ReputationDelta]) -> Result<Hash80, CodecError> {
    reputation_root_with(&Keccak80, deltas)
}

pub fn reputation_root_with(h: &impl Hasher80, deltas: &[ReputationDelta]) -> Result<Hash80, CodecError> {
    if deltas.is_empty() {
        return Ok(h.hash80(&[]));
    }
    let mut trie: BTreeMap<u8, BTreeMap<u8, Hash80>> = BTreeMap::new();
    for d in deltas {
        let slot = trie.entry(d.node.0 >> 4).or_default();
        if slot.insert(d.node.0 & 0x0f, reputation_leaf(h, d)).is_some() {
            return Err(CodecError::DuplicateNode(d.node));
        }
    }
    let upper: BTreeMap<u8, Hash80> = trie
        .into_iter()
        .map(|(hi, children)| (hi, branch(h, &children)))
        .collect();
    Ok(branch(h, &upper))
}

fn branch(h: &impl Hasher80, children: &BTreeMap<u8, Hash80>) -> Hash80 {
    let mut buf = Vec::with_capacity(1 + children.len() * 11);
    buf.push(BRANCH_TAG);
    for (nibble, child) in children {
        buf.push(*nibble);
        buf.extend_from_slice(&child.0);
    }
    h.hash80(&buf)
}

#[cfg(test)]
mod tests {
    use super::super::{hash80, NodeId};
    use super::*;

    fn d(node: u8, score: f64) -> ReputationDelta {
        ReputationDelta {
            node: NodeId(node),
            new_score: score,
        }
    }

    #[test]
    fn empty_set() {
        assert_eq!(reputation_root(&[]).unwrap(), hash80(b""));
    }

    #[test]
    fn order_independent() {
        let a = [d(0x12, 50.0), d(0x01, 75.0), d(0xff, 10.0)];
        let b = [d(0xff, 10.0), d(0x12, 50.0), d(0x01, 75.0)];
        assert_eq!(reputation_root(&a).unwrap(), reputation_root(&b).unwrap());
    }

    #[test]
    fn score_change_changes_root() {
        let a = [d(0x12, 50.0), d(0x13, 75.0)];
        let b = [d(0x12, 50.0), d(0x13, 75.5)];
        assert_ne!(reputation_root(&a).unwrap(), reputation_root(&b).unwrap());
    }

    #[test]
    fn duplicate_rejected() {
        assert_eq!(
            reputation_root(&[d(7, 1.0), d(7, 2.0)]),
            Err(CodecError::DuplicateNode(NodeId(7)))
        );
    }
}

//! Per-block broadcast cost.
//!
//! Every block a node broadcasts consumes `cost_per_block` from its budget.
//! Once the budget has dropped to `low_bound`, the node's blocks are
//! discarded before delivery. The budget is separate from the fused
//! reputation and regenerates by a configured refund.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosParams {
    #[serde(default = "DosParams::default_initial")]
    pub initial_budget: f64,
    #[serde(default = "DosParams::default_cost")]
    pub cost_per_block: f64,
    #[serde(default = "DosParams::default_low_bound")]
    pub low_bound: f64,
    /// Credited to every node each `refund_rounds` rounds; defaults to the cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refund: Option<f64>,
    /// Defaults to the executive-set size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refund_rounds: Option<u64>,
}

impl DosParams {
    fn default_initial() -> f64 {
        100.0
    }
    fn default_cost() -> f64 {
        5.0
    }
    fn default_low_bound() -> f64 {
        20.0
    }
}

impl Default for DosParams {
    fn default() -> Self {
        DosParams {
            initial_budget: Self::default_initial(),
            cost_per_block: Self::default_cost(),
            low_bound: Self::default_low_bound(),
            refund: None,
            refund_rounds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BroadcastVerdict {
    Accept,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoSBudget {
    remaining: BTreeMap<NodeId, f64>,
    initial: f64,
    cost_per_block: f64,
    low_bound: f64,
}

impl DoSBudget {
    pub fn new(initial: f64, cost_per_block: f64, low_bound: f64, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        DoSBudget {
            remaining: nodes.into_iter().map(|n| (n, initial)).collect(),
            initial,
            cost_per_block,
            low_bound,
        }
    }

    pub fn remaining(&self, node: NodeId) -> Option<f64> {
        self.remaining.get(&node).copied()
    }

    pub fn is_exhausted(&self, node: NodeId) -> bool {
        self.remaining(node).is_none_or(|r| r <= self.low_bound)
    }

    /// Credits every node, capped at the initial budget.
    pub fn refund(&mut self, amount: f64) {
        for r in self.remaining.values_mut() {
            *r = (*r + amount).min(self.initial);
        }
    }

    /// Broadcasts a budget admits before any refund.
    pub fn max_broadcasts(&self) -> u64 {
        ((self.initial - self.low_bound) / self.cost_per_block).ceil().max(0.0) as u64
    }
}

/// Charges one block broadcast. A node whose budget is already at or below
/// the low bound is refused and not charged.
pub fn charge_block_broadcast(budget: &mut DoSBudget, node: NodeId) -> BroadcastVerdict {
    if budget.is_exhausted(node) {
        return BroadcastVerdict::Discard;
    }
    let cost = budget.cost_per_block;
    if let Some(r) = budget.remaining.get_mut(&node) {
        *r -= cost;
    }
    BroadcastVerdict::Accept
}

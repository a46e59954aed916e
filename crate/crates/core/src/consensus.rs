//! Sub-chain miner selection.
//!
//! Two strategies are mixed:
//!
//! - **Strategy 2** (steady state): the top `n` nodes by reputation form the
//!   candidate set `S`; the top `k` online members of `S` form the executive
//!   set `E`, whose members mine in turn. Each completed pass over `E`
//!   increments the election counter `β1` and re-selects `E`.
//! - **Strategy 1** (fallback): a random online node mines each round, with
//!   edge and cloud nodes weighted by `edge_preference`.
//!
//! An epoch runs Strategy 2 for `T1 + 1` rotations (`β1 = 0..=T1`) while the
//! timer `β2` measures elapsed ticks. If the epoch took longer than `T2`,
//! every reputation is halved and the domain falls back to Strategy 1. Once
//! the fallback has run longer than `T3`, every node below `T4` is isolated
//! and a fresh epoch starts. An epoch that finishes within `T2` simply clears
//! the counters and starts over.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::NodeId;
use crate::reputation::{ReputationLedger, Tick};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("no online, non-isolated node is eligible to mine")]
    NoEligibleMiner,
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("executive set is empty")]
    EmptyExecutiveSet,
    #[error("invalid consensus parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Terminal,
    Edge,
    Cloud,
}

fn default_edge_preference() -> f64 {
    3.0
}

/// Thresholds and committee sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusParams {
    /// T1: Strategy-2 rotations per epoch are `T1 + 1`.
    #[serde(rename = "T1")]
    pub counting_threshold: u32,
    /// T2: epoch duration (ticks) above which the epoch counts as overrun.
    #[serde(rename = "T2")]
    pub epoch_duration: u64,
    /// T3: fallback duration (ticks) before isolation.
    #[serde(rename = "T3")]
    pub fallback_duration: u64,
    /// T4: isolation threshold (reputation units, strict `<`).
    #[serde(rename = "T4")]
    pub isolation_threshold: f64,
    #[serde(rename = "n_candidates")]
    pub candidates: usize,
    #[serde(rename = "k_exec")]
    pub executives: usize,
    #[serde(default = "default_edge_preference")]
    pub edge_preference: f64,
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        let bad = |field, reason: &str| {
            Err(ConsensusError::InvalidParam {
                field,
                reason: reason.to_string(),
            })
        };
        if self.counting_threshold < 1 {
            return bad("T1", "must be at least 1");
        }
        if self.epoch_duration == 0 {
            return bad("T2", "must be positive");
        }
        if self.fallback_duration == 0 {
            return bad("T3", "must be positive");
        }
        if !(0.0..=100.0).contains(&self.isolation_threshold) {
            return bad("T4", "must lie in [0, 100]");
        }
        if self.executives < 1 {
            return bad("k_exec", "must be at least 1");
        }
        if self.executives > self.candidates {
            return bad("k_exec", "must not exceed n_candidates");
        }
        if !(self.edge_preference > 0.0 && self.edge_preference.is_finite()) {
            return bad("edge_preference", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Strategy2Epoch,
    Strategy1Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    S1,
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerDecision {
    pub miner: NodeId,
    pub strategy_used: Strategy,
    pub round: u64,
}

/// State transitions reported by [`ConsensusState::tick`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConsensusAction {
    EpochStarted,
    Elected {
        candidates: Vec<NodeId>,
        executives: Vec<NodeId>,
    },
    ExecutivesReelected {
        executives: Vec<NodeId>,
    },
    RotationCompleted {
        beta1: u32,
    },
    /// The epoch finished within T2; counters cleared.
    EpochCompleted {
        beta2: u64,
    },
    Halved {
        beta2: u64,
    },
    FallbackStarted,
    Isolated {
        nodes: Vec<NodeId>,
    },
    FallbackEnded {
        beta2: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub decision: MinerDecision,
    pub actions: Vec<ConsensusAction>,
}

/// Draws one miner, weighting edge and cloud nodes by `edge_preference` and
/// terminals by 1. Isolated nodes are excluded.
pub fn strategy1_pick(
    online: &[(NodeId, Role)],
    isolated: &BTreeSet<NodeId>,
    edge_preference: f64,
    rng: &mut impl Rng,
) -> Result<NodeId, ConsensusError> {
    let mut pool: Vec<(NodeId, f64)> = online
        .iter()
        .filter(|(id, _)| !isolated.contains(id))
        .map(|(id, role)| {
            let w = match role {
                Role::Terminal => 1.0,
                Role::Edge | Role::Cloud => edge_preference,
            };
            (*id, w)
        })
        .collect();
    pool.sort_by_key(|(id, _)| *id);
    pool.dedup_by_key(|(id, _)| *id);
    let total: f64 = pool.iter().map(|(_, w)| w).sum();
    if pool.is_empty() || total <= 0.0 {
        return Err(ConsensusError::NoEligibleMiner);
    }
    let mut draw = rng.random::<f64>() * total;
    for (id, w) in &pool {
        if draw < *w {
            return Ok(*id);
        }
        draw -= w;
    }
    Ok(pool[pool.len() - 1].0)
}

/// Active nodes ranked by reputation, descending, ties by ascending id.
fn ranked(ledger: &ReputationLedger, among: impl Iterator<Item = NodeId>) -> Vec<NodeId> {
    let mut nodes: Vec<(NodeId, f64)> = among
        .filter(|n| ledger.is_active(*n))
        .filter_map(|n| ledger.score(n).map(|s| (n, s)))
        .collect();
    nodes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    nodes.into_iter().map(|(n, _)| n).collect()
}

/// Picks `E`: the first `k` online members of `candidates` after re-ranking
/// them by current reputation.
pub fn select_executives(
    candidates: &[NodeId],
    ledger: &ReputationLedger,
    online: &BTreeSet<NodeId>,
    k: usize,
) -> Vec<NodeId> {
    ranked(ledger, candidates.iter().copied())
        .into_iter()
        .filter(|n| online.contains(n))
        .take(k)
        .collect()
}

/// Elects `(S, E)` from the current reputations.
pub fn strategy2_elect(
    ledger: &ReputationLedger,
    online: &BTreeSet<NodeId>,
    params: &ConsensusParams,
) -> Result<(Vec<NodeId>, Vec<NodeId>), ConsensusError> {
    let mut s = ranked(ledger, ledger.scores().keys().copied());
    s.truncate(params.candidates);
    if s.is_empty() {
        return Err(ConsensusError::EmptyCandidateSet);
    }
    let e = select_executives(&s, ledger, online, params.executives);
    Ok((s, e))
}

/// Isolates every node scoring strictly below `threshold`; returns the full
/// isolated set afterwards.
pub fn isolate(ledger: &mut ReputationLedger, threshold: f64) -> BTreeSet<NodeId> {
    ledger.isolate_below(threshold);
    ledger.isolated().clone()
}

#[derive(Debug, Clone)]
pub struct ConsensusState {
    beta1: u32,
    beta2: u64,
    timer_start: Option<Tick>,
    phase: Phase,
    candidates: Vec<NodeId>,
    executives: Vec<NodeId>,
    next_in_e: usize,
    elect_candidates: bool,
    elect_executives: bool,
    round: u64,
    rng: ChaCha8Rng,
}

impl ConsensusState {
    pub fn new(seed: u64) -> Self {
        ConsensusState {
            beta1: 0,
            beta2: 0,
            timer_start: None,
            phase: Phase::Strategy2Epoch,
            candidates: Vec::new(),
            executives: Vec::new(),
            next_in_e: 0,
            elect_candidates: true,
            elect_executives: true,
            round: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn beta1(&self) -> u32 {
        self.beta1
    }

    /// Elapsed ticks recorded at the last timer stop (or clear).
    pub fn beta2(&self) -> u64 {
        self.beta2
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn candidates(&self) -> &[NodeId] {
        &self.candidates
    }

    pub fn executives(&self) -> &[NodeId] {
        &self.executives
    }

    pub fn next_in_e(&self) -> usize {
        self.next_in_e
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Installs `(S, E)` directly and resets the rotation.
    pub fn install_committee(&mut self, candidates: Vec<NodeId>, executives: Vec<NodeId>) {
        self.candidates = candidates;
        self.executives = executives;
        self.next_in_e = 0;
        self.elect_candidates = false;
        self.elect_executives = false;
    }

    /// Returns the scheduled executive and advances the rotation.
    ///
    /// The boolean is true when this call completed a pass over `E`: `β1` has
    /// been incremented and `E` must be re-elected before the next call.
    pub fn next_miner(&mut self) -> Result<(MinerDecision, bool), ConsensusError> {
        if self.executives.is_empty() {
            return Err(ConsensusError::EmptyExecutiveSet);
        }
        let miner = self.executives[self.next_in_e];
        self.next_in_e = (self.next_in_e + 1) % self.executives.len();
        let wrapped = self.next_in_e == 0;
        if wrapped {
            self.beta1 += 1;
            self.elect_executives = true;
        }
        let d = MinerDecision {
            miner,
            strategy_used: Strategy::S2,
            round: self.round,
        };
        self.round += 1;
        Ok((d, wrapped))
    }

    /// A bifurcated ledger invalidates the committee: `S` and `E` are
    /// re-elected on the next tick.
    pub fn on_fork_detected(&mut self) {
        self.candidates.clear();
        self.executives.clear();
        self.next_in_e = 0;
        self.elect_candidates = true;
        self.elect_executives = true;
    }

    fn restart_timer(&mut self, now: Tick) {
        self.timer_start = Some(now);
    }

    fn elapsed(&self, now: Tick) -> u64 {
        self.timer_start.map_or(0, |s| now.saturating_sub(s))
    }

    /// Advances the state machine at the start of a round and decides its
    /// miner. Halving and isolation are applied to `ledger` directly.
    pub fn tick(
        &mut self,
        params: &ConsensusParams,
        ledger: &mut ReputationLedger,
        online: &[(NodeId, Role)],
        now: Tick,
    ) -> Result<TickOutcome, ConsensusError> {
        let mut actions = Vec::new();
        if self.timer_start.is_none() {
            self.restart_timer(now);
            actions.push(ConsensusAction::EpochStarted);
        }

        if self.phase == Phase::Strategy2Epoch && self.beta1 > params.counting_threshold {
            self.beta2 = self.elapsed(now);
            if self.beta2 > params.epoch_duration {
                ledger.halve_all();
                actions.push(ConsensusAction::Halved { beta2: self.beta2 });
                self.beta2 = 0;
                self.restart_timer(now);
                self.phase = Phase::Strategy1Fallback;
                actions.push(ConsensusAction::FallbackStarted);
            } else {
                actions.push(ConsensusAction::EpochCompleted { beta2: self.beta2 });
                self.start_epoch(now, &mut actions);
            }
        }

        if self.phase == Phase::Strategy1Fallback {
            let elapsed = self.elapsed(now);
            if elapsed > params.fallback_duration {
                self.beta2 = elapsed;
                let newly = ledger.isolate_below(params.isolation_threshold);
                actions.push(ConsensusAction::Isolated {
                    nodes: newly.into_iter().collect(),
                });
                actions.push(ConsensusAction::FallbackEnded { beta2: elapsed });
                self.phase = Phase::Strategy2Epoch;
                self.start_epoch(now, &mut actions);
            }
        }

        let decision = match self.phase {
            Phase::Strategy1Fallback => self.strategy1_decision(params, ledger, online)?,
            Phase::Strategy2Epoch => self.strategy2_decision(params, ledger, online, &mut actions)?,
        };
        Ok(TickOutcome { decision, actions })
    }

    fn start_epoch(&mut self, now: Tick, actions: &mut Vec<ConsensusAction>) {
        self.beta1 = 0;
        self.beta2 = 0;
        self.restart_timer(now);
        self.elect_candidates = true;
        self.elect_executives = true;
        self.next_in_e = 0;
        actions.push(ConsensusAction::EpochStarted);
    }

    fn strategy1_decision(
        &mut self,
        params: &ConsensusParams,
        ledger: &ReputationLedger,
        online: &[(NodeId, Role)],
    ) -> Result<MinerDecision, ConsensusError> {
        let eligible: Vec<(NodeId, Role)> = online
            .iter()
            .copied()
            .filter(|(n, _)| ledger.is_active(*n))
            .collect();
        let miner = strategy1_pick(&eligible, ledger.isolated(), params.edge_preference, &mut self.rng)?;
        let d = MinerDecision {
            miner,
            strategy_used: Strategy::S1,
            round: self.round,
        };
        self.round += 1;
        Ok(d)
    }

    fn strategy2_decision(
        &mut self,
        params: &ConsensusParams,
        ledger: &mut ReputationLedger,
        online: &[(NodeId, Role)],
        actions: &mut Vec<ConsensusAction>,
    ) -> Result<MinerDecision, ConsensusError> {
        let online_set: BTreeSet<NodeId> = online.iter().map(|(n, _)| *n).collect();
        if self.elect_candidates {
            let (s, e) = strategy2_elect(ledger, &online_set, params)?;
            actions.push(ConsensusAction::Elected {
                candidates: s.clone(),
                executives: e.clone(),
            });
            self.install_committee(s, e);
        } else if self.elect_executives
            || self.executives.get(self.next_in_e).is_some_and(|m| ledger.is_isolated(*m))
        {
            self.candidates.retain(|n| !ledger.is_isolated(*n));
            self.executives =
                select_executives(&self.candidates, ledger, &online_set, params.executives);
            self.next_in_e = 0;
            self.elect_executives = false;
            actions.push(ConsensusAction::ExecutivesReelected {
                executives: self.executives.clone(),
            });
        }

        if self.executives.is_empty() {
            // No candidate is online: this round falls back to a random miner
            // and counts as a (trivially) completed rotation.
            let d = self.strategy1_decision(params, ledger, online)?;
            self.beta1 += 1;
            self.elect_executives = true;
            actions.push(ConsensusAction::RotationCompleted { beta1: self.beta1 });
            return Ok(d);
        }

        let (d, wrapped) = self.next_miner()?;
        if wrapped {
            actions.push(ConsensusAction::RotationCompleted { beta1: self.beta1 });
        }
        Ok(d)
    }
}

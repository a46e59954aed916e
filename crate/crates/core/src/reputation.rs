//! Reputation evaluation and fusion.
//!
//! Each rater `u` keeps a history of completed interactions with a subject
//! `v`. At time `t` the pairwise score is
//!
//! ```text
//! R_uv(t) = Σ σ(t,i)·Q(v,i)·W(v,i) / Σ W(v,i),    σ(t,i) = 1 / (t − t(i))
//! ```
//!
//! over the records completed before `t`. The subject's fused score drops one
//! maximal and one minimal rater score, then averages the rest weighted by
//! each rater's own current reputation. All scores share the 0–100 scale and
//! newly admitted nodes start at 100.
//!
//! Note that σ only appears in the numerator, so a fixed history decays
//! toward zero as it ages, even when every interaction was perfect.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{NodeId, TxType};

pub const INITIAL_REPUTATION: f64 = 100.0;
pub const MAX_QUALITY: f64 = 100.0;

pub type Tick = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReputationError {
    #[error("record completed at tick {completed_at} is not in the past at tick {now}")]
    NotInPast { now: Tick, completed_at: Tick },
    #[error("quality {0} outside [0, 100]")]
    QualityOutOfRange(f64),
    #[error("weight {0} must be positive")]
    NonPositiveWeight(f64),
    #[error("record at tick {completed_at} precedes the latest record at tick {latest}")]
    OutOfOrder { completed_at: Tick, latest: Tick },
    #[error("node {0} is already admitted")]
    AlreadyAdmitted(NodeId),
    #[error("node {0} is isolated")]
    Isolated(NodeId),
    #[error("node {0} is not admitted")]
    UnknownNode(NodeId),
    #[error("rater {0} has no prior reputation")]
    MissingPrior(NodeId),
}

/// Timeliness coefficient `σ = 1 / (now − completed_at)`.
pub fn timeliness(now: Tick, completed_at: Tick) -> Result<f64, ReputationError> {
    if now <= completed_at {
        return Err(ReputationError::NotInPast { now, completed_at });
    }
    Ok(1.0 / (now - completed_at) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub quality: f64,
    pub weight: f64,
    pub completed_at: Tick,
}

impl TransactionRecord {
    pub fn new(quality: f64, weight: f64, completed_at: Tick) -> Result<Self, ReputationError> {
        if !(0.0..=MAX_QUALITY).contains(&quality) {
            return Err(ReputationError::QualityOutOfRange(quality));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(ReputationError::NonPositiveWeight(weight));
        }
        Ok(TransactionRecord {
            quality,
            weight,
            completed_at,
        })
    }
}

/// Interaction history of one rater about one subject, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHistory {
    pub rater: NodeId,
    pub subject: NodeId,
    records: Vec<TransactionRecord>,
}

impl PairHistory {
    pub fn new(rater: NodeId, subject: NodeId) -> Self {
        PairHistory {
            rater,
            subject,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn push(&mut self, record: TransactionRecord) -> Result<(), ReputationError> {
        if let Some(last) = self.records.last() {
            if record.completed_at < last.completed_at {
                return Err(ReputationError::OutOfOrder {
                    completed_at: record.completed_at,
                    latest: last.completed_at,
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Drops the oldest records so that at most `keep` remain.
    pub fn retain_latest(&mut self, keep: usize) {
        if self.records.len() > keep {
            self.records.drain(..self.records.len() - keep);
        }
    }

    /// `C(u,v,now)`: records completed strictly before `now`.
    pub fn count_before(&self, now: Tick) -> usize {
        self.records.partition_point(|r| r.completed_at < now)
    }
}

/// Pairwise score of the history's subject at `now`, or `None` when no record
/// precedes `now`.
pub fn pairwise_score(history: &PairHistory, now: Tick) -> Result<Option<f64>, ReputationError> {
    let counted = &history.records[..history.count_before(now)];
    if counted.is_empty() {
        return Ok(None);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for r in counted {
        num += timeliness(now, r.completed_at)? * r.quality * r.weight;
        den += r.weight;
    }
    Ok(Some(num / den))
}

/// Removes one maximal and one minimal score when at least three are given.
///
/// Ties go to the first occurrence in ascending rater order. The result is
/// sorted by rater.
pub fn trim(scores: &[(NodeId, f64)]) -> Vec<(NodeId, f64)> {
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|(rater, _)| *rater);
    if sorted.len() < 3 {
        return sorted;
    }
    let max_at = first_extreme(&sorted, |a, b| a > b);
    sorted.remove(max_at);
    let min_at = first_extreme(&sorted, |a, b| a < b);
    sorted.remove(min_at);
    sorted
}

fn first_extreme(scores: &[(NodeId, f64)], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, (_, s)) in scores.iter().enumerate().skip(1) {
        if better(*s, scores[best].1) {
            best = i;
        }
    }
    best
}

/// Reputation-weighted fusion of (already trimmed) pairwise scores.
///
/// Falls back to the unweighted mean when every prior is zero.
pub fn fuse(
    priors: &BTreeMap<NodeId, f64>,
    pairwise: &[(NodeId, f64)],
) -> Result<Option<f64>, ReputationError> {
    if pairwise.is_empty() {
        return Ok(None);
    }
    let mut weights = Vec::with_capacity(pairwise.len());
    for (rater, _) in pairwise {
        let prior = priors
            .get(rater)
            .copied()
            .ok_or(ReputationError::MissingPrior(*rater))?;
        weights.push(prior);
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        let mean = pairwise.iter().map(|(_, s)| s).sum::<f64>() / pairwise.len() as f64;
        return Ok(Some(mean));
    }
    let fused = pairwise
        .iter()
        .zip(&weights)
        .map(|((_, score), w)| w / total * score)
        .sum();
    Ok(Some(fused))
}

/// Significance coefficient per transaction type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightTable {
    pub query: f64,
    pub reply: f64,
    pub update: f64,
    pub rate: f64,
    pub assert: f64,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable {
            query: 1.0,
            reply: 1.0,
            update: 1.0,
            rate: 2.0,
            assert: 3.0,
        }
    }
}

impl WeightTable {
    pub fn weight(&self, tx_type: TxType) -> f64 {
        match tx_type {
            TxType::Query => self.query,
            TxType::Reply => self.reply,
            TxType::Update => self.update,
            TxType::Rate => self.rate,
            TxType::Assert => self.assert,
        }
    }

    /// Name of the first non-positive entry, if any.
    pub fn invalid_entry(&self) -> Option<&'static str> {
        [
            ("query", self.query),
            ("reply", self.reply),
            ("update", self.update),
            ("rate", self.rate),
            ("assert", self.assert),
        ]
        .into_iter()
        .find(|(_, w)| !(*w > 0.0 && w.is_finite()))
        .map(|(name, _)| name)
    }
}

/// Fused scores, pairwise histories and the isolation list of one domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReputationLedger {
    scores: BTreeMap<NodeId, f64>,
    // keyed by (subject, rater)
    histories: BTreeMap<(NodeId, NodeId), PairHistory>,
    isolated: BTreeSet<NodeId>,
    history_window: Option<usize>,
}

impl ReputationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps only the latest `window` records of every pair history.
    pub fn with_history_window(window: Option<usize>) -> Self {
        ReputationLedger {
            history_window: window,
            ..Self::default()
        }
    }

    pub fn admit_node(&mut self, node: NodeId) -> Result<(), ReputationError> {
        if self.isolated.contains(&node) {
            return Err(ReputationError::Isolated(node));
        }
        if self.scores.contains_key(&node) {
            return Err(ReputationError::AlreadyAdmitted(node));
        }
        self.scores.insert(node, INITIAL_REPUTATION);
        Ok(())
    }

    pub fn score(&self, node: NodeId) -> Option<f64> {
        self.scores.get(&node).copied()
    }

    pub fn scores(&self) -> &BTreeMap<NodeId, f64> {
        &self.scores
    }

    /// Overwrites a score. Used by the non-computed reputation modes and when
    /// applying committed deltas.
    pub fn set_score(&mut self, node: NodeId, score: f64) -> Result<(), ReputationError> {
        if self.isolated.contains(&node) {
            return Err(ReputationError::Isolated(node));
        }
        match self.scores.get_mut(&node) {
            Some(s) => {
                *s = score;
                Ok(())
            }
            None => Err(ReputationError::UnknownNode(node)),
        }
    }

    pub fn is_isolated(&self, node: NodeId) -> bool {
        self.isolated.contains(&node)
    }

    pub fn isolated(&self) -> &BTreeSet<NodeId> {
        &self.isolated
    }

    /// Admitted and not isolated.
    pub fn is_active(&self, node: NodeId) -> bool {
        self.scores.contains_key(&node) && !self.isolated.contains(&node)
    }

    pub fn history(&self, rater: NodeId, subject: NodeId) -> Option<&PairHistory> {
        self.histories.get(&(subject, rater))
    }

    pub fn record(
        &mut self,
        rater: NodeId,
        subject: NodeId,
        record: TransactionRecord,
    ) -> Result<(), ReputationError> {
        let window = self.history_window;
        let h = self
            .histories
            .entry((subject, rater))
            .or_insert_with(|| PairHistory::new(rater, subject));
        h.push(record)?;
        if let Some(w) = window {
            h.retain_latest(w);
        }
        Ok(())
    }

    /// Halves every non-isolated score.
    pub fn halve_all(&mut self) {
        for (node, score) in self.scores.iter_mut() {
            if !self.isolated.contains(node) {
                *score /= 2.0;
            }
        }
    }

    /// Marks every active node scoring strictly below `threshold` as isolated
    /// and returns the newly isolated ones.
    pub fn isolate_below(&mut self, threshold: f64) -> BTreeSet<NodeId> {
        let newly: BTreeSet<NodeId> = self
            .scores
            .iter()
            .filter(|(n, s)| **s < threshold && !self.isolated.contains(n))
            .map(|(n, _)| *n)
            .collect();
        self.isolated.extend(newly.iter().copied());
        newly
    }

    /// Pairwise scores of `subject` from every active rater with history.
    pub fn rater_scores(&self, now: Tick, subject: NodeId) -> Result<Vec<(NodeId, f64)>, ReputationError> {
        let mut out = Vec::new();
        let range = (subject, NodeId(0))..=(subject, NodeId(u8::MAX));
        for ((_, rater), history) in self.histories.range(range) {
            if !self.is_active(*rater) || *rater == subject {
                continue;
            }
            if let Some(s) = pairwise_score(history, now)? {
                out.push((*rater, s));
            }
        }
        Ok(out)
    }

    /// Recomputes and stores the fused score of `subject` at `now`.
    ///
    /// Returns the new score, or `None` (score unchanged) when no rater has a
    /// record about the subject yet.
    pub fn record_and_refresh(&mut self, now: Tick, subject: NodeId) -> Result<Option<f64>, ReputationError> {
        if self.isolated.contains(&subject) {
            return Err(ReputationError::Isolated(subject));
        }
        if !self.scores.contains_key(&subject) {
            return Err(ReputationError::UnknownNode(subject));
        }
        let trimmed = trim(&self.rater_scores(now, subject)?);
        let fused = fuse(&self.scores, &trimmed)?;
        if let Some(score) = fused {
            self.scores.insert(subject, score);
        }
        Ok(fused)
    }
}

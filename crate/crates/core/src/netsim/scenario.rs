//! Scenario files.
//!
//! A scenario is a TOML document; keys mirror the parameter names used in
//! the library. Parsing and validation errors carry the dotted path of the
//! offending field, for example `domains[0].consensus.T4`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dos::DosParams;
use crate::codec::{KeyPair, NodeId, Signer};
use crate::consensus::{ConsensusError, ConsensusParams, Role};
use crate::globalchain::{DomainId, RELAY_PAYLOAD_MAX};
use crate::reputation::{Tick, WeightTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// How sampled and consensus-visible reputations are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every score is fixed at the initial value.
    Constant,
    /// Every score follows a seeded random walk.
    Random,
    /// Scores come from the reputation engine.
    #[default]
    Proposed,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Constant, Mode::Random, Mode::Proposed];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Constant => "constant",
            Mode::Random => "random",
            Mode::Proposed => "proposed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    #[default]
    Honest,
    FalseInfo,
    Dropper,
    SelectiveForwarder,
    Colluder,
    Flooder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Behavior {
    Honest,
    /// Sends corrupted UPDATEs and REPLYs and rates everyone 0 from `onset` on.
    FalseInfo { onset: Tick },
    /// Sends, answers, rates and mines nothing.
    Dropper,
    /// Sends each message and mines each scheduled block with this probability.
    SelectiveForwarder { forward_fraction: f64 },
    /// Rates group members 100 and everyone else 0; lies to non-members.
    Colluder { group: u32 },
    /// Broadcasts `rate` extra self-signed blocks every tick.
    Flooder { rate: u32 },
}

impl Behavior {
    pub fn is_honest(&self) -> bool {
        matches!(self, Behavior::Honest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// Key label; the node id is derived from it.
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub behavior: BehaviorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_fraction: Option<f64>,
    /// Half-open `[from, to)` tick intervals during which the node is offline.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offline: Vec<[Tick; 2]>,
}

fn default_release_interval() -> u64 {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u8>,
    pub consensus: ConsensusParams,
    #[serde(default)]
    pub weights: WeightTable,
    #[serde(default)]
    pub dos: DosParams,
    /// Committed blocks between checkpoint releases.
    #[serde(default = "default_release_interval")]
    pub release_interval: u64,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySpec {
    pub at: Tick,
    pub from: String,
    pub to: String,
    pub payload: String,
}

fn default_sampling_interval() -> u64 {
    10
}
fn default_interaction_interval() -> u64 {
    10
}
fn default_round_timeout() -> u64 {
    3
}
fn default_history_window() -> usize {
    1
}
fn default_global_round_interval() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub horizon: Tick,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_sampling_interval")]
    pub sampling_interval: u64,
    /// Ticks between interaction rounds (UPDATE broadcast and QUERY fan-out).
    #[serde(default = "default_interaction_interval")]
    pub interaction_interval: u64,
    /// Ticks a round waits for its miner's block.
    #[serde(default = "default_round_timeout")]
    pub round_timeout: u64,
    /// Records kept per rater/subject pair; 0 keeps all.
    #[serde(default = "default_history_window")]
    pub history_window: usize,
    #[serde(default = "default_global_round_interval")]
    pub global_round_interval: u64,
    pub domains: Vec<DomainSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relays: Vec<RelaySpec>,
}

#[derive(Debug, Clone)]
pub struct ResolvedNode {
    pub name: String,
    pub id: NodeId,
    pub role: Role,
    pub behavior: Behavior,
    pub key: KeyPair,
    pub offline: Vec<[Tick; 2]>,
}

#[derive(Debug, Clone)]
pub struct ResolvedDomain {
    pub id: DomainId,
    pub params: ConsensusParams,
    pub weights: WeightTable,
    pub dos: DosParams,
    pub refund: f64,
    pub refund_rounds: u64,
    pub release_interval: u64,
    /// Sorted by node id.
    pub nodes: Vec<ResolvedNode>,
}

#[derive(Debug, Clone)]
pub struct ResolvedRelay {
    pub at: Tick,
    pub from: (DomainId, NodeId),
    pub to: (DomainId, NodeId),
    pub payload: Vec<u8>,
}

/// A validated scenario with every default applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub domains: Vec<ResolvedDomain>,
    pub relays: Vec<ResolvedRelay>,
}

impl Scenario {
    pub fn domain(&self, id: DomainId) -> Option<&ResolvedDomain> {
        self.domains.iter().find(|d| d.id == id)
    }

    /// Nodes whose behavior is not honest.
    pub fn malicious(&self) -> Vec<(DomainId, NodeId)> {
        self.domains
            .iter()
            .flat_map(|d| {
                d.nodes
                    .iter()
                    .filter(|n| !n.behavior.is_honest())
                    .map(move |n| (d.id, n.id))
            })
            .collect()
    }

    /// Resolved configuration as TOML, defaults included.
    pub fn effective_toml(&self) -> String {
        toml::to_string(&self.config).expect("scenario serializes")
    }

    pub fn with_mode(&self, mode: Mode) -> Scenario {
        let mut s = self.clone();
        s.config.mode = mode;
        s
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::at("<document>", e.message()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().message().to_string();
            missing_field_path(&path, &message)
                .map(|p| ConfigError::at(p, message.clone()))
                .unwrap_or_else(|| ConfigError::at(path, message))
        })
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        let positive = |v: u64, path: &str| {
            if v == 0 {
                Err(ConfigError::at(path, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive(self.horizon, "horizon")?;
        positive(self.sampling_interval, "sampling_interval")?;
        positive(self.round_timeout, "round_timeout")?;
        positive(self.global_round_interval, "global_round_interval")?;
        if self.interaction_interval < 3 {
            return Err(ConfigError::at("interaction_interval", "must be at least 3"));
        }
        if self.domains.is_empty() {
            return Err(ConfigError::at("domains", "at least one domain is required"));
        }

        let mut config = self.clone();
        let mut domains = Vec::new();
        let mut names: BTreeMap<String, (DomainId, NodeId, Role)> = BTreeMap::new();
        let mut seen_domains = BTreeSet::new();
        for (di, spec) in self.domains.iter().enumerate() {
            let at = |field: &str| format!("domains[{di}].{field}");
            let id = DomainId(match spec.id {
                Some(id) => id,
                None => u8::try_from(di).map_err(|_| ConfigError::at(at("id"), "too many domains"))?,
            });
            if !seen_domains.insert(id) {
                return Err(ConfigError::at(at("id"), format!("duplicate domain id {id}")));
            }
            config.domains[di].id = Some(id.0);

            spec.consensus.validate().map_err(|e| match e {
                ConsensusError::InvalidParam { field, reason } => ConfigError::at(at(&format!("consensus.{field}")), reason),
                other => ConfigError::at(at("consensus"), other.to_string()),
            })?;
            if let Some(entry) = spec.weights.invalid_entry() {
                return Err(ConfigError::at(at(&format!("weights.{entry}")), "must be positive"));
            }
            let dos = spec.dos;
            if !(dos.cost_per_block > 0.0) {
                return Err(ConfigError::at(at("dos.cost_per_block"), "must be positive"));
            }
            if !(dos.low_bound < dos.initial_budget) {
                return Err(ConfigError::at(at("dos.low_bound"), "must be below initial_budget"));
            }
            let refund = dos.refund.unwrap_or(dos.cost_per_block);
            if !(refund >= 0.0) {
                return Err(ConfigError::at(at("dos.refund"), "must be non-negative"));
            }
            let refund_rounds = dos.refund_rounds.unwrap_or(spec.consensus.executives as u64);
            if refund_rounds == 0 {
                return Err(ConfigError::at(at("dos.refund_rounds"), "must be positive"));
            }
            config.domains[di].dos.refund = Some(refund);
            config.domains[di].dos.refund_rounds = Some(refund_rounds);
            positive(spec.release_interval, &at("release_interval"))?;

            if spec.nodes.is_empty() {
                return Err(ConfigError::at(at("nodes"), "a domain needs at least one node"));
            }
            let clouds = spec.nodes.iter().filter(|n| n.role == Role::Cloud).count();
            if clouds != 1 {
                return Err(ConfigError::at(
                    at("nodes"),
                    format!("exactly one cloud node per domain is required, found {clouds}"),
                ));
            }
            let mut ids: BTreeMap<NodeId, &str> = BTreeMap::new();
            let mut nodes = Vec::new();
            for (ni, n) in spec.nodes.iter().enumerate() {
                let nat = |field: &str| format!("domains[{di}].nodes[{ni}].{field}");
                if n.name.is_empty() {
                    return Err(ConfigError::at(nat("name"), "must not be empty"));
                }
                let key = KeyPair::from_label(&n.name);
                let nid = key.node_id();
                if let Some(prev) = names.get(&n.name) {
                    return Err(ConfigError::at(
                        nat("name"),
                        format!("duplicate node name `{}` (also in domain {})", n.name, prev.0),
                    ));
                }
                if let Some(other) = ids.get(&nid) {
                    return Err(ConfigError::at(
                        nat("name"),
                        format!("node id collision: `{}` and `{}` both map to id {nid}", other, n.name),
                    ));
                }
                ids.insert(nid, &n.name);
                names.insert(n.name.clone(), (id, nid, n.role));
                let behavior = resolve_behavior(n, &nat)?;
                for (k, w) in n.offline.iter().enumerate() {
                    if w[0] >= w[1] {
                        return Err(ConfigError::at(nat(&format!("offline[{k}]")), "interval must be [from, to) with from < to"));
                    }
                }
                nodes.push(ResolvedNode {
                    name: n.name.clone(),
                    id: nid,
                    role: n.role,
                    behavior,
                    key,
                    offline: n.offline.clone(),
                });
            }
            nodes.sort_by_key(|n| n.id);
            domains.push(ResolvedDomain {
                id,
                params: spec.consensus,
                weights: spec.weights,
                dos,
                refund,
                refund_rounds,
                release_interval: spec.release_interval,
                nodes,
            });
        }

        let mut relays = Vec::new();
        for (ri, r) in self.relays.iter().enumerate() {
            let at = |field: &str| format!("relays[{ri}].{field}");
            let from = names
                .get(&r.from)
                .ok_or_else(|| ConfigError::at(at("from"), format!("unknown node `{}`", r.from)))?;
            let to = names
                .get(&r.to)
                .ok_or_else(|| ConfigError::at(at("to"), format!("unknown node `{}`", r.to)))?;
            if from.2 == Role::Cloud {
                return Err(ConfigError::at(at("from"), "relays originate at terminal or edge nodes"));
            }
            if from.0 == to.0 {
                return Err(ConfigError::at(at("to"), "target must be in a different domain"));
            }
            if r.payload.len() > RELAY_PAYLOAD_MAX {
                return Err(ConfigError::at(at("payload"), format!("at most {RELAY_PAYLOAD_MAX} bytes")));
            }
            if r.at >= self.horizon {
                return Err(ConfigError::at(at("at"), "must be before the horizon"));
            }
            relays.push(ResolvedRelay {
                at: r.at,
                from: (from.0, from.1),
                to: (to.0, to.1),
                payload: r.payload.as_bytes().to_vec(),
            });
        }

        Ok(Scenario {
            config,
            domains,
            relays,
        })
    }
}

fn resolve_behavior(n: &NodeSpec, at: &dyn Fn(&str) -> String) -> Result<Behavior, ConfigError> {
    let only = |field: &str, present: bool, owner: &str| {
        if present {
            Err(ConfigError::at(at(field), format!("only valid for behavior `{owner}`")))
        } else {
            Ok(())
        }
    };
    let kind = n.behavior;
    if kind != BehaviorKind::FalseInfo {
        only("onset", n.onset.is_some(), "false_info")?;
    }
    if kind != BehaviorKind::Colluder {
        only("group", n.group.is_some(), "colluder")?;
    }
    if kind != BehaviorKind::Flooder {
        only("rate", n.rate.is_some(), "flooder")?;
    }
    if kind != BehaviorKind::SelectiveForwarder {
        only("forward_fraction", n.forward_fraction.is_some(), "selective_forwarder")?;
    }
    Ok(match kind {
        BehaviorKind::Honest => Behavior::Honest,
        BehaviorKind::Dropper => Behavior::Dropper,
        BehaviorKind::FalseInfo => Behavior::FalseInfo {
            onset: n.onset.unwrap_or(0),
        },
        BehaviorKind::SelectiveForwarder => {
            let f = n
                .forward_fraction
                .ok_or_else(|| ConfigError::at(at("forward_fraction"), "required for selective_forwarder"))?;
            if !(0.0..=1.0).contains(&f) {
                return Err(ConfigError::at(at("forward_fraction"), "must lie in [0, 1]"));
            }
            Behavior::SelectiveForwarder { forward_fraction: f }
        }
        BehaviorKind::Colluder => Behavior::Colluder {
            group: n
                .group
                .ok_or_else(|| ConfigError::at(at("group"), "required for colluder"))?,
        },
        BehaviorKind::Flooder => {
            let rate = n
                .rate
                .ok_or_else(|| ConfigError::at(at("rate"), "required for flooder"))?;
            if rate == 0 {
                return Err(ConfigError::at(at("rate"), "must be positive"));
            }
            Behavior::Flooder { rate }
        }
    })
}

/// serde reports a missing field at its parent; point at the field itself.
fn missing_field_path(path: &str, message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    let field = &rest[..rest.find('`')?];
    Some(if path.is_empty() || path == "." {
        field.to_string()
    } else {
        format!("{path}.{field}")
    })
}

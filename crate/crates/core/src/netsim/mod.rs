//! Deterministic discrete-event simulation of one or more domains.
//!
//! Time advances in integer ticks. Every message takes exactly one tick to
//! arrive; events at the same tick run in insertion order, so a run is a
//! pure function of `(scenario, seed)`.
//!
//! Within a tick, messages sent during the previous tick are delivered
//! first; then each domain finishes or starts its consensus round and its
//! nodes take their protocol step; then the global chain and the metrics
//! sampler run.
//!
//! Nodes interact every `interaction_interval` ticks: each node broadcasts an
//! UPDATE and sends a QUERY to every peer. Receivers rate the UPDATE on
//! arrival; queriers rate the REPLY two ticks after asking. Ratings travel as
//! RATE transactions and take effect when a block carrying them commits.
//!
//! Consensus state and reputations are shared by all nodes of a domain
//! (every honest node would compute the same values from the same chain);
//! chains, mempools and message handling are per node.

pub mod dos;
pub mod metrics;
pub mod payload;
pub mod scenario;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::codec::{
    merkle_proof, Block, Hash80, KeyPair, KeyRegistry, MemoVerifier, NodeId, Payload, ReputationDelta, Signer,
    Timestamp24, Transaction, TxType,
};
use crate::consensus::{ConsensusAction, ConsensusState, MinerDecision, Role};
use crate::globalchain::{
    parse_relay, relay, relayed_payload, relay_payload, select_proposer, CloudStake, DomainId,
    GlobalChain, PackagedRelay, RelayMessage, RELAYED_MARKER, RELAY_MARKER,
};
use crate::ledger::{
    check_roots, release_agreed, validate_transaction, BlockContext, Chain, ChainMode, ForkCheck, MemoryArchive,
};
use crate::reputation::{ReputationLedger, Tick, TransactionRecord, WeightTable, INITIAL_REPUTATION};

pub use dos::{charge_block_broadcast, BroadcastVerdict, DoSBudget, DosParams};
pub use metrics::{EventRecord, MetricsLog, Sample};
pub use scenario::{Behavior, BehaviorKind, ConfigError, Mode, Scenario, ScenarioConfig};

use payload::Rating;

/// Counters written for every domain even when zero.
pub const STANDARD_COUNTERS: [&str; 12] = [
    "blocks_committed",
    "blocks_accepted",
    "blocks_rejected",
    "txs_rejected",
    "forks",
    "unresolved_forks",
    "isolation_events",
    "chain_disagreements",
    "hygiene_violations",
    "dos_discarded",
    "relays_delivered",
    "releases",
];

#[derive(Debug, Clone)]
pub enum Message {
    Tx(Transaction),
    Block(Arc<Block>),
    Relay(Box<PackagedRelay>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MessageKind {
    Tx(TxType),
    Block,
    Relay,
}

/// One message handed to an online recipient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryRecord {
    pub tick: Tick,
    pub from: (DomainId, NodeId),
    pub to: (DomainId, NodeId),
    pub kind: MessageKind,
    pub block: Option<Hash80>,
}

/// A block or transaction that passed a receiver's validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Acceptance {
    pub tick: Tick,
    pub domain: DomainId,
    pub by: NodeId,
    /// Block proposer or transaction sender.
    pub author: NodeId,
    pub block: Option<Hash80>,
}

/// A relayed payload handed to the target domain's cloud node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelayDelivery {
    pub tick: Tick,
    pub from: (DomainId, NodeId),
    pub to: (DomainId, NodeId),
    pub payload: Vec<u8>,
    pub source_block: Hash80,
    pub global_block: Hash80,
}

#[derive(Debug)]
enum EventKind {
    Deliver {
        from: (DomainId, NodeId),
        to: (DomainId, NodeId),
        msg: Message,
    },
    DomainTick(usize),
    Toggle {
        domain: usize,
        node: NodeId,
        online: bool,
    },
    RelaySpawn(usize),
    GlobalRound,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReplyStatus {
    Waiting,
    Valid,
    Corrupt,
}

#[derive(Debug, Clone)]
pub struct SimNode {
    pub name: String,
    pub id: NodeId,
    pub role: Role,
    pub behavior: Behavior,
    pub online: bool,
    pub chain: Chain,
    key: KeyPair,
    mempool: Vec<Transaction>,
    pooled: HashSet<Transaction>,
    queries: BTreeMap<NodeId, ReplyStatus>,
    rng: ChaCha8Rng,
    accepted_round: Option<u64>,
    flood_counter: u64,
}

impl SimNode {
    pub fn mempool(&self) -> &[Transaction] {
        &self.mempool
    }

    fn pool(&mut self, tx: Transaction) {
        if !self.pooled.contains(&tx) {
            self.pooled.insert(tx.clone());
            self.mempool.push(tx);
        }
    }

    fn unpool(&mut self, txs: &[Transaction]) {
        if txs.iter().any(|t| self.pooled.contains(t)) {
            let gone: HashSet<&Transaction> = txs.iter().collect();
            self.retain_pool(|t| !gone.contains(t));
        }
    }

    fn retain_pool(&mut self, mut keep: impl FnMut(&Transaction) -> bool) {
        let pooled = &mut self.pooled;
        self.mempool.retain(|t| {
            let k = keep(t);
            if !k {
                pooled.remove(t);
            }
            k
        });
    }

    /// Draws whether a selective forwarder passes this message on.
    fn forwards(&mut self) -> bool {
        match self.behavior {
            Behavior::Dropper => false,
            Behavior::SelectiveForwarder { forward_fraction } => self.rng.random::<f64>() < forward_fraction,
            _ => true,
        }
    }
}

#[derive(Debug, Clone)]
struct ActiveRound {
    decision: MinerDecision,
    started: Tick,
    block: Option<Hash80>,
}

type Outcome = (ReputationLedger, Vec<ReputationDelta>);

#[derive(Debug)]
pub struct SimDomain {
    pub id: DomainId,
    pub nodes: Vec<SimNode>,
    pub ledger: ReputationLedger,
    pub consensus: ConsensusState,
    pub budget: DoSBudget,
    pub archive: MemoryArchive,
    /// Every block this domain ever committed.
    pub committed: BTreeSet<Hash80>,
    spec: scenario::ResolvedDomain,
    registry: MemoVerifier<KeyRegistry>,
    groups: BTreeMap<NodeId, u32>,
    round: Option<ActiveRound>,
    rounds_since_refund: u64,
    blocks_since_release: u64,
    outcomes: HashMap<Hash80, Outcome>,
    /// Blocks whose hash and roots some receiver already checked.
    checked_roots: HashMap<Hash80, Arc<Block>>,
    fork_blocks: BTreeSet<Hash80>,
    walks: BTreeMap<NodeId, f64>,
    walk_rng: ChaCha8Rng,
}

impl SimDomain {
    pub fn node(&self, id: NodeId) -> Option<&SimNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn index(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn cloud(&self) -> &SimNode {
        self.nodes
            .iter()
            .find(|n| n.role == Role::Cloud)
            .expect("validated: one cloud per domain")
    }

    /// Newest block of `node` that the domain has committed, or its chain
    /// root when none is. A block mined this tick is still in flight and
    /// does not count.
    pub fn settled_tip(&self, node: &SimNode) -> Hash80 {
        let blocks = node.chain.blocks();
        blocks
            .iter()
            .rev()
            .map(|b| b.header().current_hash)
            .find(|h| self.committed.contains(h))
            .unwrap_or(blocks[0].header().current_hash)
    }

    /// Settled tips of honest, online, full-storage nodes.
    pub fn honest_full_tips(&self) -> BTreeSet<Hash80> {
        self.nodes
            .iter()
            .filter(|n| n.behavior.is_honest() && n.online && n.chain.mode() == ChainMode::Full)
            .map(|n| self.settled_tip(n))
            .collect()
    }

    fn online_roles(&self) -> Vec<(NodeId, Role)> {
        self.nodes
            .iter()
            .filter(|n| n.online)
            .map(|n| (n.id, n.role))
            .collect()
    }

    fn impose_mode(&mut self, mode: Mode) {
        let targets: Vec<(NodeId, f64)> = match mode {
            Mode::Proposed => return,
            Mode::Constant => self
                .nodes
                .iter()
                .map(|n| (n.id, INITIAL_REPUTATION))
                .collect(),
            Mode::Random => self.walks.iter().map(|(n, v)| (*n, *v)).collect(),
        };
        for (n, v) in targets {
            if self.ledger.is_active(n) {
                self.ledger.set_score(n, v).expect("active node");
            }
        }
    }

    fn step_walks(&mut self) {
        for v in self.walks.values_mut() {
            *v = (*v + self.walk_rng.random_range(-10.0..10.0)).clamp(0.0, 100.0);
        }
    }
}

/// Applies the RATE transactions of a block body to a copy of `ledger` and
/// refreshes every rated subject, in id order, at `now`.
pub fn block_outcome(
    ledger: &ReputationLedger,
    txs: &[Transaction],
    now: Tick,
    weights: &WeightTable,
    mode: Mode,
) -> (ReputationLedger, Vec<ReputationDelta>) {
    let mut next = ledger.clone();
    if mode != Mode::Proposed {
        return (next, Vec::new());
    }
    let mut subjects = BTreeSet::new();
    for tx in txs.iter().filter(|t| t.tx_type == TxType::Rate) {
        let Some(r) = payload::parse_rating(&tx.add) else {
            continue;
        };
        if r.completed_at >= now || tx.id_from == tx.id_target || !next.is_active(tx.id_target) {
            continue;
        }
        let Ok(rec) = TransactionRecord::new(r.quality, weights.weight(r.interaction), r.completed_at) else {
            continue;
        };
        if next.record(tx.id_from, tx.id_target, rec).is_ok() {
            subjects.insert(tx.id_target);
        }
    }
    let mut deltas = Vec::new();
    for s in subjects {
        if let Ok(Some(score)) = next.record_and_refresh(now, s) {
            deltas.push(ReputationDelta {
                node: s,
                new_score: score,
            });
        }
    }
    (next, deltas)
}

/// Everything a finished run exposes.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub mode: Mode,
    pub metrics: MetricsLog,
    pub deliveries: Vec<DeliveryRecord>,
    pub relay_deliveries: Vec<RelayDelivery>,
    pub accepted: Vec<Acceptance>,
    pub domains: Vec<DomainReport>,
}

#[derive(Debug, Clone)]
pub struct DomainReport {
    pub id: DomainId,
    pub nodes: Vec<NodeReport>,
    pub isolated: BTreeSet<NodeId>,
    pub committed: BTreeSet<Hash80>,
    pub forks: u64,
}

#[derive(Debug, Clone)]
pub struct NodeReport {
    pub name: String,
    pub id: NodeId,
    pub role: Role,
    pub behavior: Behavior,
    pub reputation: f64,
    pub isolated: bool,
    pub chain_height: u64,
    pub tip: Hash80,
}

impl RunOutput {
    pub fn domain(&self, id: DomainId) -> Option<&DomainReport> {
        self.domains.iter().find(|d| d.id == id)
    }

    pub fn role_of(&self, domain: DomainId, node: NodeId) -> Option<Role> {
        self.domain(domain)?
            .nodes
            .iter()
            .find(|n| n.id == node)
            .map(|n| n.role)
    }

    /// Deliveries crossing a domain boundary with a terminal or edge node at
    /// either end.
    pub fn locality_violations(&self) -> Vec<&DeliveryRecord> {
        self.deliveries
            .iter()
            .filter(|d| {
                let device = |(dom, node)| matches!(self.role_of(dom, node), Some(Role::Terminal | Role::Edge));
                d.from.0 != d.to.0 && (device(d.from) || device(d.to))
            })
            .collect()
    }

    /// Relay deliveries whose source block was never committed.
    pub fn unanchored_relays(&self) -> Vec<&RelayDelivery> {
        self.relay_deliveries
            .iter()
            .filter(|r| {
                !self
                    .domain(r.from.0)
                    .is_some_and(|d| d.committed.contains(&r.source_block))
            })
            .collect()
    }

    pub fn summary_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "mode: {}", self.mode).unwrap();
        writeln!(out, "seed: {}", self.seed).unwrap();
        for d in &self.domains {
            let byz = d.nodes.iter().filter(|n| !n.behavior.is_honest()).count();
            writeln!(out, "\ndomain {} ({} nodes, {} byzantine)", d.id, d.nodes.len(), byz).unwrap();
            writeln!(out, "  final reputations:").unwrap();
            for n in &d.nodes {
                writeln!(
                    out,
                    "    {:<16} {}:{:<4} {:<9} {:<22} {:>10.4}{}",
                    n.name,
                    d.id,
                    n.id,
                    format!("{:?}", n.role).to_lowercase(),
                    format!("{:?}", n.behavior),
                    n.reputation,
                    if n.isolated { "  isolated" } else { "" }
                )
                .unwrap();
            }
            let iso: Vec<String> = d.isolated.iter().map(|n| format!("{}:{}", d.id, n)).collect();
            writeln!(out, "  isolated: [{}]", iso.join(", ")).unwrap();
            writeln!(out, "  forks: {}", d.forks).unwrap();
            writeln!(out, "  unresolved forks: {}", self.metrics.counter(d.id, "unresolved_forks")).unwrap();
            writeln!(out, "  blocks committed: {}", self.metrics.counter(d.id, "blocks_committed")).unwrap();
        }
        out
    }
}

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the combined inputs
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct World {
    scenario: Scenario,
    seed: u64,
    tick: Tick,
    seq: u64,
    queue: BTreeMap<(Tick, u64), EventKind>,
    pub domains: Vec<SimDomain>,
    domain_index: BTreeMap<DomainId, usize>,
    pub global: GlobalChain,
    global_rng: ChaCha8Rng,
    /// Relays waiting in the global pool, by source block.
    relay_sources: Vec<Hash80>,
    pub metrics: MetricsLog,
    pub deliveries: Vec<DeliveryRecord>,
    pub relay_deliveries: Vec<RelayDelivery>,
    pub accepted: Vec<Acceptance>,
}

impl World {
    pub fn new(scenario: &Scenario, seed: u64) -> World {
        let mode = scenario.config.mode;
        let mut metrics = MetricsLog::new(mode);
        let mut domains = Vec::new();
        for (di, d) in scenario.domains.iter().enumerate() {
            let window = match scenario.config.history_window {
                0 => None,
                w => Some(w),
            };
            let mut ledger = ReputationLedger::with_history_window(window);
            let mut registry = KeyRegistry::new();
            let mut nodes = Vec::new();
            for n in &d.nodes {
                ledger.admit_node(n.id).expect("validated: unique ids");
                registry.register(n.key.clone()).expect("validated: unique ids");
                let mode = if n.role == Role::Terminal {
                    ChainMode::HeadersOnly
                } else {
                    ChainMode::Full
                };
                nodes.push(SimNode {
                    name: n.name.clone(),
                    id: n.id,
                    role: n.role,
                    behavior: n.behavior,
                    online: !n.offline.iter().any(|w| w[0] == 0),
                    chain: Chain::new(mode),
                    key: n.key.clone(),
                    mempool: Vec::new(),
                    pooled: HashSet::new(),
                    queries: BTreeMap::new(),
                    rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 100 + di as u64, u64::from(n.id.0))),
                    accepted_round: None,
                    flood_counter: 0,
                });
            }
            let groups = d
                .nodes
                .iter()
                .filter_map(|n| match n.behavior {
                    Behavior::Colluder { group } => Some((n.id, group)),
                    _ => None,
                })
                .collect();
            for c in STANDARD_COUNTERS {
                metrics.add(d.id, c, 0);
            }
            domains.push(SimDomain {
                id: d.id,
                budget: DoSBudget::new(
                    d.dos.initial_budget,
                    d.dos.cost_per_block,
                    d.dos.low_bound,
                    d.nodes.iter().map(|n| n.id),
                ),
                walks: d.nodes.iter().map(|n| (n.id, INITIAL_REPUTATION)).collect(),
                walk_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 200 + di as u64, 0)),
                nodes,
                ledger,
                consensus: ConsensusState::new(derive_seed(seed, 300 + di as u64, 0)),
                archive: MemoryArchive::new(),
                committed: BTreeSet::new(),
                spec: d.clone(),
                registry: MemoVerifier::new(registry, 1 << 16),
                groups,
                round: None,
                rounds_since_refund: 0,
                blocks_since_release: 0,
                outcomes: HashMap::new(),
                checked_roots: HashMap::new(),
                fork_blocks: BTreeSet::new(),
            });
        }
        let domain_index = domains.iter().enumerate().map(|(i, d)| (d.id, i)).collect();
        let mut world = World {
            global: GlobalChain::new(domains.iter().map(|d| d.id)),
            scenario: scenario.clone(),
            seed,
            tick: 0,
            seq: 0,
            queue: BTreeMap::new(),
            domains,
            domain_index,
            global_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 400, 0)),
            relay_sources: Vec::new(),
            metrics,
            deliveries: Vec::new(),
            relay_deliveries: Vec::new(),
            accepted: Vec::new(),
        };
        for di in 0..world.domains.len() {
            for n in &scenario.domains[di].nodes {
                for w in &n.offline {
                    if w[0] > 0 {
                        world.push(w[0], EventKind::Toggle { domain: di, node: n.id, online: false });
                    }
                    world.push(w[1], EventKind::Toggle { domain: di, node: n.id, online: true });
                }
            }
        }
        for (ri, r) in scenario.relays.iter().enumerate() {
            world.push(r.at, EventKind::RelaySpawn(ri));
        }
        world
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn domain(&self, id: DomainId) -> Option<&SimDomain> {
        self.domain_index.get(&id).map(|i| &self.domains[*i])
    }

    fn push(&mut self, at: Tick, kind: EventKind) {
        self.queue.insert((at, self.seq), kind);
        self.seq += 1;
    }

    fn mode(&self) -> Mode {
        self.scenario.config.mode
    }

    /// Runs every event of the current tick. Returns false once the horizon
    /// has been processed.
    pub fn step(&mut self) -> bool {
        let t = self.tick;
        if t > self.scenario.config.horizon {
            return false;
        }
        for di in 0..self.domains.len() {
            self.push(t, EventKind::DomainTick(di));
        }
        if t > 0 && t.is_multiple_of(self.scenario.config.global_round_interval) {
            self.push(t, EventKind::GlobalRound);
        }
        if t.is_multiple_of(self.scenario.config.sampling_interval) {
            self.push(t, EventKind::Sample);
        }
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 != t {
                break;
            }
            let kind = entry.remove();
            self.handle(kind);
        }
        self.tick += 1;
        true
    }

    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    pub fn finish(mut self) -> RunOutput {
        for d in &self.domains {
            let tips = d.honest_full_tips().len() as u64;
            self.metrics.add(d.id, "unresolved_forks", tips.saturating_sub(1));
        }
        let domains = self
            .domains
            .iter()
            .map(|d| DomainReport {
                id: d.id,
                nodes: d
                    .nodes
                    .iter()
                    .map(|n| NodeReport {
                        name: n.name.clone(),
                        id: n.id,
                        role: n.role,
                        behavior: n.behavior,
                        reputation: d.ledger.score(n.id).unwrap_or(INITIAL_REPUTATION),
                        isolated: d.ledger.is_isolated(n.id),
                        chain_height: n.chain.height(),
                        tip: n.chain.tip().current_hash,
                    })
                    .collect(),
                isolated: d.ledger.isolated().clone(),
                committed: d.committed.clone(),
                forks: self.metrics.counter(d.id, "forks"),
            })
            .collect();
        RunOutput {
            seed: self.seed,
            mode: self.scenario.config.mode,
            metrics: self.metrics,
            deliveries: self.deliveries,
            relay_deliveries: self.relay_deliveries,
            accepted: self.accepted,
            domains,
        }
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::Deliver { from, to, msg } => self.deliver(from, to, msg),
            EventKind::DomainTick(di) => self.domain_tick(di),
            EventKind::Toggle { domain, node, online } => self.toggle(domain, node, online),
            EventKind::RelaySpawn(ri) => self.spawn_relay(ri),
            EventKind::GlobalRound => self.global_round(),
            EventKind::Sample => self.sample(),
        }
    }

    fn send(&mut self, from: (DomainId, NodeId), to: (DomainId, NodeId), msg: Message) {
        let at = self.tick + 1;
        self.push(at, EventKind::Deliver { from, to, msg });
    }

    fn broadcast(&mut self, di: usize, from: NodeId, msg: Message) {
        let d = &self.domains[di];
        let did = d.id;
        let peers: Vec<NodeId> = d.nodes.iter().map(|n| n.id).filter(|n| *n != from).collect();
        for p in peers {
            self.send((did, from), (did, p), msg.clone());
        }
    }

    fn toggle(&mut self, di: usize, node: NodeId, online: bool) {
        let d = &mut self.domains[di];
        let Some(ni) = d.index(node) else { return };
        if online && !d.nodes[ni].online {
            let source = d
                .nodes
                .iter()
                .find(|n| n.online && n.behavior.is_honest() && n.chain.mode() == ChainMode::Full)
                .map(|n| n.chain.clone());
            let mode = d.nodes[ni].chain.mode();
            if let Some(src) = source {
                d.nodes[ni].chain = Chain::resynced(&src, mode);
            }
        }
        d.nodes[ni].online = online;
        let did = d.id;
        self.metrics.event(self.tick, did, "toggle", json!({ "node": node.0, "online": online }));
    }

    // ---- per-domain round handling ----

    fn domain_tick(&mut self, di: usize) {
        let t = self.tick;
        let mode = self.mode();
        let did = self.domains[di].id;

        // finish the running round
        if let Some(r) = self.domains[di].round.clone() {
            let done = match r.block {
                Some(h) if t > r.started => {
                    self.commit(di, h);
                    true
                }
                _ if t >= r.started + self.scenario.config.round_timeout => {
                    self.metrics.bump(did, "round_timeouts");
                    true
                }
                _ => false,
            };
            if done {
                let d = &mut self.domains[di];
                d.round = None;
                d.rounds_since_refund += 1;
                if d.rounds_since_refund >= d.spec.refund_rounds {
                    d.rounds_since_refund = 0;
                    let refund = d.spec.refund;
                    d.budget.refund(refund);
                    self.metrics.bump(did, "refunds");
                }
            }
        }

        self.maybe_release(di);

        if self.domains[di].round.is_none() {
            self.start_round(di, t, mode);
        }

        for ni in 0..self.domains[di].nodes.len() {
            self.node_step(di, ni);
        }
    }

    fn start_round(&mut self, di: usize, t: Tick, mode: Mode) {
        let did = self.domains[di].id;
        let d = &mut self.domains[di];
        d.impose_mode(mode);
        let online = d.online_roles();
        let params = d.spec.params;
        let outcome = match d.consensus.tick(&params, &mut d.ledger, &online, t) {
            Ok(o) => o,
            Err(e) => {
                self.metrics.bump(did, "consensus_halts");
                self.metrics.event(t, did, "halt", json!({ "error": e.to_string() }));
                return;
            }
        };
        d.impose_mode(mode);

        let mut isolated_now = Vec::new();
        let mut boundary = false;
        for a in &outcome.actions {
            match a {
                ConsensusAction::EpochStarted => boundary = true,
                ConsensusAction::Isolated { nodes } => isolated_now.extend(nodes.iter().copied()),
                ConsensusAction::Halved { .. } => self.metrics.bump(did, "halvings"),
                ConsensusAction::FallbackStarted => self.metrics.bump(did, "fallbacks"),
                ConsensusAction::EpochCompleted { .. } => self.metrics.bump(did, "epochs_completed"),
                _ => {}
            }
            self.metrics
                .event(t, did, "consensus", serde_json::to_value(a).expect("actions serialize"));
        }
        let d = &mut self.domains[di];
        if boundary && d.honest_full_tips().len() > 1 {
            self.metrics.bump(did, "chain_disagreements");
        }
        if !isolated_now.is_empty() {
            self.metrics.add(did, "isolation_events", isolated_now.len() as u64);
            let iso: BTreeSet<NodeId> = isolated_now.into_iter().collect();
            for n in &mut d.nodes {
                n.retain_pool(|tx| !iso.contains(&tx.id_from));
            }
        }
        let decision = outcome.decision;
        let isolated_pick = d.ledger.is_isolated(decision.miner)
            || d.consensus.candidates().iter().any(|n| d.ledger.is_isolated(*n))
            || d.consensus.executives().iter().any(|n| d.ledger.is_isolated(*n));
        if isolated_pick {
            self.metrics.bump(did, "hygiene_violations");
        }
        self.metrics.bump(did, "rounds");
        d.round = Some(ActiveRound {
            decision,
            started: t,
            block: None,
        });
        self.mine(di, decision);
    }

    fn mine(&mut self, di: usize, decision: MinerDecision) {
        let t = self.tick;
        let mode = self.mode();
        let d = &mut self.domains[di];
        let did = d.id;
        let Some(ni) = d.index(decision.miner) else { return };
        if !d.nodes[ni].online {
            return;
        }
        let willing = match d.nodes[ni].behavior {
            Behavior::Dropper => false,
            Behavior::SelectiveForwarder { .. } => d.nodes[ni].forwards(),
            _ => true,
        };
        if !willing {
            return;
        }
        let (registry, ledger) = (&d.registry, &d.ledger);
        let node = &mut d.nodes[ni];
        node.retain_pool(|tx| validate_transaction(tx, registry, ledger).is_ok());
        let txs = node.mempool.clone();
        let (next, deltas) = block_outcome(&d.ledger, &txs, t, &d.spec.weights, mode);
        let block = Block::assemble(node.chain.tip().current_hash, Timestamp24::from_tick(t), txs, deltas)
            .expect("deltas have unique nodes")
            .seal_with(&node.key);
        if charge_block_broadcast(&mut d.budget, decision.miner) == BroadcastVerdict::Discard {
            self.metrics.bump(did, "dos_discarded");
            return;
        }
        let hash = block.hash();
        let node = &mut d.nodes[ni];
        node.unpool(&block.transactions);
        node.chain.append(block.clone()).expect("built on own tip");
        node.accepted_round = Some(decision.round);
        d.outcomes.insert(hash, (next, block.rep_deltas.clone()));
        if let Some(r) = d.round.as_mut() {
            r.block = Some(hash);
        }
        self.metrics.bump(did, "blocks_mined");
        self.broadcast(di, decision.miner, Message::Block(Arc::new(block)));
    }

    fn commit(&mut self, di: usize, hash: Hash80) {
        let mode = self.mode();
        let d = &mut self.domains[di];
        let did = d.id;
        if let Some((next, _)) = d.outcomes.remove(&hash) {
            d.ledger = next;
        }
        d.outcomes.clear();
        d.checked_roots.clear();
        d.impose_mode(mode);
        d.committed.insert(hash);
        d.blocks_since_release += 1;
        self.metrics.bump(did, "blocks_committed");
        self.extract_relays(di, hash);
    }

    fn maybe_release(&mut self, di: usize) {
        let t = self.tick;
        let d = &mut self.domains[di];
        if d.blocks_since_release < d.spec.release_interval {
            return;
        }
        let did = d.id;
        let mut chains: Vec<&mut Chain> = d
            .nodes
            .iter_mut()
            .filter(|n| n.online)
            .map(|n| &mut n.chain)
            .collect();
        match release_agreed(&mut chains, &mut d.archive) {
            Ok(cp) => {
                d.blocks_since_release = 0;
                self.metrics.bump(did, "releases");
                self.metrics.event(
                    t,
                    did,
                    "release",
                    json!({ "released": cp.released_count, "summary": cp.summary_hash.to_hex() }),
                );
            }
            Err(_) => self.metrics.bump(did, "release_refused"),
        }
    }

    // ---- node behavior ----

    fn node_step(&mut self, di: usize, ni: usize) {
        let t = self.tick;
        let interval = self.scenario.config.interaction_interval;
        if !self.domains[di].nodes[ni].online {
            return;
        }
        if t > 0 && t.is_multiple_of(interval) {
            self.start_interaction(di, ni);
        }
        if t > 2 && t % interval == 2 {
            self.rate_replies(di, ni);
        }
        if let Behavior::Flooder { rate } = self.domains[di].nodes[ni].behavior {
            for _ in 0..rate {
                self.flood(di, ni);
            }
        }
    }

    /// Whether `node` tells the truth to `peer` (`None`: broadcast) at `t`.
    fn truthful(&self, di: usize, node: &SimNode, peer: Option<NodeId>, t: Tick) -> bool {
        match node.behavior {
            Behavior::FalseInfo { onset } => t < onset,
            Behavior::Colluder { group } => match peer {
                None => true,
                Some(p) => self.domains[di].groups.get(&p) == Some(&group),
            },
            _ => true,
        }
    }

    /// The quality `rater` reports about `subject`, given what an honest
    /// rater would report. `None` means no rating is sent.
    fn reported_quality(&self, di: usize, rater: &SimNode, subject: NodeId, honest: f64, t: Tick) -> Option<f64> {
        match rater.behavior {
            Behavior::Dropper => None,
            Behavior::FalseInfo { onset } if t >= onset => Some(0.0),
            Behavior::Colluder { group } => Some(if self.domains[di].groups.get(&subject) == Some(&group) {
                100.0
            } else {
                0.0
            }),
            _ => Some(honest),
        }
    }

    fn start_interaction(&mut self, di: usize, ni: usize) {
        let t = self.tick;
        if matches!(self.domains[di].nodes[ni].behavior, Behavior::Dropper) {
            return;
        }
        let truthful = self.truthful(di, &self.domains[di].nodes[ni], None, t);
        let d = &mut self.domains[di];
        let peers: Vec<NodeId> = d.nodes.iter().map(|n| n.id).filter(|p| *p != d.nodes[ni].id).collect();
        let cloud = d.cloud().id;
        let node = &mut d.nodes[ni];
        let me = node.id;
        let value = node.rng.random::<u64>();
        let update = Transaction::signed(TxType::Update, &node.key, cloud, payload::info(t, value, truthful));
        let send_update = node.forwards();
        node.queries = peers.iter().map(|p| (*p, ReplyStatus::Waiting)).collect();
        let queries: Vec<Transaction> = peers
            .iter()
            .map(|p| Transaction::signed(TxType::Query, &node.key, *p, payload::query(t)))
            .collect();
        if send_update {
            node.pool(update.clone());
            self.broadcast(di, me, Message::Tx(update));
        }
        let did = self.domains[di].id;
        for q in queries {
            let to = q.id_target;
            self.send((did, me), (did, to), Message::Tx(q));
        }
    }

    fn rate_replies(&mut self, di: usize, ni: usize) {
        let t = self.tick;
        let queries = std::mem::take(&mut self.domains[di].nodes[ni].queries);
        for (peer, status) in queries {
            let honest = if status == ReplyStatus::Valid { 100.0 } else { 0.0 };
            self.send_rating(di, ni, peer, TxType::Reply, honest, t);
        }
    }

    fn send_rating(&mut self, di: usize, ni: usize, subject: NodeId, interaction: TxType, honest: f64, t: Tick) {
        let Some(quality) = self.reported_quality(di, &self.domains[di].nodes[ni], subject, honest, t) else {
            return;
        };
        let node = &mut self.domains[di].nodes[ni];
        if !node.forwards() {
            return;
        }
        let rating = payload::rating(&Rating {
            interaction,
            quality,
            completed_at: t,
        });
        let tx = Transaction::signed(TxType::Rate, &node.key, subject, rating);
        let me = node.id;
        node.pool(tx.clone());
        self.broadcast(di, me, Message::Tx(tx));
    }

    fn flood(&mut self, di: usize, ni: usize) {
        let t = self.tick;
        let d = &mut self.domains[di];
        let did = d.id;
        let node = &mut d.nodes[ni];
        node.flood_counter += 1;
        let filler = Transaction::signed(TxType::Update, &node.key, node.id, payload::flood(node.flood_counter));
        let block = Block::assemble(node.chain.tip().current_hash, Timestamp24::from_tick(t), vec![filler], Vec::new())
            .expect("no deltas")
            .seal_with(&node.key);
        let me = node.id;
        self.metrics.bump(did, "flood_blocks");
        if charge_block_broadcast(&mut d.budget, me) == BroadcastVerdict::Discard {
            self.metrics.bump(did, "dos_discarded");
            return;
        }
        self.broadcast(di, me, Message::Block(Arc::new(block)));
    }

    // ---- receiving ----

    fn deliver(&mut self, from: (DomainId, NodeId), to: (DomainId, NodeId), msg: Message) {
        let Some(&di) = self.domain_index.get(&to.0) else { return };
        let Some(ni) = self.domains[di].index(to.1) else { return };
        if !self.domains[di].nodes[ni].online {
            self.metrics.bump(to.0, "dropped_offline");
            return;
        }
        let (kind, block) = match &msg {
            Message::Tx(tx) => (MessageKind::Tx(tx.tx_type), None),
            Message::Block(b) => (MessageKind::Block, Some(b.hash())),
            Message::Relay(_) => (MessageKind::Relay, None),
        };
        self.deliveries.push(DeliveryRecord {
            tick: self.tick,
            from,
            to,
            kind,
            block,
        });
        match msg {
            Message::Tx(tx) => self.receive_tx(di, ni, tx),
            Message::Block(b) => self.receive_block(di, ni, &b),
            Message::Relay(r) => self.receive_relay(di, ni, *r),
        }
    }

    fn receive_tx(&mut self, di: usize, ni: usize, tx: Transaction) {
        let t = self.tick;
        let d = &mut self.domains[di];
        let did = d.id;
        if let Err(reason) = validate_transaction(&tx, &d.registry, &d.ledger) {
            self.metrics.bump(did, "txs_rejected");
            self.metrics.bump(did, &format!("tx_rejected.{reason}"));
            return;
        }
        if d.ledger.is_isolated(tx.id_from) {
            self.metrics.bump(did, "hygiene_violations");
        }
        self.accepted.push(Acceptance {
            tick: t,
            domain: did,
            by: d.nodes[ni].id,
            author: tx.id_from,
            block: None,
        });
        match tx.tx_type {
            TxType::Query => {
                let truthful = self.truthful(di, &self.domains[di].nodes[ni], Some(tx.id_from), t);
                let node = &mut self.domains[di].nodes[ni];
                if !node.forwards() {
                    return;
                }
                let value = node.rng.random::<u64>();
                let reply = Transaction::signed(TxType::Reply, &node.key, tx.id_from, payload::info(t, value, truthful));
                let me = node.id;
                self.send((did, me), (did, tx.id_from), Message::Tx(reply));
            }
            TxType::Reply => {
                let node = &mut self.domains[di].nodes[ni];
                if let Some(s) = node.queries.get_mut(&tx.id_from) {
                    if *s == ReplyStatus::Waiting {
                        *s = match payload::info_is_truthful(&tx.add) {
                            Some(true) => ReplyStatus::Valid,
                            _ => ReplyStatus::Corrupt,
                        };
                    }
                }
            }
            TxType::Update => {
                let truth = payload::info_is_truthful(&tx.add);
                let me = self.domains[di].nodes[ni].id;
                if tx.add.0[0] == RELAYED_MARKER && tx.id_target == me {
                    self.metrics.bump(did, "relays_received");
                }
                let sender = tx.id_from;
                self.domains[di].nodes[ni].pool(tx);
                if let Some(truthful) = truth {
                    let honest = if truthful { 100.0 } else { 0.0 };
                    self.send_rating(di, ni, sender, TxType::Update, honest, t);
                }
            }
            TxType::Rate | TxType::Assert => self.domains[di].nodes[ni].pool(tx),
        }
    }

    fn receive_block(&mut self, di: usize, ni: usize, block: &Arc<Block>) {
        let mode = self.mode();
        let d = &mut self.domains[di];
        let did = d.id;
        let round = d.round.as_ref().map(|r| r.decision);
        let check = d.nodes[ni].chain.detect_fork(&block.header);
        if check == ForkCheck::Duplicate {
            self.metrics.bump(did, "blocks_duplicate");
            return;
        }
        let hash = block.hash();
        if !d.outcomes.contains_key(&hash) {
            let now = u64::from(block.header.tmp.value());
            let outcome = block_outcome(&d.ledger, &block.transactions, now, &d.spec.weights, mode);
            d.outcomes.insert(hash, outcome);
        }
        let expected = d.outcomes[&hash].1.clone();
        let node = &d.nodes[ni];
        let roots_checked = match d.checked_roots.get(&hash) {
            Some(seen) => Arc::ptr_eq(seen, block) || **seen == **block,
            None if check_roots(block).is_ok() => {
                d.checked_roots.insert(hash, Arc::clone(block));
                true
            }
            None => false,
        };
        let mut ctx = BlockContext::new(&d.registry, &d.ledger);
        ctx.roots_checked = roots_checked;
        ctx.expected_proposer = round.map(|r| r.miner);
        ctx.expected_deltas = Some(&expected);
        ctx.round_filled = round.is_some_and(|r| node.accepted_round == Some(r.round));
        let proposer_isolated = block.proposer().is_some_and(|p| d.ledger.is_isolated(p));

        let verdict = match (round, check) {
            (None, _) => Err(crate::ledger::RejectReason::WrongProposer),
            (Some(_), ForkCheck::Fork) => {
                ctx.round_filled = false;
                node.chain.validate_block_on(block, block.header.pre_hash, &ctx).map(|_| true)
            }
            (Some(_), _) => node.chain.validate_block(block, &ctx).map(|_| false),
        };
        match verdict {
            Ok(true) => {
                // same-parent equivocation by the scheduled miner: keep the
                // branch received first and re-elect the committee
                if d.fork_blocks.insert(hash) {
                    self.metrics.bump(did, "forks");
                    d.consensus.on_fork_detected();
                    self.metrics.event(self.tick, did, "fork", json!({ "block": hash.to_hex() }));
                }
                let node = &mut d.nodes[ni];
                for tx in &block.transactions {
                    node.pool(tx.clone());
                }
            }
            Ok(false) => {
                if proposer_isolated || block.transactions.iter().any(|tx| d.ledger.is_isolated(tx.id_from)) {
                    self.metrics.bump(did, "hygiene_violations");
                }
                self.accepted.push(Acceptance {
                    tick: self.tick,
                    domain: did,
                    by: d.nodes[ni].id,
                    author: block.proposer().expect("validated blocks are sealed"),
                    block: Some(hash),
                });
                let node = &mut d.nodes[ni];
                node.unpool(&block.transactions);
                node.chain.append(Block::clone(block)).expect("validated against tip");
                node.accepted_round = round.map(|r| r.round);
                self.metrics.bump(did, "blocks_accepted");
            }
            Err(reason) => {
                self.metrics.bump(did, "blocks_rejected");
                self.metrics.bump(did, &format!("block_rejected.{reason}"));
            }
        }
    }

    // ---- cross-domain ----

    fn spawn_relay(&mut self, ri: usize) {
        let r = self.scenario.relays[ri].clone();
        let Some(&di) = self.domain_index.get(&r.from.0) else { return };
        let Some(ni) = self.domains[di].index(r.from.1) else { return };
        let did = self.domains[di].id;
        if !self.domains[di].nodes[ni].online || self.domains[di].ledger.is_isolated(r.from.1) {
            self.metrics.bump(did, "relay_spawn_skipped");
            return;
        }
        let cloud = self.domains[di].cloud().id;
        let node = &mut self.domains[di].nodes[ni];
        let add = relay_payload(r.to, &r.payload).expect("validated payload size");
        let tx = Transaction::signed(TxType::Update, &node.key, cloud, add);
        node.pool(tx.clone());
        self.metrics.bump(did, "relays_spawned");
        self.broadcast(di, r.from.1, Message::Tx(tx));
    }

    fn extract_relays(&mut self, di: usize, hash: Hash80) {
        let d = &self.domains[di];
        let did = d.id;
        let cloud = d.cloud();
        if !cloud.online {
            return;
        }
        let Some(block) = cloud
            .chain
            .blocks()
            .iter()
            .rev()
            .filter_map(|b| b.body())
            .find(|b| b.hash() == hash)
        else {
            return;
        };
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        for (i, tx) in block.transactions.iter().enumerate() {
            if tx.tx_type != TxType::Update || parse_relay(RELAY_MARKER, &tx.add).is_none() {
                continue;
            }
            let proof = merkle_proof(&block.transactions, i).expect("index in range");
            let Some(msg) = RelayMessage::from_committed(did, tx.clone(), block.header, proof) else {
                continue;
            };
            let target = msg.to.0;
            match relay(&msg, &cloud.chain, &d.ledger, target) {
                Ok(()) => accepted.push(msg),
                Err(reason) => rejected.push(reason),
            }
        }
        for reason in rejected {
            self.metrics.bump(did, &format!("relay_rejected.{reason}"));
        }
        for msg in accepted {
            self.metrics.bump(did, "relays_submitted");
            self.relay_sources.push(msg.anchor.current_hash);
            self.global.submit(msg);
        }
    }

    fn global_round(&mut self) {
        if self.global.pending().is_empty() {
            return;
        }
        let t = self.tick;
        let stakes: Vec<CloudStake> = self
            .domains
            .iter()
            .map(|d| {
                let cloud = d.cloud();
                let stake = if cloud.online && d.ledger.is_active(cloud.id) {
                    d.ledger.score(cloud.id).unwrap_or(0.0)
                } else {
                    0.0
                };
                CloudStake { domain: d.id, stake }
            })
            .collect();
        let Ok(proposer) = select_proposer(&stakes, &mut self.global_rng) else {
            return;
        };
        let pi = self.domain_index[&proposer];
        let key = self.domains[pi].cloud().key.clone();
        let from = (proposer, key.node_id());
        let packaged = self.global.run_round(&key, t).expect("relay transactions are well formed");
        self.relay_sources.clear();
        self.metrics.bump(proposer, "global_blocks");
        for p in packaged {
            let target = p.message.to.0;
            let Some(&ti) = self.domain_index.get(&target) else { continue };
            let cloud = self.domains[ti].cloud().id;
            self.send(from, (target, cloud), Message::Relay(Box::new(p)));
        }
    }

    fn receive_relay(&mut self, di: usize, ni: usize, p: PackagedRelay) {
        let d = &mut self.domains[di];
        let did = d.id;
        if d.nodes[ni].role != Role::Cloud {
            return;
        }
        self.relay_deliveries.push(RelayDelivery {
            tick: self.tick,
            from: p.message.from,
            to: p.message.to,
            payload: p.message.payload.clone(),
            source_block: p.message.anchor.current_hash,
            global_block: p.global_block,
        });
        self.metrics.bump(did, "relays_delivered");
        let add: Payload = relayed_payload(p.message.from, &p.message.payload).expect("payload size checked at source");
        let node = &mut d.nodes[ni];
        let tx = Transaction::signed(TxType::Update, &node.key, p.message.to.1, add);
        let me = node.id;
        node.pool(tx.clone());
        self.broadcast(di, me, Message::Tx(tx));
    }

    // ---- sampling ----

    fn sample(&mut self) {
        let t = self.tick;
        let mode = self.mode();
        for d in &mut self.domains {
            if mode == Mode::Random && t > 0 {
                d.step_walks();
            }
            d.impose_mode(mode);
            for n in &d.nodes {
                self.metrics.samples.push(Sample {
                    tick: t,
                    domain: d.id,
                    node: n.id,
                    reputation: d.ledger.score(n.id).unwrap_or(INITIAL_REPUTATION),
                });
            }
        }
    }
}

/// Runs a validated scenario to its horizon.
pub fn run(scenario: &Scenario, seed: u64) -> RunOutput {
    let mut world = World::new(scenario, seed);
    world.run_to_end();
    world.finish()
}

//! End-to-end acceptance suite. Every criterion runs in order inside one test
//! so that the timing limits are measured without competing test threads;
//! each prints a single PASS or FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use lwchain::cli::figure1;
use lwchain::codec::{
    decode_header, decode_transaction, encode_header, encode_transaction, BlockHeader, Hash80,
    KeyPair, KeyRegistry, NodeId, Payload, Signature, Signer, Timestamp24, Transaction, TxType,
    HEADER_BITS, TRANSACTION_BITS,
};
use lwchain::consensus::{
    strategy1_pick, ConsensusAction, ConsensusParams, ConsensusState, Role, Strategy,
};
use lwchain::globalchain::DomainId;
use lwchain::ledger::{audit, summary_hash, BlockContext, Chain, ChainMode, MemoryArchive};
use lwchain::netsim::{self, Behavior, RunOutput, Scenario, ScenarioConfig};
use lwchain::reputation::{ReputationLedger, TransactionRecord};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    ScenarioConfig::load(&scenario_path(name)).unwrap().validate().unwrap()
}

fn honest_nodes(out: &RunOutput) -> BTreeSet<(DomainId, NodeId)> {
    out.domains
        .iter()
        .flat_map(|d| {
            d.nodes
                .iter()
                .filter(|n| n.behavior.is_honest())
                .map(move |n| (d.id, n.id))
        })
        .collect()
}

/// The CSV artifacts `run` writes, concatenated.
fn csv_outputs(out: &RunOutput) -> String {
    format!("{}{}", out.metrics.reputation_csv(), out.metrics.counters_csv())
}

// ---- 1. codec exactness ----

fn random_tx(rng: &mut ChaCha8Rng) -> Transaction {
    let mut sig = [0u8; 128];
    rng.fill_bytes(&mut sig);
    let mut add = [0u8; 128];
    rng.fill_bytes(&mut add);
    Transaction {
        tx_type: TxType::ALL[rng.random_range(0..TxType::ALL.len())],
        id_from: NodeId(rng.random()),
        id_target: NodeId(rng.random()),
        sig: Signature(sig),
        add: Payload(add),
    }
}

fn random_hash(rng: &mut ChaCha8Rng) -> Hash80 {
    Hash80(rng.random())
}

fn codec_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    let mut failures = 0;
    for _ in 0..n {
        let tx = random_tx(&mut rng);
        let bits = encode_transaction(&tx);
        if bits.len() != TRANSACTION_BITS || decode_transaction(&bits).as_ref() != Ok(&tx) {
            failures += 1;
        }
        let mut header = BlockHeader::sealed(
            random_hash(&mut rng),
            Timestamp24::new(rng.random_range(0..1 << 24)).unwrap(),
            random_hash(&mut rng),
            random_hash(&mut rng),
        );
        header.current_hash = random_hash(&mut rng);
        let bits = encode_header(&header);
        if bits.len() != HEADER_BITS || decode_header(&bits) != Ok(header) {
            failures += 1;
        }
    }
    ensure!(failures == 0, "{failures} round-trip failures");
    Ok(format!("{n} transactions and {n} headers round-trip, {HEADER_BITS}/{TRANSACTION_BITS} bits"))
}

// ---- 2. reputation oracle equivalence ----

/// Direct evaluation of the scoring equations: per-rater weighted average of
/// `quality / age`, drop one highest and one lowest rater, then average the
/// rest weighted by the raters' own reputations.
fn brute_force(
    priors: &BTreeMap<u8, f64>,
    histories: &BTreeMap<u8, Vec<(f64, f64, u64)>>,
    now: u64,
) -> Option<f64> {
    let mut scores: Vec<(u8, f64)> = Vec::new();
    for (rater, records) in histories {
        let mut num = 0.0;
        let mut den = 0.0;
        for &(q, w, c) in records {
            if c < now {
                num += q * w / (now - c) as f64;
                den += w;
            }
        }
        if den > 0.0 {
            scores.push((*rater, num / den));
        }
    }
    if scores.is_empty() {
        return None;
    }
    if scores.len() >= 3 {
        let mut hi = 0;
        for i in 0..scores.len() {
            if scores[i].1 > scores[hi].1 {
                hi = i;
            }
        }
        scores.remove(hi);
        let mut lo = 0;
        for i in 0..scores.len() {
            if scores[i].1 < scores[lo].1 {
                lo = i;
            }
        }
        scores.remove(lo);
    }
    let total: f64 = scores.iter().map(|(r, _)| priors[r]).sum();
    if total == 0.0 {
        return Some(scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64);
    }
    Some(scores.iter().map(|(r, s)| priors[r] * s).sum::<f64>() / total)
}

fn reputation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let subject = NodeId(0);
    let weights = [1.0, 2.0, 0.5, 3.0, 1.5];
    let n = 1000;
    let mut worst: f64 = 0.0;
    for case in 0..n {
        let raters = rng.random_range(1..=10u8);
        let mut ledger = ReputationLedger::new();
        ledger.admit_node(subject).unwrap();
        let mut priors = BTreeMap::new();
        let mut histories = BTreeMap::new();
        let all_zero = rng.random_bool(0.05);
        for r in 1..=raters {
            let prior = if all_zero { 0.0 } else { rng.random_range(0.0..=100.0) };
            ledger.admit_node(NodeId(r)).unwrap();
            ledger.set_score(NodeId(r), prior).unwrap();
            priors.insert(r, prior);
            let mut t = rng.random_range(0..50u64);
            let mut records = Vec::new();
            for _ in 0..rng.random_range(0..=20) {
                t += rng.random_range(0..4);
                let q = rng.random_range(0.0..=100.0);
                let w = weights[rng.random_range(0..weights.len())];
                ledger
                    .record(NodeId(r), subject, TransactionRecord::new(q, w, t).unwrap())
                    .unwrap();
                records.push((q, w, t));
            }
            histories.insert(r, records);
        }
        let now = rng.random_range(1..120u64);
        let want = brute_force(&priors, &histories, now);
        let got = ledger.record_and_refresh(now, subject).unwrap();
        match (got, want) {
            (Some(g), Some(w)) => {
                worst = worst.max((g - w).abs());
                ensure!((g - w).abs() <= 1e-9, "case {case}: {g} vs {w}");
            }
            (None, None) => {}
            (g, w) => return Err(format!("case {case}: {g:?} vs {w:?}")),
        }
    }
    Ok(format!("{n} histories, max abs error {worst:.1e}"))
}

// ---- 3. outlier resistance ----

fn fused_with(priors: &[f64], scores: &[f64]) -> f64 {
    let subject = NodeId(0);
    let mut ledger = ReputationLedger::new();
    ledger.admit_node(subject).unwrap();
    for (i, (p, s)) in priors.iter().zip(scores).enumerate() {
        let rater = NodeId(i as u8 + 1);
        ledger.admit_node(rater).unwrap();
        ledger.set_score(rater, *p).unwrap();
        // A single record one tick old yields exactly its quality.
        ledger
            .record(rater, subject, TransactionRecord::new(*s, 1.0, 9).unwrap())
            .unwrap();
    }
    ledger.record_and_refresh(10, subject).unwrap().unwrap()
}

fn outlier_resistance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1000;
    let mut violations = 0;
    for _ in 0..n {
        let raters = rng.random_range(3..=10);
        let priors: Vec<f64> = (0..raters).map(|_| rng.random_range(0.0..=100.0)).collect();
        let scores: Vec<f64> = (0..raters).map(|_| rng.random_range(1.0..99.0)).collect();
        let base = fused_with(&priors, &scores);
        let argmax = (0..raters).max_by(|a, b| scores[*a].total_cmp(&scores[*b])).unwrap();
        let argmin = (0..raters).min_by(|a, b| scores[*a].total_cmp(&scores[*b])).unwrap();
        for (who, extreme) in [(argmax, 100.0), (argmin, 0.0)] {
            let mut pushed = scores.clone();
            pushed[who] = extreme;
            if fused_with(&priors, &pushed).to_bits() != base.to_bits() {
                violations += 1;
            }
        }
    }
    ensure!(violations == 0, "{violations} violations");
    Ok(format!("{n} instances, highest rater pushed to 100 and lowest to 0, 0 violations"))
}

// ---- 4. epoch state machine traces ----

fn ids(v: &[u8]) -> Vec<NodeId> {
    v.iter().map(|i| NodeId(*i)).collect()
}

fn trace_ledger() -> ReputationLedger {
    let mut l = ReputationLedger::new();
    for (id, s) in [(1, 90.0), (2, 80.0), (3, 70.0), (4, 30.0)] {
        l.admit_node(NodeId(id)).unwrap();
        l.set_score(NodeId(id), s).unwrap();
    }
    l
}

fn trace_params() -> ConsensusParams {
    ConsensusParams {
        counting_threshold: 1,
        epoch_duration: 10,
        fallback_duration: 5,
        isolation_threshold: 40.0,
        candidates: 3,
        executives: 2,
        edge_preference: 3.0,
    }
}

const TRACE_ONLINE: [(NodeId, Role); 4] = [
    (NodeId(1), Role::Cloud),
    (NodeId(2), Role::Edge),
    (NodeId(3), Role::Edge),
    (NodeId(4), Role::Terminal),
];

/// Expected miner: `Some` for a scheduled Strategy-2 miner, `None` for a
/// Strategy-1 draw.
struct Step {
    tick: u64,
    actions: Vec<ConsensusAction>,
    miner: Option<u8>,
}

fn step(tick: u64, actions: Vec<ConsensusAction>, miner: Option<u8>) -> Step {
    Step { tick, actions, miner }
}

fn run_trace(name: &str, st: &mut ConsensusState, ledger: &mut ReputationLedger, steps: &[Step]) -> Result<(), String> {
    let params = trace_params();
    for s in steps {
        let out = st
            .tick(&params, ledger, &TRACE_ONLINE, s.tick)
            .map_err(|e| format!("{name} tick {}: {e}", s.tick))?;
        ensure!(
            out.actions == s.actions,
            "{name} tick {}: actions {:?}, expected {:?}",
            s.tick,
            out.actions,
            s.actions
        );
        match s.miner {
            Some(m) => ensure!(
                out.decision.strategy_used == Strategy::S2 && out.decision.miner == NodeId(m),
                "{name} tick {}: decision {:?}, expected S2 miner {m}",
                s.tick,
                out.decision
            ),
            None => ensure!(
                out.decision.strategy_used == Strategy::S1 && ledger.is_active(out.decision.miner),
                "{name} tick {}: decision {:?}, expected an active S1 draw",
                s.tick,
                out.decision
            ),
        }
    }
    Ok(())
}

fn elected(s: &[u8], e: &[u8]) -> ConsensusAction {
    ConsensusAction::Elected {
        candidates: ids(s),
        executives: ids(e),
    }
}

fn consensus_traces() -> Outcome {
    use ConsensusAction::*;

    // Healthy epoch: two rotations of E within T2, then a fresh election.
    let mut ledger = trace_ledger();
    let mut st = ConsensusState::new(0);
    let healthy = [
        step(0, vec![EpochStarted, elected(&[1, 2, 3], &[1, 2])], Some(1)),
        step(1, vec![RotationCompleted { beta1: 1 }], Some(2)),
        step(2, vec![ExecutivesReelected { executives: ids(&[1, 2]) }], Some(1)),
        step(3, vec![RotationCompleted { beta1: 2 }], Some(2)),
        step(
            4,
            vec![EpochCompleted { beta2: 4 }, EpochStarted, elected(&[1, 2, 3], &[1, 2])],
            Some(1),
        ),
    ];
    run_trace("healthy", &mut st, &mut ledger, &healthy)?;
    ensure!(ledger == trace_ledger(), "healthy epoch changed reputations");

    // Overrun: the same rotations spread over 20 ticks exceed T2 = 10.
    let mut ledger = trace_ledger();
    let before = ledger.scores().clone();
    let mut st = ConsensusState::new(0);
    let overrun = [
        step(0, vec![EpochStarted, elected(&[1, 2, 3], &[1, 2])], Some(1)),
        step(5, vec![RotationCompleted { beta1: 1 }], Some(2)),
        step(10, vec![ExecutivesReelected { executives: ids(&[1, 2]) }], Some(1)),
        step(15, vec![RotationCompleted { beta1: 2 }], Some(2)),
        step(20, vec![Halved { beta2: 20 }, FallbackStarted], None),
    ];
    run_trace("overrun", &mut st, &mut ledger, &overrun)?;
    for (node, old) in &before {
        let now = ledger.score(*node).unwrap();
        ensure!(
            now.to_bits() == (old / 2.0).to_bits(),
            "node {node} halved to {now}, expected {}",
            old / 2.0
        );
    }

    // Fallback: random miners until T3 = 5 has elapsed, then isolation of
    // exactly the nodes strictly below T4 (70/2 and 30/2; 80/2 = 40 stays).
    let fallback = [
        step(21, vec![], None),
        step(23, vec![], None),
        step(25, vec![], None),
        step(
            26,
            vec![
                Isolated { nodes: ids(&[3, 4]) },
                FallbackEnded { beta2: 6 },
                EpochStarted,
                elected(&[1, 2], &[1, 2]),
            ],
            Some(1),
        ),
    ];
    run_trace("fallback", &mut st, &mut ledger, &fallback)?;
    ensure!(
        ledger.isolated() == &ids(&[3, 4]).into_iter().collect::<BTreeSet<_>>(),
        "isolated set {:?}",
        ledger.isolated()
    );

    // Isolated nodes are never drawn afterwards.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let m = strategy1_pick(&TRACE_ONLINE, ledger.isolated(), 3.0, &mut rng).unwrap();
        ensure!(!ledger.is_isolated(m), "isolated node {m} drawn");
    }
    Ok("healthy, overrun/halving/fallback and timeout/isolation traces match".into())
}

// ---- 5. consensus safety ----

/// A single domain of `n` nodes, `f` of them Byzantine.
fn byzantine_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let n = 5 + (seed % 5) as usize;
    let f = rng.random_range(1..=(n - 1) / 2);
    let kinds = ["false_info", "dropper", "selective_forwarder", "colluder", "flooder"];
    let mut text = format!(
        "name = \"safety-{seed}\"\nhorizon = 300\ninteraction_interval = 20\n\n[[domains]]\n\
         [domains.consensus]\nT1 = 2\nT2 = 60\nT3 = 30\nT4 = 40.0\nn_candidates = 5\nk_exec = 3\n"
    );
    let mut used = BTreeSet::new();
    let mut label = 0;
    for i in 0..n {
        let name = loop {
            label += 1;
            let name = format!("s{seed}-node{label}");
            if used.insert(KeyPair::from_label(&name).node_id()) {
                break name;
            }
        };
        let role = match i {
            0 => "cloud",
            i if i % 2 == 1 => "edge",
            _ => "terminal",
        };
        text.push_str(&format!("\n[[domains.nodes]]\nname = \"{name}\"\nrole = \"{role}\"\n"));
        if i >= n - f {
            let kind = kinds[rng.random_range(0..kinds.len())];
            text.push_str(&format!("behavior = \"{kind}\"\n"));
            match kind {
                "false_info" => text.push_str(&format!("onset = {}\n", rng.random_range(0..150))),
                "selective_forwarder" => text.push_str("forward_fraction = 0.5\n"),
                "colluder" => text.push_str("group = 1\n"),
                "flooder" => text.push_str("rate = 1\n"),
                _ => {}
            }
        }
    }
    ScenarioConfig::parse(&text).unwrap().validate().unwrap()
}

fn consensus_safety(record: &mut Vec<(String, String)>) -> Outcome {
    let mut epochs = 0;
    for seed in 0..20 {
        let sc = byzantine_scenario(seed);
        let out = netsim::run(&sc, seed);
        let d = sc.domains[0].id;
        let m = &out.metrics;
        ensure!(
            m.counter(d, "chain_disagreements") == 0,
            "seed {seed}: {} epoch boundaries with diverging honest chains",
            m.counter(d, "chain_disagreements")
        );
        ensure!(
            m.counter(d, "unresolved_forks") == 0,
            "seed {seed}: {} unresolved forks",
            m.counter(d, "unresolved_forks")
        );
        ensure!(m.counter(d, "blocks_committed") > 0, "seed {seed}: no progress");
        epochs += m
            .events
            .iter()
            .filter(|e| e.kind == "consensus" && e.detail == serde_json::json!("EpochStarted"))
            .count();
        record.push((format!("safety-{seed}"), csv_outputs(&out)));
    }
    Ok(format!("20 scenarios, {epochs} epoch boundaries, 0 disagreements, 0 unresolved forks"))
}

// ---- 6. figure reproduction ----

fn figure_reproduction(record: &mut Vec<(String, String)>) -> Outcome {
    let sc = load("figure1.toml");
    let onset = sc
        .domains
        .iter()
        .flat_map(|d| &d.nodes)
        .find_map(|n| match n.behavior {
            Behavior::FalseInfo { onset } => Some(onset),
            _ => None,
        })
        .expect("figure scenario has a false-info node");
    let fig = figure1(&sc, 10);
    let [c, r, p] = fig.final_values();
    ensure!(fig.ordering_holds(), "final constant={c} random={r} proposed={p}");
    for trace in &fig.proposed_traces {
        let after: Vec<f64> = trace.iter().filter(|(t, _)| *t >= onset).map(|(_, v)| *v).collect();
        for w in after.windows(2) {
            ensure!(w[1] <= w[0], "proposed trace rises after onset: {} -> {}", w[0], w[1]);
        }
    }
    record.push(("figure1".into(), fig.csv()));
    Ok(format!("constant={c:.2} random={r:.2} proposed={p:.2}, proposed non-increasing after tick {onset}"))
}

// ---- 7. DoS bound ----

fn dos_scenario() -> Scenario {
    let mut cfg = ScenarioConfig::load(&scenario_path("dos_flood.toml")).unwrap();
    cfg.domains[0].dos.refund = Some(0.0);
    cfg.validate().unwrap()
}

fn dos_bound(record: &mut Vec<(String, String)>) -> Outcome {
    let sc = dos_scenario();
    let d = &sc.domains[0];
    ensure!(
        (d.dos.initial_budget, d.dos.cost_per_block, d.dos.low_bound, d.refund) == (100.0, 5.0, 20.0, 0.0),
        "unexpected budget parameters {:?}",
        d.dos
    );
    let flooder = d
        .nodes
        .iter()
        .find(|n| matches!(n.behavior, Behavior::Flooder { .. }))
        .expect("flood scenario has a flooder")
        .id;
    let out = netsim::run(&sc, 0);
    let honest = honest_nodes(&out);
    let delivered: BTreeSet<Hash80> = out
        .deliveries
        .iter()
        .filter(|r| r.from == (d.id, flooder) && honest.contains(&r.to))
        .filter_map(|r| r.block)
        .collect();
    ensure!(delivered.len() == 16, "{} distinct flooder blocks reached honest nodes", delivered.len());
    let discarded = out.metrics.counter(d.id, "dos_discarded");
    ensure!(discarded > 0, "no broadcast was discarded");
    record.push(("dos".into(), csv_outputs(&out)));
    Ok(format!("16 flooder blocks delivered, {discarded} further broadcasts discarded"))
}

// ---- 8. isolation hygiene ----

fn isolation_hygiene(record: &mut Vec<(String, String)>) -> Outcome {
    let sc = load("isolation.toml");
    let out = netsim::run(&sc, 0);
    let honest = honest_nodes(&out);
    let mut since: BTreeMap<(DomainId, NodeId), u64> = BTreeMap::new();
    let mut checked_elections = 0;
    for e in &out.metrics.events {
        if e.kind != "consensus" {
            continue;
        }
        let action: ConsensusAction = serde_json::from_value(e.detail.clone()).unwrap();
        let members = match &action {
            ConsensusAction::Isolated { nodes } => {
                for n in nodes {
                    since.entry((e.domain, *n)).or_insert(e.tick);
                }
                continue;
            }
            ConsensusAction::Elected { candidates, executives } => {
                candidates.iter().chain(executives).copied().collect::<Vec<_>>()
            }
            ConsensusAction::ExecutivesReelected { executives } => executives.clone(),
            _ => continue,
        };
        checked_elections += 1;
        for n in members {
            ensure!(
                !since.contains_key(&(e.domain, n)),
                "isolated node {n} elected at tick {}",
                e.tick
            );
        }
    }
    ensure!(since.len() >= 2, "only {} nodes isolated", since.len());
    let mut later = 0;
    for a in &out.accepted {
        if let Some(t) = since.get(&(a.domain, a.author)) {
            if a.tick >= *t {
                ensure!(
                    !honest.contains(&(a.domain, a.by)),
                    "node {} accepted {} from isolated {} at tick {}",
                    a.by,
                    if a.block.is_some() { "a block" } else { "a transaction" },
                    a.author,
                    a.tick
                );
            }
        } else {
            later += 1;
        }
    }
    let violations = out.metrics.total("hygiene_violations");
    ensure!(violations == 0, "{violations} miner draws or committee picks included an isolated node");
    record.push(("isolation".into(), csv_outputs(&out)));
    Ok(format!(
        "{} isolated, {checked_elections} elections clean, {later} acceptances from active nodes only",
        since.len()
    ))
}

// ---- 9. checkpoint soundness ----

fn checkpoint_soundness() -> Outcome {
    let keys: Vec<KeyPair> = ["cp-a", "cp-b", "cp-c"].iter().map(|l| KeyPair::from_label(l)).collect();
    let mut registry = KeyRegistry::new();
    let mut ledger = ReputationLedger::new();
    for k in &keys {
        registry.register(k.clone()).unwrap();
        ledger.admit_node(k.node_id()).unwrap();
    }
    let block = |chain: &Chain, i: u64| {
        let miner = &keys[(i % 3) as usize];
        let tx = Transaction::signed(
            TxType::Update,
            &keys[((i + 1) % 3) as usize],
            miner.node_id(),
            Payload::from_slice(&i.to_be_bytes()).unwrap(),
        );
        lwchain::codec::Block::assemble(chain.tip().current_hash, Timestamp24::from_tick(i), vec![tx], vec![])
            .unwrap()
            .seal_with(miner)
    };
    let ctx = BlockContext::new(&registry, &ledger);
    let mut chain = Chain::new(ChainMode::Full);
    for i in 1..100 {
        let b = block(&chain, i);
        chain.validate_block(&b, &ctx).map_err(|e| format!("build block {i}: {e:?}"))?;
        chain.append(b).unwrap();
    }
    ensure!(chain.len() == 100, "built {} blocks", chain.len());
    let mut control = chain.clone();
    let released_entries = chain.releasable();
    let mut archive = MemoryArchive::new();
    let cp = chain.checkpoint_release(&mut archive).map_err(|e| e.to_string())?;
    let surviving = chain.len();
    ensure!(surviving <= 2, "{surviving} entries survive the release");
    ensure!(audit(&cp, &archive), "archive does not match the checkpoint");
    ensure!(
        summary_hash(&released_entries) == cp.summary_hash,
        "recomputed summary hash differs"
    );
    for i in 100..150 {
        let b = block(&control, i);
        let on_released = chain.validate_block(&b, &ctx);
        let on_control = control.validate_block(&b, &ctx);
        ensure!(on_released == on_control, "block {i}: {on_released:?} vs {on_control:?}");
        ensure!(on_control.is_ok(), "block {i} rejected: {on_control:?}");
        chain.append(b.clone()).unwrap();
        control.append(b).unwrap();
    }
    ensure!(chain.tip() == control.tip(), "tips diverged");
    ensure!(chain.verify_integrity(), "released chain fails integrity check");
    Ok(format!("released {} entries, {surviving} remain, 50 follow-up blocks agree", cp.released_count))
}

// ---- 10. cross-domain locality ----

fn cross_domain(record: &mut Vec<(String, String)>) -> Outcome {
    let sc = load("cross_domain.toml");
    let out = netsim::run(&sc, 0);
    ensure!(
        out.relay_deliveries.len() == sc.relays.len(),
        "{} of {} relays delivered",
        out.relay_deliveries.len(),
        sc.relays.len()
    );
    let unanchored = out.unanchored_relays();
    ensure!(unanchored.is_empty(), "{} relays lack a committed source block", unanchored.len());
    for r in &out.relay_deliveries {
        ensure!(
            sc.relays.iter().any(|s| s.from == r.from && s.to == r.to && s.payload == r.payload),
            "unexpected relay {:?}",
            r
        );
    }
    let direct = out
        .deliveries
        .iter()
        .filter(|d| d.from.0 != d.to.0)
        .filter(|d| {
            [d.from, d.to]
                .iter()
                .any(|(dom, n)| out.role_of(*dom, *n) != Some(Role::Cloud))
        })
        .count();
    ensure!(direct == 0, "{direct} direct cross-domain device messages");
    record.push(("cross_domain".into(), csv_outputs(&out)));
    Ok(format!("{} relays anchored, 0 direct cross-domain device messages", out.relay_deliveries.len()))
}

// ---- 11. determinism ----

fn determinism(first: &[(String, String)]) -> Outcome {
    let mut again: Vec<(String, String)> = Vec::new();
    for seed in 0..20 {
        let out = netsim::run(&byzantine_scenario(seed), seed);
        again.push((format!("safety-{seed}"), csv_outputs(&out)));
    }
    again.push(("figure1".into(), figure1(&load("figure1.toml"), 10).csv()));
    again.push(("dos".into(), csv_outputs(&netsim::run(&dos_scenario(), 0))));
    again.push(("isolation".into(), csv_outputs(&netsim::run(&load("isolation.toml"), 0))));
    again.push(("cross_domain".into(), csv_outputs(&netsim::run(&load("cross_domain.toml"), 0))));
    ensure!(first.len() == again.len(), "{} first runs, {} reruns", first.len(), again.len());
    for ((name, a), (_, b)) in first.iter().zip(&again) {
        ensure!(a == b, "{name}: CSV output differs between runs");
    }
    let bytes: usize = again.iter().map(|(_, s)| s.len()).sum();
    Ok(format!("{} runs, {bytes} CSV bytes identical", again.len()))
}

struct Suite {
    failed: Vec<usize>,
}

impl Suite {
    fn criterion(&mut self, number: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        match &result {
            Ok(detail) => println!("criterion {number:>2} {name}: PASS ({detail}; {elapsed:.2?})"),
            Err(why) => {
                println!("criterion {number:>2} {name}: FAIL ({why}; {elapsed:.2?})");
                self.failed.push(number);
            }
        }
    }
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let mut suite = Suite { failed: Vec::new() };
    let mut record = Vec::new();
    suite.criterion(1, "codec exactness", Some(secs(1)), codec_exactness);
    suite.criterion(2, "reputation oracle equivalence", Some(secs(5)), reputation_oracle);
    suite.criterion(3, "outlier resistance", None, outlier_resistance);
    suite.criterion(4, "epoch state machine traces", None, consensus_traces);
    suite.criterion(5, "consensus safety", Some(secs(30)), || consensus_safety(&mut record));
    suite.criterion(6, "figure reproduction", Some(secs(10)), || figure_reproduction(&mut record));
    suite.criterion(7, "DoS bound", None, || dos_bound(&mut record));
    suite.criterion(8, "isolation hygiene", None, || isolation_hygiene(&mut record));
    suite.criterion(9, "checkpoint soundness", None, checkpoint_soundness);
    suite.criterion(10, "cross-domain locality", None, || cross_domain(&mut record));
    suite.criterion(11, "determinism", None, || determinism(&record));
    assert!(suite.failed.is_empty(), "failed criteria: {:?}", suite.failed);
}

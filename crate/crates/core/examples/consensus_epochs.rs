//! Drive the epoch state machine by hand: one healthy epoch, then an epoch
//! that overruns T2, which halves every score, hands mining to random draws,
//! and finally isolates whoever is left below T4.
//!
//! cargo run --example consensus_epochs

use lwchain::codec::NodeId;
use lwchain::consensus::{ConsensusParams, ConsensusState, Role};
use lwchain::reputation::ReputationLedger;

fn main() {
    let params = ConsensusParams {
        counting_threshold: 1,
        epoch_duration: 10,
        fallback_duration: 5,
        isolation_threshold: 40.0,
        candidates: 3,
        executives: 2,
        edge_preference: 3.0,
    };
    let online = [
        (NodeId(1), Role::Cloud),
        (NodeId(2), Role::Edge),
        (NodeId(3), Role::Edge),
        (NodeId(4), Role::Terminal),
    ];
    let mut ledger = ReputationLedger::new();
    for (id, score) in [(1, 90.0), (2, 80.0), (3, 70.0), (4, 30.0)] {
        ledger.admit_node(NodeId(id)).unwrap();
        ledger.set_score(NodeId(id), score).unwrap();
    }

    let mut state = ConsensusState::new(42);
    // Rounds every tick finish the first epoch in time; rounds every five
    // ticks make the second one overrun.
    let ticks = [0, 1, 2, 3, 4, 9, 14, 19, 24, 26, 28, 30];
    for t in ticks {
        let out = state.tick(&params, &mut ledger, &online, t).unwrap();
        println!(
            "t={t:>2} miner={} via {:?} phase={:?}",
            out.decision.miner,
            out.decision.strategy_used,
            state.phase()
        );
        for a in &out.actions {
            println!("       {a:?}");
        }
    }
    println!("scores: {:?}", ledger.scores());
    println!("isolated: {:?}", ledger.isolated());
}

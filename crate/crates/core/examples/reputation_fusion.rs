//! Four raters score one device; one of them lies. Trimming drops the liar
//! and the fused score follows the honest majority.
//!
//! cargo run --example reputation_fusion

use lwchain::codec::NodeId;
use lwchain::reputation::{ReputationLedger, TransactionRecord};

fn main() {
    let device = NodeId(10);
    let raters = [NodeId(1), NodeId(2), NodeId(3), NodeId(4)];
    let mut ledger = ReputationLedger::new();
    ledger.admit_node(device).unwrap();
    for r in raters {
        ledger.admit_node(r).unwrap();
    }

    // Three honest raters see good service; rater 4 reports the worst quality.
    for (tick, quality) in [(2, 96.0), (5, 90.0), (8, 99.0)] {
        for r in &raters[..3] {
            ledger.record(*r, device, TransactionRecord::new(quality, 1.0, tick).unwrap()).unwrap();
        }
        ledger.record(raters[3], device, TransactionRecord::new(0.0, 1.0, tick).unwrap()).unwrap();
    }

    let now = 9;
    for (rater, score) in ledger.rater_scores(now, device).unwrap() {
        println!("pairwise score from {rater}: {score:.3}");
    }
    let fused = ledger.record_and_refresh(now, device).unwrap().unwrap();
    println!("fused reputation of {device}: {fused:.3}");
    println!("below an isolation threshold of 40: {}", fused < 40.0);
}

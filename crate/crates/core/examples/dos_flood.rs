//! A flooder broadcasts self-signed blocks every tick. Its broadcast budget
//! admits 16 blocks; with refunds switched off, nothing after that reaches
//! anyone.
//!
//! cargo run --example dos_flood

use std::collections::BTreeSet;
use std::path::PathBuf;

use lwchain::netsim::{self, Behavior, ScenarioConfig};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/dos_flood.toml");
    for refund in [None, Some(0.0)] {
        let mut cfg = ScenarioConfig::load(&path).unwrap();
        if refund.is_some() {
            cfg.domains[0].dos.refund = refund;
        }
        let scenario = cfg.validate().unwrap();
        let d = &scenario.domains[0];
        let flooder = d
            .nodes
            .iter()
            .find(|n| matches!(n.behavior, Behavior::Flooder { .. }))
            .unwrap();
        let out = netsim::run(&scenario, 0);
        let delivered: BTreeSet<_> = out
            .deliveries
            .iter()
            .filter(|r| r.from == (d.id, flooder.id))
            .filter_map(|r| r.block)
            .collect();
        println!(
            "refund {:>3} per {} rounds: {} flood blocks delivered, {} discarded, {} refunds",
            d.refund,
            d.refund_rounds,
            delivered.len(),
            out.metrics.counter(d.id, "dos_discarded"),
            out.metrics.counter(d.id, "refunds")
        );
    }
}

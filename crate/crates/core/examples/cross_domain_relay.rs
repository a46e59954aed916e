//! Two domains exchange messages. Devices never talk across the boundary;
//! their requests are committed in the home sub-chain, carried by the cloud
//! servers over the global chain, and injected into the target domain.
//!
//! cargo run --example cross_domain_relay [scenario.toml]

use std::path::PathBuf;

use lwchain::netsim::{self, ScenarioConfig};

fn main() {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/cross_domain.toml")
    });
    let scenario = ScenarioConfig::load(&path).unwrap().validate().unwrap();
    let out = netsim::run(&scenario, 0);

    for r in &out.relay_deliveries {
        println!(
            "t={:>3} {}:{} -> {}:{} {:?} (source block {}, global block {})",
            r.tick,
            r.from.0,
            r.from.1,
            r.to.0,
            r.to.1,
            String::from_utf8_lossy(&r.payload),
            r.source_block,
            r.global_block
        );
    }
    println!("relays delivered: {} of {}", out.relay_deliveries.len(), scenario.relays.len());
    println!("direct cross-domain device messages: {}", out.locality_violations().len());
    println!("relays without a committed source block: {}", out.unanchored_relays().len());
}

//! Reputation of a node that starts spreading false information, under a
//! fixed score, a random walk, and the reputation engine. Prints the
//! seed-averaged series every 100 ticks.
//!
//! cargo run --example figure1 [seeds]

use std::path::PathBuf;

use lwchain::cli::figure1;
use lwchain::netsim::ScenarioConfig;

fn main() {
    let seeds = std::env::args().nth(1).map_or(10, |s| s.parse().expect("seeds must be a number"));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/figure1.toml");
    let scenario = ScenarioConfig::load(&path).unwrap().validate().unwrap();
    let fig = figure1(&scenario, seeds);

    println!("{:>5} {:>9} {:>9} {:>9}", "tick", "constant", "random", "proposed");
    for (i, t) in fig.ticks.iter().enumerate() {
        if t % 100 == 0 {
            println!(
                "{t:>5} {:>9.2} {:>9.2} {:>9.2}",
                fig.series[0][i], fig.series[1][i], fig.series[2][i]
            );
        }
    }
    println!("proposed < random < constant: {}", fig.ordering_holds());
}

//! Command implementations behind the `lwchain` binary.
//!
//! Every command returns an [`ExitCode`]: 0 on success, 1 when the scenario
//! file is unusable, 2 when a run fails or writing the outputs fails.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;

use crate::netsim::{self, ConfigError, Mode, RunOutput, Scenario, ScenarioConfig};
use crate::reputation::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Config = 1,
    Runtime = 2,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

fn load(path: &Path) -> Result<Scenario, ConfigError> {
    ScenarioConfig::load(path)?.validate()
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::Config
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), ExitCode> {
    fs::write(dir.join(name), contents).map_err(|e| {
        eprintln!("error: writing {}: {e}", dir.join(name).display());
        ExitCode::Runtime
    })
}

fn prepare_out(dir: &Path) -> Result<(), ExitCode> {
    fs::create_dir_all(dir).map_err(|e| {
        eprintln!("error: creating {}: {e}", dir.display());
        ExitCode::Runtime
    })
}

/// Writes `reputation.csv`, `counters.csv` and `summary.txt` for one run,
/// plus `events.ndjson` when `events` is set.
pub fn write_run(out: &RunOutput, dir: &Path, events: bool) -> Result<(), ExitCode> {
    prepare_out(dir)?;
    write_file(dir, "reputation.csv", &out.metrics.reputation_csv())?;
    write_file(dir, "counters.csv", &out.metrics.counters_csv())?;
    write_file(dir, "summary.txt", &out.summary_text())?;
    if events {
        write_file(dir, "events.ndjson", &out.metrics.events_ndjson())?;
    }
    Ok(())
}

pub fn cmd_run(scenario_path: &Path, seed: u64, out_dir: &Path, events: bool) -> ExitCode {
    let scenario = match load(scenario_path) {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    let out = netsim::run(&scenario, seed);
    if let Err(code) = write_run(&out, out_dir, events) {
        return code;
    }
    print!("{}", out.summary_text());
    ExitCode::Success
}

/// Seed-averaged malicious reputation per sampling tick for each mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    pub ticks: Vec<Tick>,
    /// Indexed like [`Mode::ALL`].
    pub series: [Vec<f64>; 3],
    /// Per-seed proposed-mode traces, one per malicious node.
    pub proposed_traces: Vec<Vec<(Tick, f64)>>,
}

impl Figure1 {
    pub fn final_values(&self) -> [f64; 3] {
        self.series.each_ref().map(|s| s.last().copied().unwrap_or(f64::NAN))
    }

    /// Proposed below random below constant at the last sample.
    pub fn ordering_holds(&self) -> bool {
        let [c, r, p] = self.final_values();
        p < r && r < c
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("tick,constant,random,proposed\n");
        for (i, t) in self.ticks.iter().enumerate() {
            writeln!(out, "{t},{},{},{}", self.series[0][i], self.series[1][i], self.series[2][i]).unwrap();
        }
        out
    }
}

fn malicious_mean(out: &RunOutput, scenario: &Scenario) -> Vec<(Tick, f64)> {
    let bad = scenario.malicious();
    let traces: Vec<Vec<(Tick, f64)>> = bad.iter().map(|(d, n)| out.metrics.trace(*d, *n)).collect();
    let len = traces[0].len();
    (0..len)
        .map(|i| {
            let sum: f64 = traces.iter().map(|t| t[i].1).sum();
            (traces[0][i].0, sum / traces.len() as f64)
        })
        .collect()
}

/// Runs every mode for seeds `0..seeds`, each run on its own thread.
pub fn figure1(scenario: &Scenario, seeds: u64) -> Figure1 {
    let jobs: Vec<(usize, u64)> = (0..Mode::ALL.len()).flat_map(|m| (0..seeds).map(move |s| (m, s))).collect();
    let results: Vec<(usize, RunOutput)> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(m, s)| {
                let sc = scenario.with_mode(Mode::ALL[m]);
                scope.spawn(move || (m, netsim::run(&sc, s)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let bad = scenario.malicious();
    let mut sums: [Vec<(Tick, f64)>; 3] = Default::default();
    let mut proposed_traces = Vec::new();
    for (m, out) in &results {
        let mean = malicious_mean(out, scenario);
        if Mode::ALL[*m] == Mode::Proposed {
            proposed_traces.extend(bad.iter().map(|(d, n)| out.metrics.trace(*d, *n)));
        }
        if sums[*m].is_empty() {
            sums[*m] = mean.iter().map(|(t, _)| (*t, 0.0)).collect();
        }
        for (acc, (_, v)) in sums[*m].iter_mut().zip(&mean) {
            acc.1 += v;
        }
    }
    let ticks = sums[0].iter().map(|(t, _)| *t).collect();
    let series = sums.map(|s| s.into_iter().map(|(_, v)| v / seeds as f64).collect());
    Figure1 {
        ticks,
        series,
        proposed_traces,
    }
}

pub fn cmd_figure1(scenario_path: &Path, seeds: u64, out_dir: &Path) -> ExitCode {
    let scenario = match load(scenario_path) {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    if scenario.malicious().is_empty() {
        return config_failure(&ConfigError {
            path: "domains".into(),
            message: "figure1 needs at least one non-honest node".into(),
        });
    }
    if seeds == 0 {
        return config_failure(&ConfigError {
            path: "--seeds".into(),
            message: "must be at least 1".into(),
        });
    }
    if seeds == 1 {
        eprintln!("warning: a single seed makes the ordering check noisy");
    }
    let fig = figure1(&scenario, seeds);
    if let Err(code) = prepare_out(out_dir).and_then(|_| write_file(out_dir, "figure1.csv", &fig.csv())) {
        return code;
    }
    let [c, r, p] = fig.final_values();
    println!("final malicious reputation (mean of {seeds} seeds): constant={c:.4} random={r:.4} proposed={p:.4}");
    if fig.ordering_holds() {
        println!("PASS: proposed < random < constant");
        ExitCode::Success
    } else {
        println!("FAIL: expected proposed < random < constant");
        ExitCode::Runtime
    }
}

pub fn cmd_validate(scenario_path: &Path) -> ExitCode {
    match load(scenario_path) {
        Ok(s) => {
            print!("{}", s.effective_toml());
            ExitCode::Success
        }
        Err(e) => config_failure(&e),
    }
}

//! Reputation samples, counters and the optional event log.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::scenario::Mode;
use crate::codec::NodeId;
use crate::globalchain::DomainId;
use crate::reputation::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub tick: Tick,
    pub domain: DomainId,
    pub node: NodeId,
    pub reputation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub tick: Tick,
    pub domain: DomainId,
    pub kind: String,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub mode: Mode,
    pub samples: Vec<Sample>,
    pub counters: BTreeMap<(DomainId, String), u64>,
    pub events: Vec<EventRecord>,
}

impl MetricsLog {
    pub fn new(mode: Mode) -> Self {
        MetricsLog {
            mode,
            samples: Vec::new(),
            counters: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    pub fn add(&mut self, domain: DomainId, name: &str, n: u64) {
        *self.counters.entry((domain, name.to_string())).or_default() += n;
    }

    pub fn bump(&mut self, domain: DomainId, name: &str) {
        self.add(domain, name, 1);
    }

    pub fn counter(&self, domain: DomainId, name: &str) -> u64 {
        self.counters
            .get(&(domain, name.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Sum of a counter over all domains.
    pub fn total(&self, name: &str) -> u64 {
        self.counters
            .iter()
            .filter(|((_, n), _)| n == name)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn event(&mut self, tick: Tick, domain: DomainId, kind: &str, detail: serde_json::Value) {
        self.events.push(EventRecord {
            tick,
            domain,
            kind: kind.to_string(),
            detail,
        });
    }

    /// `(tick, reputation)` samples of one node.
    pub fn trace(&self, domain: DomainId, node: NodeId) -> Vec<(Tick, f64)> {
        self.samples
            .iter()
            .filter(|s| s.domain == domain && s.node == node)
            .map(|s| (s.tick, s.reputation))
            .collect()
    }

    pub fn reputation_csv(&self) -> String {
        let mut out = String::from("tick,node_id,reputation,mode\n");
        for s in &self.samples {
            writeln!(out, "{},{}:{},{},{}", s.tick, s.domain, s.node, s.reputation, self.mode).unwrap();
        }
        out
    }

    pub fn counters_csv(&self) -> String {
        let mut out = String::from("domain,counter,value\n");
        for ((d, name), v) in &self.counters {
            writeln!(out, "{d},{name},{v}").unwrap();
        }
        out
    }

    pub fn events_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event records serialize"));
            out.push('\n');
        }
        out
    }
}

use std::collections::BTreeMap;

use lwchain::codec::NodeId;
use lwchain::reputation::{fuse, pairwise_score, trim, PairHistory, ReputationLedger, TransactionRecord};
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixtures {
    cases: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    subject: u8,
    now: u64,
    priors: Vec<(u8, f64)>,
    histories: Vec<History>,
    pairwise: Vec<(u8, f64)>,
    trimmed: Vec<(u8, f64)>,
    fused: Option<f64>,
}

#[derive(Deserialize)]
struct History {
    rater: u8,
    records: Vec<(f64, f64, u64)>,
}

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

fn cases() -> Vec<Case> {
    let f: Fixtures = serde_json::from_str(include_str!("fixtures/reputation.json")).unwrap();
    f.cases
}

fn ids(v: &[(u8, f64)]) -> Vec<(NodeId, f64)> {
    v.iter().map(|&(n, s)| (NodeId(n), s)).collect()
}

fn assert_scores(got: &[(NodeId, f64)], want: &[(NodeId, f64)]) {
    assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
    for ((gn, gs), (wn, ws)) in got.iter().zip(want) {
        assert_eq!(gn, wn);
        assert!(close(*gs, *ws), "{gn}: {gs} vs {ws}");
    }
}

#[test]
fn pairwise_matches_reference() {
    for c in cases() {
        let mut got = Vec::new();
        for h in &c.histories {
            let mut ph = PairHistory::new(NodeId(h.rater), NodeId(c.subject));
            for &(q, w, t) in &h.records {
                ph.push(TransactionRecord::new(q, w, t).unwrap()).unwrap();
            }
            if let Some(s) = pairwise_score(&ph, c.now).unwrap() {
                got.push((NodeId(h.rater), s));
            }
        }
        got.sort_by_key(|(n, _)| *n);
        assert_scores(&got, &ids(&c.pairwise));
    }
}

#[test]
fn trim_and_fuse_match_reference() {
    for c in cases() {
        let trimmed = trim(&ids(&c.pairwise));
        assert_scores(&trimmed, &ids(&c.trimmed));
        let priors: BTreeMap<NodeId, f64> = ids(&c.priors).into_iter().collect();
        let fused = fuse(&priors, &ids(&c.trimmed)).unwrap();
        match (fused, c.fused) {
            (Some(a), Some(b)) => assert!(close(a, b), "{a} vs {b}"),
            (a, b) => assert_eq!(a, b),
        }
    }
}

#[test]
fn ledger_refresh_matches_reference() {
    for c in cases() {
        let mut ledger = ReputationLedger::new();
        ledger.admit_node(NodeId(c.subject)).unwrap();
        for &(n, p) in &c.priors {
            ledger.admit_node(NodeId(n)).unwrap();
            ledger.set_score(NodeId(n), p).unwrap();
        }
        for h in &c.histories {
            for &(q, w, t) in &h.records {
                ledger
                    .record(NodeId(h.rater), NodeId(c.subject), TransactionRecord::new(q, w, t).unwrap())
                    .unwrap();
            }
        }
        let fused = ledger.record_and_refresh(c.now, NodeId(c.subject)).unwrap();
        match (fused, c.fused) {
            (Some(a), Some(b)) => {
                assert!(close(a, b), "{a} vs {b}");
                assert_eq!(ledger.score(NodeId(c.subject)), Some(a));
            }
            (None, None) => assert_eq!(ledger.score(NodeId(c.subject)), Some(100.0)),
            (a, b) => panic!("{a:?} vs {b:?}"),
        }
    }
}

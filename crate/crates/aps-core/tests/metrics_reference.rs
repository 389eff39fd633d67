//! The tolerance-window confusion matrix against a literal enumerator.

// index loops below are literal transcriptions of the matrix cells
#![allow(clippy::needless_range_loop)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use aps_core::metrics::{average_risk, sample_confusion, ConfusionCounts};

/// Literal transcription of the windowed confusion cells, O(n * delta):
/// ground truth positive at t when any hazard lies in [t, t+delta]; then TP
/// iff any prediction in [g - delta, t] for the earliest such hazard g.
fn enumerate(pred: &[bool], truth: &[bool], delta: usize) -> ConfusionCounts {
    let n = truth.len();
    let mut out = ConfusionCounts::default();
    for t in 0..n {
        let mut g = None;
        for k in t..n.min(t + delta + 1) {
            if truth[k] {
                g = Some(k);
                break;
            }
        }
        match g {
            Some(g) => {
                let lo = g.saturating_sub(delta);
                let mut hit = false;
                for k in lo..=t {
                    if pred[k] {
                        hit = true;
                    }
                }
                if hit {
                    out.tp += 1;
                } else {
                    out.fn_ += 1;
                }
            }
            None => {
                if pred[t] {
                    out.fp += 1;
                } else {
                    out.tn += 1;
                }
            }
        }
    }
    out
}

#[test]
fn random_agreement_with_enumerator() {
    let mut rng = StdRng::seed_from_u64(31);
    for case in 0..1000 {
        let n = rng.gen_range(1..=200);
        let p_alert = rng.gen_range(0.0..0.5);
        let p_hazard = rng.gen_range(0.0..0.3);
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(p_alert)).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(p_hazard)).collect();
        let delta = rng.gen_range(0..=20);
        let fast = sample_confusion(&pred, &truth, delta).unwrap();
        let slow = enumerate(&pred, &truth, delta);
        assert_eq!(fast, slow, "case {case}: n={n} delta={delta}");
    }
}

#[test]
fn delta_zero_reduces_to_pointwise() {
    let mut rng = StdRng::seed_from_u64(32);
    for _ in 0..200 {
        let n = rng.gen_range(1..=100);
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let fast = sample_confusion(&pred, &truth, 0).unwrap();
        let mut pointwise = ConfusionCounts::default();
        for t in 0..n {
            match (pred[t], truth[t]) {
                (true, true) => pointwise.tp += 1,
                (true, false) => pointwise.fp += 1,
                (false, true) => pointwise.fn_ += 1,
                (false, false) => pointwise.tn += 1,
            }
        }
        assert_eq!(fast, pointwise);
    }
}

#[test]
fn derived_rates_match_counts_to_machine_precision() {
    let mut rng = StdRng::seed_from_u64(33);
    for _ in 0..100 {
        let c = ConfusionCounts {
            tp: rng.gen_range(0..1000),
            fp: rng.gen_range(0..1000),
            fn_: rng.gen_range(0..1000),
            tn: rng.gen_range(0..1000),
        };
        if c.total() == 0 {
            continue;
        }
        assert_eq!(c.f1(), 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64);
        assert_eq!(c.accuracy(), (c.tp + c.tn) as f64 / c.total() as f64);
    }
}

#[test]
fn average_risk_examples_exact() {
    assert_eq!(average_risk(10, &[], &[]), 0.0);
    assert_eq!(average_risk(10, &[6.0, 4.0], &[5.0]), 1.5);
    assert_eq!(average_risk(20, &[6.0, 4.0], &[5.0]), 0.75);
}

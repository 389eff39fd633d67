//! Evaluation metrics: tolerance-window sample confusion, two-region
//! simulation confusion, hazard coverage, timing, recovery, and the
//! campaign-average risk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw confusion counts with the derived rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// False positive rate FP / (FP + TN); zero on an empty denominator.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// False negative rate FN / (FN + TP).
    pub fn fnr(&self) -> f64 {
        ratio(self.fn_, self.fn_ + self.tp)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// F1 = 2TP / (2TP + FP + FN).
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Sample-level confusion with a tolerance window of `delta` samples.
///
/// A step is ground-truth positive when a hazard occurs within
/// `[t, t + delta]`. Such a step counts as a true positive when any
/// prediction fired inside the covering window `[g - delta, t]`, where `g`
/// is the earliest hazard in `[t, t + delta]` (the left-most window of
/// length `delta` ending at a positive ground truth that contains `t`).
/// Ground-truth-negative steps count point-wise: FP when the prediction
/// fired, TN otherwise. At `delta = 0` this is the standard point-wise
/// confusion matrix.
pub fn sample_confusion(pred: &[bool], truth: &[bool], delta: usize) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "prediction has {} samples, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    let n = truth.len();
    let mut out = ConfusionCounts::default();
    // next_pos[t]: earliest hazard index >= t
    let mut next_pos = vec![usize::MAX; n + 1];
    for t in (0..n).rev() {
        next_pos[t] = if truth[t] { t } else { next_pos[t + 1] };
    }
    // prefix count of predictions for O(1) window queries
    let mut pred_prefix = vec![0u64; n + 1];
    for t in 0..n {
        pred_prefix[t + 1] = pred_prefix[t] + u64::from(pred[t]);
    }
    let any_pred = |lo: usize, hi: usize| pred_prefix[hi + 1] > pred_prefix[lo];

    for t in 0..n {
        let g = next_pos[t];
        if g != usize::MAX && g <= t + delta {
            let lo = g.saturating_sub(delta);
            if any_pred(lo, t) {
                out.tp += 1;
            } else {
                out.fn_ += 1;
            }
        } else if pred[t] {
            out.fp += 1;
        } else {
            out.tn += 1;
        }
    }
    Ok(out)
}

/// Simulation-level confusion by fault region. The pre-fault region
/// contributes one FP unit when any alert fired there (nothing hazardous is
/// attributable before the fault), else one TN. The post-fault region (or
/// the whole trace when fault-free) contributes one unit by the usual
/// four-way rule on "any alert" vs "any hazard".
pub fn simulation_confusion(
    alerts: &[bool],
    hazards: &[bool],
    fault_step: Option<usize>,
) -> Result<ConfusionCounts> {
    if alerts.len() != hazards.len() {
        return Err(Error::invalid("alert/hazard series length mismatch"));
    }
    let n = alerts.len();
    let mut out = ConfusionCounts::default();
    let region2_start = match fault_step {
        Some(f) => {
            let f = f.min(n);
            if alerts[..f].iter().any(|a| *a) {
                out.fp += 1;
            } else {
                out.tn += 1;
            }
            f
        }
        None => 0,
    };
    let alert = alerts[region2_start..].iter().any(|a| *a);
    let hazard = hazards[region2_start..].iter().any(|h| *h);
    match (alert, hazard) {
        (true, true) => out.tp += 1,
        (true, false) => out.fp += 1,
        (false, true) => out.fn_ += 1,
        (false, false) => out.tn += 1,
    }
    Ok(out)
}

/// Fraction of fault-activated runs that became hazardous.
pub fn hazard_coverage(hazardous_faulted: usize, faulted: usize) -> Result<f64> {
    if faulted == 0 {
        return Err(Error::invalid("hazard coverage needs at least one faulted run"));
    }
    Ok(hazardous_faulted as f64 / faulted as f64)
}

/// Timing of one hazardous trace under one monitor.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct TraceTiming {
    /// Fault activation to hazard onset, minutes.
    pub tth_min: Option<f64>,
    /// Hazard onset minus first alert at or after the fault, minutes;
    /// positive means early detection.
    pub reaction_min: Option<f64>,
    /// Detection no later than the hazard onset.
    pub early: Option<bool>,
}

/// Compute TTH and reaction time from step indices. `first_alert` must
/// already be restricted to alerts at or after the fault activation
/// (earlier alerts are false-positive material, not detections).
pub fn trace_timing(
    hazard_onset: Option<usize>,
    fault_step: Option<usize>,
    first_alert: Option<usize>,
    dt_min: f64,
) -> TraceTiming {
    let mut out = TraceTiming::default();
    if let (Some(h), Some(f)) = (hazard_onset, fault_step) {
        out.tth_min = Some((h as f64 - f as f64) * dt_min);
    }
    if let (Some(h), Some(d)) = (hazard_onset, first_alert) {
        let reaction = (h as f64 - d as f64) * dt_min;
        out.reaction_min = Some(reaction);
        out.early = Some(reaction >= 0.0);
    }
    out
}

/// Recovery across paired campaigns: fraction of baseline hazards absent
/// under mitigation, plus the count of hazards the mitigation introduced.
/// Pairs are (baseline hazardous, mitigated hazardous) per scenario.
pub fn recovery_rate(pairs: &[(bool, bool)]) -> (f64, usize) {
    let baseline = pairs.iter().filter(|(b, _)| *b).count();
    let prevented = pairs.iter().filter(|(b, m)| *b && !*m).count();
    let new_hazards = pairs.iter().filter(|(b, m)| !*b && *m).count();
    let rate = if baseline == 0 { 0.0 } else { prevented as f64 / baseline as f64 };
    (rate, new_hazards)
}

/// Campaign-average risk: the mean risk indices of the missed hazards and
/// of the mitigation-induced hazards, summed and normalized by the total
/// number of simulations.
pub fn average_risk(n_simulations: usize, fn_risks: &[f64], induced_risks: &[f64]) -> f64 {
    if n_simulations == 0 {
        return 0.0;
    }
    (fn_risks.iter().sum::<f64>() + induced_risks.iter().sum::<f64>()) / n_simulations as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_negative_all_quiet() {
        let c = sample_confusion(&[false; 20], &[false; 20], 12).unwrap();
        assert_eq!(c, ConfusionCounts { tn: 20, ..Default::default() });
        assert_eq!(c.accuracy(), 1.0);
        assert_eq!(c.f1(), 0.0);
    }

    #[test]
    fn early_alert_inside_tolerance_counts() {
        // alert at t=1, hazard at t=3, delta=2: every ground-truth-positive
        // step is covered by the alert
        let mut pred = vec![false; 6];
        pred[1] = true;
        let mut truth = vec![false; 6];
        truth[3] = true;
        let c = sample_confusion(&pred, &truth, 2).unwrap();
        // GT-positive steps: t=1,2,3 (hazard within [t, t+2]); all TP
        assert_eq!(c.tp, 3);
        assert_eq!(c.fn_, 0);
        assert_eq!(c.fp, 0);
        assert_eq!(c.tn, 3);
    }

    #[test]
    fn alert_without_upcoming_hazard_is_fp() {
        let mut pred = vec![false; 10];
        pred[5] = true;
        let truth = vec![false; 10];
        let c = sample_confusion(&pred, &truth, 3).unwrap();
        assert_eq!(c.fp, 1);
        assert_eq!(c.tn, 9);
    }

    #[test]
    fn delta_zero_is_pointwise() {
        let pred = [true, false, true, true, false];
        let truth = [true, true, false, true, false];
        let c = sample_confusion(&pred, &truth, 0).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 1 });
    }

    #[test]
    fn derived_rates_recompute_from_counts() {
        let c = ConfusionCounts { tp: 30, fp: 10, fn_: 5, tn: 55 };
        assert_eq!(c.fpr(), 10.0 / 65.0);
        assert_eq!(c.fnr(), 5.0 / 35.0);
        assert_eq!(c.accuracy(), 85.0 / 100.0);
        assert_eq!(c.f1(), 60.0 / 75.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(sample_confusion(&[true], &[true, false], 0).is_err());
    }

    #[test]
    fn simulation_regions() {
        // hazardous trace, first alert after the fault: TN region 1, TP region 2
        let mut alerts = vec![false; 20];
        alerts[12] = true;
        let mut hazards = vec![false; 20];
        hazards[15] = true;
        let c = simulation_confusion(&alerts, &hazards, Some(10)).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, tn: 1, ..Default::default() });

        // alert before the fault on a clean prefix: FP region 1
        let mut alerts = vec![false; 20];
        alerts[3] = true;
        let c = simulation_confusion(&alerts, &hazards, Some(10)).unwrap();
        assert_eq!(c, ConfusionCounts { fp: 1, fn_: 1, ..Default::default() });

        // no alerts, hazard present: FN region 2
        let c = simulation_confusion(&[false; 20], &hazards, Some(10)).unwrap();
        assert_eq!(c, ConfusionCounts { fn_: 1, tn: 1, ..Default::default() });

        // fault-free trace is a single region
        let c = simulation_confusion(&[false; 20], &[false; 20], None).unwrap();
        assert_eq!(c, ConfusionCounts { tn: 1, ..Default::default() });
    }

    #[test]
    fn coverage_fractions() {
        assert_eq!(hazard_coverage(10, 10).unwrap(), 1.0);
        assert_eq!(hazard_coverage(0, 10).unwrap(), 0.0);
        assert_eq!(hazard_coverage(3, 10).unwrap(), 0.3);
        assert!(hazard_coverage(0, 0).is_err());
    }

    #[test]
    fn timing_rules() {
        // alert exactly at the hazard: zero reaction, still early
        let t = trace_timing(Some(20), Some(10), Some(20), 5.0);
        assert_eq!(t.tth_min, Some(50.0));
        assert_eq!(t.reaction_min, Some(0.0));
        assert_eq!(t.early, Some(true));

        // late alert: negative reaction, not early
        let t = trace_timing(Some(20), Some(10), Some(25), 5.0);
        assert_eq!(t.reaction_min, Some(-25.0));
        assert_eq!(t.early, Some(false));

        // early detection
        let t = trace_timing(Some(30), Some(10), Some(14), 5.0);
        assert_eq!(t.reaction_min, Some(80.0));
        assert_eq!(t.early, Some(true));

        // no detection: no reaction time
        let t = trace_timing(Some(30), Some(10), None, 5.0);
        assert_eq!(t.tth_min, Some(100.0));
        assert_eq!(t.reaction_min, None);
    }

    #[test]
    fn recovery_arithmetic() {
        // identical campaigns: nothing prevented, nothing induced
        let pairs: Vec<(bool, bool)> = vec![(true, true), (false, false), (true, true)];
        assert_eq!(recovery_rate(&pairs), (0.0, 0));

        // all baseline hazards prevented
        let pairs = vec![(true, false), (true, false), (false, false)];
        assert_eq!(recovery_rate(&pairs), (1.0, 0));

        // 54 of 100 prevented, 8 induced
        let mut pairs = Vec::new();
        pairs.extend(std::iter::repeat_n((true, false), 54));
        pairs.extend(std::iter::repeat_n((true, true), 46));
        pairs.extend(std::iter::repeat_n((false, true), 8));
        pairs.extend(std::iter::repeat_n((false, false), 42));
        let (rate, new) = recovery_rate(&pairs);
        assert!((rate - 0.54).abs() < 1e-12);
        assert_eq!(new, 8);
    }

    #[test]
    fn average_risk_arithmetic() {
        assert_eq!(average_risk(10, &[], &[]), 0.0);
        assert_eq!(average_risk(10, &[6.0, 4.0], &[5.0]), 1.5);
        // doubling N with no new bad cases halves the value
        assert_eq!(average_risk(20, &[6.0, 4.0], &[5.0]), 0.75);
    }
}

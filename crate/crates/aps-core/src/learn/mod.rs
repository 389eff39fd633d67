//! Threshold learning for the context rules.
//!
//! Hazardous traces are mined for the instants where a rule's non-slot
//! context held, the rule's own action was observed, and a matching hazard
//! followed later in the trace. The slot signal sampled at those instants
//! forms the training set; the threshold minimizes the mean tight
//! exponential loss of the margins subject to every margin staying
//! non-negative, which the optimizer's box bound enforces exactly at the
//! binding sample.

mod lbfgsb;
mod tmee;

pub use lbfgsb::{minimize, Convergence, IterRecord, OptimizerConfig};
pub use tmee::{tmee, tmee_grad};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scs::{classify_action, context_of, SlotOrientation, SlotSignal, UcasRule};
use crate::sim::Trace;

/// Training samples for one rule's slot.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub rule_id: u8,
    pub slot_name: String,
    pub orientation: SlotOrientation,
    pub samples: Vec<f64>,
}

/// Learning context shared by extraction and fitting.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub bgt: f64,
    pub diob_eps: f64,
    pub epsilon_action: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            bgt: crate::scs::DEFAULT_BGT,
            diob_eps: crate::scs::DEFAULT_DIOB_EPS,
            epsilon_action: 0.05,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// Collect the slot-signal samples for `rule` from labeled traces: for each
/// hazardous trace whose onset hazard matches the rule's, every instant up
/// to the onset where the non-slot context held and the observed action
/// classified to the rule's action. Instants after the onset are excluded —
/// an unsafe action must precede the hazard it leads to, and recovery-phase
/// contexts would otherwise drag the thresholds loose.
pub fn extract_training_set(traces: &[&Trace], rule: &UcasRule, cfg: &LearnConfig) -> TrainingSet {
    let mut samples = Vec::new();
    // Required-action rules threshold the glucose itself; their bound is a
    // clinical constant, not a data-driven quantity. The pre-onset suspend
    // envelope would otherwise stretch the stop threshold far above the
    // hypoglycemic range. They stay at the no-learning default.
    if rule.required_action {
        return TrainingSet {
            rule_id: rule.id,
            slot_name: rule.slot_name.to_string(),
            orientation: rule.slot_orientation,
            samples,
        };
    }
    for trace in traces {
        let Some((onset, onset_type)) = trace.hazard_onset() else { continue };
        if onset_type != rule.hazard {
            continue;
        }
        let bg = trace.true_bg();
        let iob = trace.iob();
        let delivered = trace.delivered();
        let basal = trace.header.scenario.controller_cfg.basal_rate;
        let dt = trace.header.scenario.dt_min;
        #[allow(clippy::needless_range_loop)] // t indexes three parallel series
        for t in 0..=onset {
            let cx = context_of(&bg, &iob, dt, t);
            if !rule.nonslot_context_holds(&cx, cfg.bgt, cfg.diob_eps) {
                continue;
            }
            if classify_action(delivered[t], basal, cfg.epsilon_action) != rule.action {
                continue;
            }
            samples.push(match rule.slot_signal {
                SlotSignal::Iob => cx.iob,
                SlotSignal::Bg => cx.bg,
            });
        }
    }
    TrainingSet {
        rule_id: rule.id,
        slot_name: rule.slot_name.to_string(),
        orientation: rule.slot_orientation,
        samples,
    }
}

/// Outcome of fitting one slot.
#[derive(Debug, Clone)]
pub struct ThresholdFit {
    pub beta: f64,
    pub convergence: Convergence,
}

/// Span of the search box past the binding sample. The loss minimum sits
/// within one unit of the bound, so this never binds.
const FIT_BOX_SPAN: f64 = 16.0;

/// Fit the threshold by minimizing the mean TMEE of the margins subject to
/// every margin staying non-negative. For `<` slots the margin is
/// `beta - sample` and feasibility pins `beta >= max(samples)`; `>` slots
/// mirror it.
pub fn fit_threshold(set: &TrainingSet, cfg: &LearnConfig) -> Result<ThresholdFit> {
    if set.samples.is_empty() {
        return Err(Error::EmptyTrainingSet(set.slot_name.clone()));
    }
    let n = set.samples.len() as f64;
    let samples = set.samples.clone();
    let (bounds, x0): ((f64, f64), f64) = match set.orientation {
        SlotOrientation::Lt => {
            let lo = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ((lo, lo + FIT_BOX_SPAN), lo + 0.25)
        }
        SlotOrientation::Gt => {
            let hi = samples.iter().copied().fold(f64::INFINITY, f64::min);
            ((hi - FIT_BOX_SPAN, hi), hi - 0.25)
        }
    };
    let orientation = set.orientation;
    let margin = move |beta: f64, sample: f64| match orientation {
        SlotOrientation::Lt => beta - sample,
        SlotOrientation::Gt => sample - beta,
    };
    let dmargin_dbeta = match orientation {
        SlotOrientation::Lt => 1.0,
        SlotOrientation::Gt => -1.0,
    };
    let objective = {
        let samples = samples.clone();
        move |x: &[f64]| samples.iter().map(|s| tmee(margin(x[0], *s))).sum::<f64>() / n
    };
    let gradient = {
        let samples = samples.clone();
        move |x: &[f64]| {
            vec![samples.iter().map(|s| tmee_grad(margin(x[0], *s))).sum::<f64>() / n * dmargin_dbeta]
        }
    };
    let convergence = minimize(objective, gradient, &[x0], &[bounds], &cfg.optimizer)?;
    Ok(ThresholdFit { beta: convergence.x[0], convergence })
}

/// A learned threshold set with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub patient: String,
    pub fold: usize,
    /// SHA-256 over the sorted training scenario ids.
    pub training_hash: String,
    /// Slot name to learned value. Unlearnable slots carry their
    /// no-learning default and are listed in `unlearnable`.
    pub slots: BTreeMap<String, f64>,
    pub unlearnable: Vec<String>,
}

impl ThresholdSet {
    /// Finite-only view for serialization-safe storage: infinities from the
    /// no-learning defaults are kept in memory but JSON files store a large
    /// sentinel; see `io::save_thresholds`.
    pub fn resolved_slots(&self) -> BTreeMap<String, f64> {
        self.slots.clone()
    }
}

/// Per-slot convergence log rows for the learn stage CSV.
#[derive(Debug, Clone)]
pub struct SlotConvergence {
    pub slot_name: String,
    pub records: Vec<IterRecord>,
}

/// Learn every rule's slot for one patient from its training traces.
/// Rules with no qualifying samples keep the no-learning default and are
/// reported as unlearnable.
pub fn learn_thresholds(
    patient: &str,
    fold: usize,
    training: &[&Trace],
    cfg: &LearnConfig,
) -> Result<(ThresholdSet, Vec<SlotConvergence>)> {
    let mut slots = crate::scs::cawot_slots();
    let mut unlearnable = Vec::new();
    let mut logs = Vec::new();
    for rule in crate::scs::default_ruleset() {
        let set = extract_training_set(training, &rule, cfg);
        if set.samples.is_empty() {
            unlearnable.push(rule.slot_name.to_string());
            continue;
        }
        let fit = fit_threshold(&set, cfg)?;
        slots.insert(rule.slot_name.to_string(), fit.beta);
        logs.push(SlotConvergence {
            slot_name: rule.slot_name.to_string(),
            records: fit.convergence.history,
        });
    }
    let mut ids: Vec<&str> = training.iter().map(|t| t.header.scenario.id.as_str()).collect();
    ids.sort_unstable();
    let mut hasher = Sha256::new();
    for id in &ids {
        hasher.update(id.as_bytes());
        hasher.update(b"\n");
    }
    Ok((
        ThresholdSet {
            patient: patient.to_string(),
            fold,
            training_hash: format!("{:x}", hasher.finalize()),
            slots,
            unlearnable,
        },
        logs,
    ))
}

/// Deterministic fold assignment: scenario ids are sorted, shuffled with the
/// seeded generator, and dealt round-robin into `k` folds.
pub fn assign_folds(scenario_ids: &[String], k: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("need k >= 2 folds, got {k}")));
    }
    let mut ids: Vec<String> = scenario_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    Ok(ids.into_iter().enumerate().map(|(i, id)| (id, i % k)).collect())
}

/// Cross-validation output: the fold map plus per-(fold, patient) learned
/// thresholds.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: BTreeMap<String, usize>,
    pub k: usize,
    pub seed: u64,
    /// Keyed by (fold, patient).
    pub thresholds: BTreeMap<(usize, String), ThresholdSet>,
    pub convergence: Vec<(usize, String, SlotConvergence)>,
}

/// K-fold threshold learning over a labeled campaign: for every fold, each
/// patient's thresholds are learned from that patient's hazardous traces in
/// the other folds.
pub fn cross_validate(traces: &[Trace], k: usize, seed: u64, cfg: &LearnConfig) -> Result<CvOutcome> {
    let hazardous = traces.iter().filter(|t| t.hazard_onset().is_some()).count();
    if hazardous < k {
        return Err(Error::invalid(format!(
            "cross-validation needs at least {k} hazardous traces, found {hazardous}"
        )));
    }
    let ids: Vec<String> = traces.iter().map(|t| t.header.scenario.id.clone()).collect();
    let folds = assign_folds(&ids, k, seed)?;

    let mut patients: Vec<String> = traces.iter().map(|t| t.header.scenario.patient.clone()).collect();
    patients.sort_unstable();
    patients.dedup();

    let mut thresholds = BTreeMap::new();
    let mut convergence = Vec::new();
    for fold in 0..k {
        for patient in &patients {
            let training: Vec<&Trace> = traces
                .iter()
                .filter(|t| {
                    t.header.scenario.patient == *patient
                        && folds.get(&t.header.scenario.id) != Some(&fold)
                        && t.hazard_onset().is_some()
                })
                .collect();
            let (set, logs) = learn_thresholds(patient, fold, &training, cfg)?;
            for log in logs {
                convergence.push((fold, patient.clone(), log));
            }
            thresholds.insert((fold, patient.clone()), set);
        }
    }
    Ok(CvOutcome { folds, k, seed, thresholds, convergence })
}

//! Campaign pipeline stages: scenario generation, simulation, labeling,
//! threshold learning, offline monitor evaluation, mitigation studies, and
//! report emission. The CLI is a thin wrapper over these functions; every
//! stage is deterministic under a fixed seed and writes a manifest into its
//! output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::fault::{self, FaultKindName, FaultTarget, FaultTiming};
use crate::glucose::{self, PatientParams};
use crate::io::{self, PatientProfile};
use crate::learn::{self, LearnConfig, ThresholdSet};
use crate::metrics::{self, ConfusionCounts};
use crate::monitor::{self, GuidelineConfig, Monitor, MonitorBuild, MpcMonitor};
use crate::risk::{self, Hazard, LabelParams};
use crate::sim::{self, ScenarioConfig, Trace};

/// Campaign description: patients crossed with initial conditions and a
/// fault grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSpec {
    /// Profile names; empty selects every shipped profile.
    pub patients: Vec<String>,
    pub initial_bg: Vec<f64>,
    pub kinds: Vec<FaultKindName>,
    pub targets: Vec<FaultTarget>,
    pub value_indices: Vec<u32>,
    pub timings: Vec<FaultTiming>,
    pub seed: u64,
    pub include_fault_free: bool,
    pub controller: String,
    pub target_bg: f64,
    pub correction_factor: f64,
    pub max_rate: f64,
    pub dia_min: f64,
    pub epsilon_action: f64,
    pub hypo_cutoff: f64,
    pub steps: usize,
    pub dt_min: f64,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            patients: Vec::new(),
            initial_bg: sim::default_initial_bg(),
            kinds: fault::ALL_KIND_NAMES.to_vec(),
            targets: vec![FaultTarget::ControllerGlucoseInput, FaultTarget::CommandOutput],
            value_indices: (0..7).collect(),
            timings: fault::default_timings(),
            seed: 7,
            include_fault_free: true,
            controller: "openaps-like".into(),
            target_bg: crate::scs::DEFAULT_BGT,
            correction_factor: 40.0,
            max_rate: 10.0,
            dia_min: 240.0,
            epsilon_action: 0.05,
            hypo_cutoff: 70.0,
            steps: sim::DEFAULT_STEPS,
            dt_min: sim::DEFAULT_DT_MIN,
        }
    }
}

impl CampaignSpec {
    pub fn load(path: &Path) -> Result<CampaignSpec> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn short_target(t: FaultTarget) -> &'static str {
    match t {
        FaultTarget::ControllerGlucoseInput => "glu",
        FaultTarget::ControllerIob => "iob",
        FaultTarget::CommandOutput => "cmd",
    }
}

/// Expand the campaign into concrete scenarios, one per (patient, initial
/// BG, fault-grid cell), plus one fault-free scenario per (patient, initial
/// BG) when enabled. Deterministic: the order is the nesting order.
pub fn generate_scenarios(
    spec: &CampaignSpec,
    profiles: &[PatientProfile],
) -> Result<Vec<ScenarioConfig>> {
    let selected: Vec<&PatientProfile> = if spec.patients.is_empty() {
        profiles.iter().collect()
    } else {
        spec.patients
            .iter()
            .map(|name| {
                profiles
                    .iter()
                    .find(|p| &p.name == name)
                    .ok_or_else(|| Error::config(format!("unknown patient `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if selected.is_empty() {
        return Err(Error::config("campaign selects no patients"));
    }
    let faults = fault::expand_fault_grid(&spec.kinds, &spec.targets, &spec.value_indices, &spec.timings)?;

    let mut out = Vec::new();
    for profile in &selected {
        let basal_uu = glucose::steady_basal(&profile.params, spec.target_bg)?;
        let basal_uh = basal_uu * 60.0 / 1.0e6;
        let controller_cfg = ControllerConfig {
            basal_rate: basal_uh,
            correction_factor: spec.correction_factor,
            target_bg: spec.target_bg,
            max_rate: spec.max_rate,
            dia_min: spec.dia_min,
            epsilon_action: spec.epsilon_action,
            hypo_cutoff: spec.hypo_cutoff,
        };
        controller_cfg
            .validate()
            .map_err(|e| Error::config(format!("profile {}: {e}", profile.name)))?;
        for bg in &spec.initial_bg {
            let mut serial = 0usize;
            if spec.include_fault_free {
                out.push(ScenarioConfig {
                    id: format!("bg{:03}_{:04}_none", *bg as i64, serial),
                    patient: profile.name.clone(),
                    initial_bg: *bg,
                    controller: spec.controller.clone(),
                    controller_cfg: controller_cfg.clone(),
                    fault: None,
                    monitor: None,
                    mitigate: false,
                    seed: spec.seed,
                    steps: spec.steps,
                    dt_min: spec.dt_min,
                });
            }
            for f in &faults {
                serial += 1;
                out.push(ScenarioConfig {
                    id: format!(
                        "bg{:03}_{:04}_{}_{}_t{}_d{}",
                        *bg as i64,
                        serial,
                        f.kind.slug(),
                        short_target(f.target),
                        f.trigger_min as i64,
                        f.duration_min as i64
                    ),
                    patient: profile.name.clone(),
                    initial_bg: *bg,
                    controller: spec.controller.clone(),
                    controller_cfg: controller_cfg.clone(),
                    fault: Some(f.clone()),
                    monitor: None,
                    mitigate: false,
                    seed: spec.seed,
                    steps: spec.steps,
                    dt_min: spec.dt_min,
                });
            }
        }
    }
    Ok(out)
}

/// Resolves the right monitor instance for each scenario: learned
/// thresholds are selected by the scenario's held-out fold, guideline
/// percentiles by patient.
pub struct MonitorProvider {
    name: String,
    base: MonitorBuild,
    folds: Option<BTreeMap<String, usize>>,
    thresholds: Option<BTreeMap<(usize, String), ThresholdSet>>,
    guideline: Option<BTreeMap<String, GuidelineConfig>>,
    mpc_params: Option<PatientParams>,
}

impl MonitorProvider {
    pub fn new(name: &str, base: MonitorBuild) -> Self {
        MonitorProvider {
            name: name.to_string(),
            base,
            folds: None,
            thresholds: None,
            guideline: None,
            mpc_params: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Attach a learn-stage output directory (folds.json + thresholds/).
    pub fn with_learn_dir(mut self, dir: &Path) -> Result<Self> {
        let folds = io::load_folds(&dir.join("folds.json"))?;
        let mut thresholds = BTreeMap::new();
        for fold in 0..folds.k {
            let fold_dir = dir.join("thresholds").join(format!("fold{fold}"));
            for entry in fs::read_dir(&fold_dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    let set = io::load_thresholds(&path)?;
                    thresholds.insert((fold, set.patient.clone()), set);
                }
            }
        }
        self.folds = Some(folds.assignment);
        self.thresholds = Some(thresholds);
        Ok(self)
    }

    /// Attach in-memory cross-validation output.
    pub fn with_cv(mut self, cv: &learn::CvOutcome) -> Self {
        self.folds = Some(cv.folds.clone());
        self.thresholds = Some(cv.thresholds.clone());
        self
    }

    /// Derive guideline percentile bounds from the fault-free traces of a
    /// campaign, per patient.
    pub fn with_percentiles_from(mut self, traces: &[Trace], alpha_min: f64) -> Result<Self> {
        let mut by_patient: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for t in traces {
            if t.header.scenario.fault.is_none() && t.header.valid {
                by_patient
                    .entry(t.header.scenario.patient.clone())
                    .or_default()
                    .extend(t.true_bg());
            }
        }
        if by_patient.is_empty() {
            return Err(Error::config(
                "guideline percentiles need fault-free traces in the campaign",
            ));
        }
        let mut out = BTreeMap::new();
        for (patient, mut samples) in by_patient {
            samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lambda10 = percentile(&samples, 10.0);
            let lambda90 = percentile(&samples, 90.0);
            out.insert(patient, GuidelineConfig { lambda10, lambda90, alpha_min });
        }
        self.guideline = Some(out);
        Ok(self)
    }

    /// Population internal model for the MPC monitor: the mean profile.
    pub fn with_population_from(mut self, profiles: &[PatientProfile]) -> Result<Self> {
        let params: Vec<PatientParams> = profiles.iter().map(|p| p.params.clone()).collect();
        self.mpc_params = Some(
            MpcMonitor::population_params(&params)
                .ok_or_else(|| Error::config("population model needs at least one profile"))?,
        );
        Ok(self)
    }

    pub fn monitor_for(&self, scenario: &ScenarioConfig) -> Result<Box<dyn Monitor>> {
        let mut build = self.base.clone();
        build.bgt = scenario.controller_cfg.target_bg;
        build.epsilon_action = scenario.controller_cfg.epsilon_action;
        build.dt_min = scenario.dt_min;
        build.mpc_horizon_min = scenario.controller_cfg.dia_min;
        match self.name.as_str() {
            "cawt" => {
                let folds = self
                    .folds
                    .as_ref()
                    .ok_or_else(|| Error::config("cawt needs a learn-stage output (folds + thresholds)"))?;
                let fold = *folds.get(&scenario.id).ok_or_else(|| {
                    Error::config(format!("scenario `{}` missing from the fold assignment", scenario.id))
                })?;
                let sets = self.thresholds.as_ref().expect("folds imply thresholds");
                let set = sets.get(&(fold, scenario.patient.clone())).ok_or_else(|| {
                    Error::config(format!(
                        "no thresholds for patient `{}` fold {fold}",
                        scenario.patient
                    ))
                })?;
                build.slots = Some(set.slots.clone());
            }
            "guideline" => {
                let all = self
                    .guideline
                    .as_ref()
                    .ok_or_else(|| Error::config("guideline needs percentile bounds"))?;
                build.guideline = Some(
                    all.get(&scenario.patient)
                        .ok_or_else(|| {
                            Error::config(format!(
                                "no fault-free percentiles for patient `{}`",
                                scenario.patient
                            ))
                        })?
                        .clone(),
                );
            }
            "mpc" => {
                build.mpc_params = self.mpc_params.clone();
            }
            _ => {}
        }
        monitor::build_monitor(&self.name, &build)
    }
}

/// Nearest-rank percentile of an ascending-sorted sample.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Run scenarios, optionally under a monitor and mitigation. Order-preserving
/// and parallel; per-scenario errors are collected, not fatal.
pub fn run_scenarios(
    scenarios: &[ScenarioConfig],
    params_by_patient: &BTreeMap<String, PatientParams>,
    provider: Option<&MonitorProvider>,
    mitigate: bool,
) -> (Vec<Trace>, Vec<(String, String)>) {
    let results: Vec<std::result::Result<Trace, (String, String)>> = scenarios
        .par_iter()
        .map(|scenario| {
            let mut scenario = scenario.clone();
            scenario.monitor = provider.map(|p| p.name.clone());
            scenario.mitigate = mitigate;
            let params = params_by_patient
                .get(&scenario.patient)
                .ok_or_else(|| (scenario.id.clone(), format!("unknown patient `{}`", scenario.patient)))?;
            let mut mon = match provider {
                Some(p) => Some(p.monitor_for(&scenario).map_err(|e| (scenario.id.clone(), e.to_string()))?),
                None => None,
            };
            let result = sim::run(&scenario, params, mon.as_deref_mut());
            drop(mon);
            result.map_err(|e| (scenario.id.clone(), e.to_string()))
        })
        .collect();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(t) => traces.push(t),
            Err(f) => failures.push(f),
        }
    }
    (traces, failures)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub scenarios: usize,
    pub traces_written: usize,
    pub invalid_traces: usize,
    pub failures: Vec<(String, String)>,
}

/// Simulate a campaign into `out_dir`.
pub fn simulate_campaign(
    spec: &CampaignSpec,
    profiles: &[PatientProfile],
    provider: Option<&MonitorProvider>,
    mitigate: bool,
    out_dir: &Path,
) -> Result<SimulateSummary> {
    let scenarios = generate_scenarios(spec, profiles)?;
    let params = io::profile_map(profiles);
    let (traces, failures) = run_scenarios(&scenarios, &params, provider, mitigate);
    fs::create_dir_all(out_dir)?;
    let written: Result<Vec<_>> = traces.par_iter().map(|t| io::save_trace(out_dir, t)).collect();
    written?;
    let invalid = traces.iter().filter(|t| !t.header.valid).count();
    Ok(SimulateSummary {
        scenarios: scenarios.len(),
        traces_written: traces.len(),
        invalid_traces: invalid,
        failures,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSummary {
    pub traces: usize,
    pub hazardous: usize,
    pub h1: usize,
    pub h2: usize,
    /// Per-patient hazard counts.
    pub by_patient: BTreeMap<String, usize>,
    /// Hazard onset times in minutes, keyed by scenario path stem.
    pub onsets_min: BTreeMap<String, f64>,
}

/// Apply hazard labels in place to in-memory traces.
pub fn label_traces(traces: &mut [Trace], params: &LabelParams) -> Result<LabelSummary> {
    let results: Result<Vec<()>> =
        traces.par_iter_mut().filter(|t| t.header.valid).map(|t| t.apply_labels(params)).collect();
    results?;
    let mut summary = LabelSummary {
        traces: traces.len(),
        hazardous: 0,
        h1: 0,
        h2: 0,
        by_patient: BTreeMap::new(),
        onsets_min: BTreeMap::new(),
    };
    for t in traces.iter() {
        if let Some((onset, hazard)) = t.hazard_onset() {
            summary.hazardous += 1;
            match hazard {
                Hazard::H1 => summary.h1 += 1,
                Hazard::H2 => summary.h2 += 1,
            }
            *summary.by_patient.entry(t.header.scenario.patient.clone()).or_default() += 1;
            summary.onsets_min.insert(
                format!("{}/{}", t.header.scenario.patient, t.header.scenario.id),
                onset as f64 * t.header.scenario.dt_min,
            );
        }
    }
    Ok(summary)
}

/// Label a campaign directory in place; writes `labels.json` next to the
/// traces.
pub fn label_campaign_dir(dir: &Path, params: &LabelParams) -> Result<LabelSummary> {
    let mut traces = io::load_campaign(dir)?;
    if traces.is_empty() {
        return Err(Error::config(format!("no traces under {}", dir.display())));
    }
    let summary = label_traces(&mut traces, params)?;
    let rewritten: Result<Vec<_>> = traces.par_iter().map(|t| io::save_trace(dir, t)).collect();
    rewritten?;
    fs::write(dir.join("labels.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnSummary {
    pub k: usize,
    pub seed: u64,
    pub hazardous_traces: usize,
    pub threshold_files: usize,
    /// Slots that fell back to the no-learning defaults, per (fold, patient).
    pub unlearnable: BTreeMap<String, Vec<String>>,
}

/// Learn per-patient thresholds with k-fold cross-validation and persist
/// folds, threshold files, and the convergence log under `out_dir`. A
/// campaign without a single hazardous trace cannot be learned from; every
/// slot then keeps its no-learning default and is reported unlearnable.
pub fn learn_campaign(
    traces: &[Trace],
    k: usize,
    seed: u64,
    cfg: &LearnConfig,
    out_dir: &Path,
) -> Result<(learn::CvOutcome, LearnSummary)> {
    let hazardous = traces.iter().filter(|t| t.hazard_onset().is_some()).count();
    let cv = if hazardous == 0 {
        let ids: Vec<String> = traces.iter().map(|t| t.header.scenario.id.clone()).collect();
        let folds = learn::assign_folds(&ids, k, seed)?;
        let mut patients: Vec<String> =
            traces.iter().map(|t| t.header.scenario.patient.clone()).collect();
        patients.sort_unstable();
        patients.dedup();
        let all_slots: Vec<String> = crate::scs::default_ruleset()
            .iter()
            .map(|r| r.slot_name.to_string())
            .collect();
        let mut thresholds = BTreeMap::new();
        for fold in 0..k {
            for patient in &patients {
                thresholds.insert(
                    (fold, patient.clone()),
                    learn::ThresholdSet {
                        patient: patient.clone(),
                        fold,
                        training_hash: format!("{:x}", <sha2::Sha256 as sha2::Digest>::digest([])),
                        slots: crate::scs::cawot_slots(),
                        unlearnable: all_slots.clone(),
                    },
                );
            }
        }
        learn::CvOutcome { folds, k, seed, thresholds, convergence: Vec::new() }
    } else {
        learn::cross_validate(traces, k, seed, cfg)?
    };
    fs::create_dir_all(out_dir)?;
    io::save_folds(
        &out_dir.join("folds.json"),
        &io::FoldFile { k, seed, assignment: cv.folds.clone() },
    )?;
    let mut unlearnable = BTreeMap::new();
    for ((fold, patient), set) in &cv.thresholds {
        let path = out_dir.join("thresholds").join(format!("fold{fold}")).join(format!("{patient}.json"));
        io::save_thresholds(&path, set)?;
        if !set.unlearnable.is_empty() {
            unlearnable.insert(format!("fold{fold}/{patient}"), set.unlearnable.clone());
        }
    }
    let mut log = String::from("fold,patient,slot,iter,objective,proj_grad_norm\n");
    for (fold, patient, slot) in &cv.convergence {
        for rec in &slot.records {
            log.push_str(&format!(
                "{fold},{patient},{},{},{},{}\n",
                slot.slot_name, rec.iter, rec.objective, rec.proj_grad_norm
            ));
        }
    }
    fs::write(out_dir.join("convergence.csv"), log)?;
    let summary = LearnSummary {
        k,
        seed,
        hazardous_traces: hazardous,
        threshold_files: cv.thresholds.len(),
        unlearnable,
    };
    fs::write(out_dir.join("learn.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok((cv, summary))
}

/// Confusion counts with the derived rates, for reports.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fpr: f64,
    pub fnr: f64,
    pub acc: f64,
    pub f1: f64,
}

impl From<ConfusionCounts> for ConfusionReport {
    fn from(c: ConfusionCounts) -> Self {
        ConfusionReport {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
            fpr: c.fpr(),
            fnr: c.fnr(),
            acc: c.accuracy(),
            f1: c.f1(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingReport {
    pub n_hazardous: usize,
    pub n_detected: usize,
    pub mean_tth_min: Option<f64>,
    pub mean_reaction_min: Option<f64>,
    /// Detections at or before the hazard onset over all hazardous traces.
    pub early_detection_rate: Option<f64>,
    pub tth_min_values: Vec<f64>,
    pub reaction_min_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorEval {
    pub sample: ConfusionReport,
    pub simulation: ConfusionReport,
    pub hazard_coverage: f64,
    pub timing: TimingReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub delta_samples: usize,
    pub n_traces: usize,
    pub monitors: BTreeMap<String, MonitorEval>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Replay one monitor over labeled traces and aggregate every metric.
pub fn evaluate_monitor(
    traces: &[Trace],
    provider: &MonitorProvider,
    delta: usize,
) -> Result<MonitorEval> {
    struct PerTrace {
        sample: ConfusionCounts,
        simulation: ConfusionCounts,
        faulted: bool,
        hazardous_faulted: bool,
        timing: metrics::TraceTiming,
        hazardous: bool,
    }
    let rows: Result<Vec<PerTrace>> = traces
        .par_iter()
        .filter(|t| t.header.valid)
        .map(|trace| {
            let mut mon = provider.monitor_for(&trace.header.scenario)?;
            let alarms = trace.replay(mon.as_mut());
            let alerts: Vec<bool> = alarms.iter().map(|a| a.is_some()).collect();
            let hazards: Vec<bool> = trace.steps.iter().map(|s| s.label.is_some()).collect();
            let fault_step = trace.fault_start_step();
            let sample = metrics::sample_confusion(&alerts, &hazards, delta)?;
            let simulation = metrics::simulation_confusion(&alerts, &hazards, fault_step)?;
            let onset = trace.hazard_onset().map(|(k, _)| k);
            let detection_from = fault_step.unwrap_or(0);
            let first_alert = alerts
                .iter()
                .enumerate()
                .skip(detection_from)
                .find_map(|(k, a)| a.then_some(k));
            let timing = metrics::trace_timing(onset, fault_step, first_alert, trace.header.scenario.dt_min);
            Ok(PerTrace {
                sample,
                simulation,
                faulted: fault_step.is_some(),
                hazardous_faulted: fault_step.is_some() && onset.is_some(),
                timing,
                hazardous: onset.is_some(),
            })
        })
        .collect();
    let rows = rows?;

    let mut sample = ConfusionCounts::default();
    let mut simulation = ConfusionCounts::default();
    let mut tths = Vec::new();
    let mut reactions = Vec::new();
    let mut early = 0usize;
    let mut n_hazardous = 0usize;
    let mut n_detected = 0usize;
    let (mut faulted, mut hazardous_faulted) = (0usize, 0usize);
    for row in &rows {
        sample.add(&row.sample);
        simulation.add(&row.simulation);
        faulted += usize::from(row.faulted);
        hazardous_faulted += usize::from(row.hazardous_faulted);
        if row.hazardous {
            n_hazardous += 1;
            if let Some(tth) = row.timing.tth_min {
                tths.push(tth);
            }
            if let Some(reaction) = row.timing.reaction_min {
                n_detected += 1;
                reactions.push(reaction);
                if row.timing.early == Some(true) {
                    early += 1;
                }
            }
        }
    }
    Ok(MonitorEval {
        sample: sample.into(),
        simulation: simulation.into(),
        hazard_coverage: metrics::hazard_coverage(hazardous_faulted, faulted.max(1))?,
        timing: TimingReport {
            n_hazardous,
            n_detected,
            mean_tth_min: mean(&tths),
            mean_reaction_min: mean(&reactions),
            early_detection_rate: if n_hazardous == 0 {
                None
            } else {
                Some(early as f64 / n_hazardous as f64)
            },
            tth_min_values: tths,
            reaction_min_values: reactions,
        },
    })
}

/// Evaluate monitors over a labeled campaign, write `eval.json`, a
/// per-monitor histogram pair, and a per-trace detail CSV.
pub fn eval_campaign(
    traces: &[Trace],
    providers: &[MonitorProvider],
    delta: usize,
    out_dir: &Path,
) -> Result<EvalReport> {
    fs::create_dir_all(out_dir)?;
    let mut monitors = BTreeMap::new();
    for provider in providers {
        let eval = evaluate_monitor(traces, provider, delta)?;
        write_histogram(&out_dir.join(format!("tth_{}.dat", provider.name())), &eval.timing.tth_min_values, 30.0)?;
        write_histogram(
            &out_dir.join(format!("reaction_{}.dat", provider.name())),
            &eval.timing.reaction_min_values,
            30.0,
        )?;
        monitors.insert(provider.name().to_string(), eval);
    }
    let report = EvalReport { delta_samples: delta, n_traces: traces.len(), monitors };
    fs::write(out_dir.join("eval.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    write_per_trace_csv(traces, &out_dir.join("per_trace.csv"))?;
    Ok(report)
}

/// Gnuplot-ready histogram: `bin_lo bin_hi count` per line.
fn write_histogram(path: &Path, values: &[f64], bin_width: f64) -> Result<()> {
    let mut out = String::from("# bin_lo bin_hi count\n");
    if !values.is_empty() {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first_bin = (lo / bin_width).floor() * bin_width;
        let bins = (((hi - first_bin) / bin_width).floor() as usize) + 1;
        for b in 0..bins {
            let bin_lo = first_bin + b as f64 * bin_width;
            let bin_hi = bin_lo + bin_width;
            let count = values.iter().filter(|v| **v >= bin_lo && **v < bin_hi).count();
            out.push_str(&format!("{bin_lo} {bin_hi} {count}\n"));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_per_trace_csv(traces: &[Trace], path: &Path) -> Result<()> {
    let mut out = String::from("patient,scenario,fault_kind,fault_target,fault_start_min,hazard,onset_min\n");
    for t in traces {
        let (kind, target, start) = match &t.header.scenario.fault {
            Some(f) => (f.kind.slug(), short_target(f.target).to_string(), format!("{}", f.trigger_min)),
            None => ("none".into(), "-".into(), "-".into()),
        };
        let (hazard, onset) = match t.hazard_onset() {
            Some((k, h)) => (h.as_str().to_string(), format!("{}", k as f64 * t.header.scenario.dt_min)),
            None => ("-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{},{},{kind},{target},{start},{hazard},{onset}\n",
            t.header.scenario.patient, t.header.scenario.id
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MitigationReport {
    pub monitor: String,
    pub n_scenarios: usize,
    pub baseline_hazards: usize,
    pub mitigated_hazards: usize,
    pub recovery_rate: f64,
    pub new_hazards: usize,
    /// Mean risk of missed and mitigation-induced hazards over all runs.
    pub avg_risk: f64,
    /// The same average if no monitor had run: every baseline hazard missed.
    pub baseline_fn_equivalent_risk: f64,
}

/// Mean windowed risk index of one trace (LBGI + HBGI averaged over the
/// horizon).
pub fn trace_mean_risk(trace: &Trace, window: usize) -> Result<f64> {
    let series = risk::risk_series(&trace.true_bg(), window)?;
    let n = series.lbgi.len() as f64;
    Ok(series.lbgi.iter().zip(&series.hbgi).map(|(l, h)| l + h).sum::<f64>() / n)
}

/// Re-run a labeled baseline campaign with a monitor and the mitigation
/// policy live, label the mitigated traces, and compute recovery metrics.
pub fn mitigate_eval(
    baseline: &[Trace],
    provider: &MonitorProvider,
    label_params: &LabelParams,
    out_dir: Option<&Path>,
) -> Result<(MitigationReport, Vec<Trace>)> {
    let scenarios: Vec<ScenarioConfig> =
        baseline.iter().map(|t| t.header.scenario.clone()).collect();
    let params: BTreeMap<String, PatientParams> = baseline
        .iter()
        .map(|t| (t.header.scenario.patient.clone(), t.header.patient_params.clone()))
        .collect();
    let (mut mitigated, failures) = run_scenarios(&scenarios, &params, Some(provider), true);
    if !failures.is_empty() {
        return Err(Error::config(format!(
            "{} scenarios failed under mitigation, first: {} ({})",
            failures.len(),
            failures[0].0,
            failures[0].1
        )));
    }
    label_traces(&mut mitigated, label_params)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let written: Result<Vec<_>> = mitigated.par_iter().map(|t| io::save_trace(dir, t)).collect();
        written?;
    }

    let mitigated_by_id: BTreeMap<&str, &Trace> =
        mitigated.iter().map(|t| (t.header.scenario.id.as_str(), t)).collect();
    let mut pairs = Vec::new();
    let mut fn_risks = Vec::new();
    let mut induced_risks = Vec::new();
    let mut baseline_fn_risks = Vec::new();
    for base in baseline {
        let Some(mit) = mitigated_by_id.get(base.header.scenario.id.as_str()) else {
            return Err(Error::config(format!(
                "unpaired scenario `{}` in the mitigation run",
                base.header.scenario.id
            )));
        };
        let base_hazard = base.hazard_onset().is_some();
        let mit_hazard = mit.hazard_onset().is_some();
        pairs.push((base_hazard, mit_hazard));
        if base_hazard {
            baseline_fn_risks.push(trace_mean_risk(base, label_params.window)?);
        }
        if mit_hazard {
            let detection_from = mit.fault_start_step().unwrap_or(0);
            let detected = mit.steps.iter().skip(detection_from).any(|s| s.alarm.is_some());
            if !detected {
                fn_risks.push(trace_mean_risk(mit, label_params.window)?);
            }
            if !base_hazard {
                induced_risks.push(trace_mean_risk(mit, label_params.window)?);
            }
        }
    }
    let (recovery, new_hazards) = metrics::recovery_rate(&pairs);
    let n = baseline.len();
    let report = MitigationReport {
        monitor: provider.name().to_string(),
        n_scenarios: n,
        baseline_hazards: pairs.iter().filter(|(b, _)| *b).count(),
        mitigated_hazards: pairs.iter().filter(|(_, m)| *m).count(),
        recovery_rate: recovery,
        new_hazards,
        avg_risk: metrics::average_risk(n, &fn_risks, &induced_risks),
        baseline_fn_equivalent_risk: metrics::average_risk(n, &baseline_fn_risks, &[]),
    };
    if let Some(dir) = out_dir {
        fs::write(dir.join("mitigation.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok((report, mitigated))
}

/// Render the human-readable summary table.
pub fn render_report(eval: &EvalReport, mitigation: &[MitigationReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Monitor performance (sample level, tolerance window = {} samples)\n",
        eval.delta_samples
    ));
    out.push_str(&format!(
        "{:<12} {:>8} {:>9} {:>8} {:>8} {:>8} {:>8}\n",
        "Monitor", "No.Sim", "Hazard%", "FPR", "FNR", "ACC", "F1"
    ));
    for (name, m) in &eval.monitors {
        out.push_str(&format!(
            "{:<12} {:>8} {:>8.1}% {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
            name,
            eval.n_traces,
            100.0 * m.hazard_coverage,
            m.sample.fpr,
            m.sample.fnr,
            m.sample.acc,
            m.sample.f1
        ));
    }
    out.push_str("\nSimulation level (two regions)\n");
    out.push_str(&format!(
        "{:<12} {:>8} {:>8} {:>8} {:>8}\n",
        "Monitor", "FPR", "FNR", "ACC", "F1"
    ));
    for (name, m) in &eval.monitors {
        out.push_str(&format!(
            "{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
            name, m.simulation.fpr, m.simulation.fnr, m.simulation.acc, m.simulation.f1
        ));
    }
    out.push_str("\nTimeliness\n");
    out.push_str(&format!(
        "{:<12} {:>14} {:>18} {:>10}\n",
        "Monitor", "mean TTH (min)", "mean reaction (min)", "EDR"
    ));
    for (name, m) in &eval.monitors {
        out.push_str(&format!(
            "{:<12} {:>14} {:>18} {:>10}\n",
            name,
            m.timing.mean_tth_min.map_or("-".into(), |v| format!("{v:.1}")),
            m.timing.mean_reaction_min.map_or("-".into(), |v| format!("{v:.1}")),
            m.timing.early_detection_rate.map_or("-".into(), |v| format!("{:.1}%", 100.0 * v)),
        ));
    }
    if !mitigation.is_empty() {
        out.push_str("\nMitigation\n");
        out.push_str(&format!(
            "{:<12} {:>14} {:>14} {:>10} {:>20}\n",
            "Monitor", "Recovery Rate", "No. New Hazard", "Avg. Risk", "No-monitor Avg. Risk"
        ));
        for m in mitigation {
            out.push_str(&format!(
                "{:<12} {:>13.1}% {:>14} {:>10.3} {:>20.3}\n",
                m.monitor,
                100.0 * m.recovery_rate,
                m.new_hazards,
                m.avg_risk,
                m.baseline_fn_equivalent_risk
            ));
        }
    }
    // suggested mitigation deadline from the TTH distribution
    if let Some(m) = eval.monitors.values().next() {
        if let Some(ts) = crate::scs::hms_deadline_from_tth(&m.timing.tth_min_values, 10.0) {
            out.push_str(&format!("\nSuggested HMS deadline t_s (10th percentile TTH): {ts:.0} min\n"));
        }
    }
    out
}

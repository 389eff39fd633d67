//! Closed-loop scenario orchestration.
//!
//! One step of the loop, in fixed order: the patient emits the true
//! glucose; the fault engine perturbs the controller's glucose input if
//! targeted; the controller computes its command from that view and its own
//! IOB estimate; the fault engine perturbs the command output or corrupts
//! the controller's IOB state if targeted; the monitor observes the true
//! glucose, the derived context, and the post-fault command; mitigation, if
//! enabled and triggered, overrides the delivered command; the patient
//! integrates one control step.
//!
//! Insulin on board is bookkept as delivered insulin above the scheduled
//! basal (the usual APS convention): holding the basal leaves it at zero,
//! corrections raise it, suspensions let it decay. The controller and the
//! monitor each keep their own ledger of the same quantity — injected
//! faults can corrupt the controller's copy, while the monitor's stays
//! clean because its view of sensors and actuator commands is fault-free
//! by assumption.

use serde::{Deserialize, Serialize};

use crate::controller::{self, ControllerConfig, IobState};
use crate::error::{Error, Result};
use crate::fault::{self, FaultSpec, FaultTarget};
use crate::glucose::{self, MealProfile, PatientParams, PatientState};
use crate::monitor::{AlarmSource, Mitigator, Monitor, Observation};
use crate::risk::Hazard;

/// Default horizon: 150 steps of 5 minutes.
pub const DEFAULT_STEPS: usize = 150;
pub const DEFAULT_DT_MIN: f64 = 5.0;

/// The seven default initial glucose values, evenly spaced over [80, 200].
pub fn default_initial_bg() -> Vec<f64> {
    vec![80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0]
}

/// One scenario: a patient, an initial condition, a controller, and at most
/// one fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub patient: String,
    pub initial_bg: f64,
    pub controller: String,
    pub controller_cfg: ControllerConfig,
    pub fault: Option<FaultSpec>,
    pub monitor: Option<String>,
    pub mitigate: bool,
    pub seed: u64,
    pub steps: usize,
    pub dt_min: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller_cfg.validate()?;
        if let Some(f) = &self.fault {
            f.validate()?;
        }
        if !(80.0..=200.0).contains(&self.initial_bg) {
            return Err(Error::invalid(format!(
                "initial BG must lie in [80, 200], got {}",
                self.initial_bg
            )));
        }
        if self.steps == 0 || self.dt_min <= 0.0 {
            return Err(Error::invalid("need steps >= 1 and dt > 0"));
        }
        Ok(())
    }
}

/// One row of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t_min: f64,
    pub true_bg: f64,
    pub seen_bg: f64,
    /// Monitor-side IOB at observation time, U.
    pub iob: f64,
    /// Controller output before command faults, U/h.
    pub raw_cmd: f64,
    /// What reached the pump, U/h.
    pub delivered_cmd: f64,
    pub fault_active: bool,
    pub alarm: Option<(Hazard, AlarmSource)>,
    pub mitigation_active: bool,
    pub label: Option<Hazard>,
}

/// Scenario provenance persisted next to every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: ScenarioConfig,
    pub patient_params: PatientParams,
    pub valid: bool,
}

/// Full record of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn true_bg(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.true_bg).collect()
    }

    pub fn iob(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.iob).collect()
    }

    pub fn delivered(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.delivered_cmd).collect()
    }

    pub fn labels(&self) -> Vec<Option<Hazard>> {
        self.steps.iter().map(|s| s.label).collect()
    }

    /// First labeled step, with its hazard type.
    pub fn hazard_onset(&self) -> Option<(usize, Hazard)> {
        self.steps
            .iter()
            .enumerate()
            .find_map(|(k, s)| s.label.map(|h| (k, h)))
    }

    /// Last labeled step.
    pub fn last_hazard_step(&self) -> Option<usize> {
        self.steps.iter().rposition(|s| s.label.is_some())
    }

    /// Fault trigger time as a step index, if the scenario was faulted.
    pub fn fault_start_step(&self) -> Option<usize> {
        self.header
            .scenario
            .fault
            .as_ref()
            .map(|f| (f.trigger_min / self.header.scenario.dt_min).ceil() as usize)
    }

    /// Apply hazard labels from the risk indices of the true glucose.
    pub fn apply_labels(&mut self, params: &crate::risk::LabelParams) -> Result<()> {
        let labels = crate::risk::label(&self.true_bg(), params)?;
        for (step, label) in self.steps.iter_mut().zip(labels.labels) {
            step.label = label;
        }
        Ok(())
    }

    /// Re-run a monitor offline over the persisted signals. Returns the
    /// alarm per step; equals the live alarm sequence when mitigation was
    /// off (with mitigation on, the live loop saw different commands than a
    /// counterfactual monitor would).
    pub fn replay<'m>(&self, monitor: &mut (dyn Monitor + 'm)) -> Vec<Option<(Hazard, AlarmSource)>> {
        monitor.reset();
        let dt = self.header.scenario.dt_min;
        let basal = self.header.scenario.controller_cfg.basal_rate;
        let mut out = Vec::with_capacity(self.steps.len());
        for (k, step) in self.steps.iter().enumerate() {
            let (dbg, diob) = if k == 0 {
                (0.0, 0.0)
            } else {
                (
                    (step.true_bg - self.steps[k - 1].true_bg) / dt,
                    (step.iob - self.steps[k - 1].iob) / dt,
                )
            };
            let verdict = monitor.observe(&Observation {
                step: k,
                t_min: step.t_min,
                bg: step.true_bg,
                dbg,
                iob: step.iob,
                diob,
                command: step.delivered_cmd,
                basal,
            });
            out.push(verdict.alarm());
        }
        out
    }
}

/// Run one scenario. An integration failure yields a partial trace flagged
/// invalid, not an error; configuration problems are errors.
pub fn run<'m>(
    cfg: &ScenarioConfig,
    params: &PatientParams,
    mut monitor: Option<&mut (dyn Monitor + 'm)>,
) -> Result<Trace> {
    cfg.validate()?;
    params.validate().map_err(|e| Error::Scenario { id: cfg.id.clone(), msg: e.to_string() })?;
    let law = controller::control_law(&cfg.controller)?;
    if let Some(m) = monitor.as_deref_mut() {
        m.reset();
    }

    let meal = MealProfile::default();
    let mut patient = PatientState::steady(params, cfg.initial_bg)
        .map_err(|e| Error::Scenario { id: cfg.id.clone(), msg: e.to_string() })?;
    let mut ctrl_iob = IobState::new();
    let mut mon_iob = IobState::new();
    let mut mitigator = cfg.mitigate.then(|| {
        Mitigator::new(crate::monitor::MitigationConfig {
            max_corrective: cfg.controller_cfg.max_rate,
        })
    });

    let dt = cfg.dt_min;
    let ccfg = &cfg.controller_cfg;
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut valid = true;

    // stuck-at faults freeze the previous emission of their signal
    let mut last_seen = cfg.initial_bg;
    let mut last_cmd = 0.0;
    let mut last_ctrl_iob = 0.0;
    let mut prev_seen: Option<f64> = None;
    let mut prev_true: Option<f64> = None;
    let mut prev_mon_iob: Option<f64> = None;

    for k in 0..cfg.steps {
        let t = k as f64 * dt;
        let true_bg = patient.g;

        // fault on the controller's glucose view
        let seen_bg = match &cfg.fault {
            Some(f) if f.target == FaultTarget::ControllerGlucoseInput => {
                f.apply(fault::GLUCOSE_BOUNDS, true_bg, last_seen, t)
            }
            _ => true_bg,
        };
        let trend = prev_seen.map_or(0.0, |p| (seen_bg - p) / dt);

        // controller acts on its (possibly corrupted) view
        let raw_cmd = law.command(seen_bg, trend, ctrl_iob.iob, dt, ccfg);

        // faults past the controller: command output, or its IOB state
        let post_cmd = match &cfg.fault {
            Some(f) if f.target == FaultTarget::CommandOutput => {
                f.apply(fault::command_bounds(ccfg.max_rate), raw_cmd, last_cmd, t)
            }
            _ => raw_cmd,
        };
        if let Some(f) = &cfg.fault {
            if f.target == FaultTarget::ControllerIob {
                ctrl_iob.iob = f.apply(fault::IOB_BOUNDS, ctrl_iob.iob, last_ctrl_iob, t);
            }
        }

        // monitor context from the fault-free sensor and its own bookkeeping
        let dbg = prev_true.map_or(0.0, |p| (true_bg - p) / dt);
        let diob = prev_mon_iob.map_or(0.0, |p| (mon_iob.iob - p) / dt);
        let obs = Observation {
            step: k,
            t_min: t,
            bg: true_bg,
            dbg,
            iob: mon_iob.iob,
            diob,
            command: post_cmd,
            basal: ccfg.basal_rate,
        };
        let verdict = monitor.as_deref_mut().map(|m| m.observe(&obs));

        let (delivered_cmd, mitigation_active) = match (&mut mitigator, &verdict) {
            (Some(mit), Some(v)) => mit.apply(v, true_bg, post_cmd),
            _ => (post_cmd, false),
        };

        prev_true = Some(true_bg);
        prev_seen = Some(seen_bg);
        prev_mon_iob = Some(mon_iob.iob);
        last_seen = seen_bg;
        last_cmd = post_cmd;
        last_ctrl_iob = ctrl_iob.iob;

        steps.push(TraceStep {
            t_min: t,
            true_bg,
            seen_bg,
            iob: mon_iob.iob,
            raw_cmd,
            delivered_cmd,
            fault_active: cfg.fault.as_ref().is_some_and(|f| f.active(t)),
            alarm: verdict.and_then(|v| v.alarm()),
            mitigation_active,
            label: None,
        });

        // integrate the patient one step under the delivered rate
        match glucose::step(&patient, params, glucose::u_per_h_to_uu_per_min(delivered_cmd), &meal, t, dt) {
            Ok(out) => patient = out.state,
            Err(_) => {
                valid = false;
                break;
            }
        }
        let bolus_u = (delivered_cmd - ccfg.basal_rate).max(0.0) * dt / 60.0;
        ctrl_iob = controller::iob_update(&ctrl_iob, bolus_u, dt, ccfg.dia_min);
        mon_iob = controller::iob_update(&mon_iob, bolus_u, dt, ccfg.dia_min);
    }

    Ok(Trace {
        header: TraceHeader { scenario: cfg.clone(), patient_params: params.clone(), valid },
        steps,
    })
}

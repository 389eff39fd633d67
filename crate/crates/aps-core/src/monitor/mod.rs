//! Runtime safety monitors.
//!
//! Every monitor implements [`Monitor`] and is registered by name:
//! `"cawt"` (context rules with learned thresholds), `"cawot"` (same rules,
//! no-learning defaults), `"guideline"` (generic medical-guideline checks),
//! and `"mpc"` (model-predictive range check). Monitors see only the
//! input-output interface of the controller: the true sensor glucose, the
//! derived context, and the command about to reach the pump.

mod context;
mod guideline;
mod mitigation;
mod mpc;

pub use context::ContextMonitor;
pub use guideline::{GuidelineConfig, GuidelineMonitor};
pub use mitigation::{MitigationConfig, Mitigator};
pub use mpc::MpcMonitor;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glucose::PatientParams;
use crate::risk::Hazard;

/// What a monitor sees at one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub step: usize,
    pub t_min: f64,
    /// True (sensor) glucose, mg/dl.
    pub bg: f64,
    /// Backward difference of `bg`, mg/dl/min; zero at the first step.
    pub dbg: f64,
    /// Monitor-side insulin-on-board bookkeeping, U.
    pub iob: f64,
    /// Backward difference of `iob`, U/min; zero at the first step.
    pub diob: f64,
    /// The command about to be delivered, U/h (post-fault).
    pub command: f64,
    /// Scenario basal rate for action classification, U/h.
    pub basal: f64,
}

/// Where an alarm came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlarmSource {
    /// A context rule by id (1..=12).
    Rule(u8),
    /// A guideline rule by index (1..=4).
    Guideline(u8),
    Mpc,
}

impl fmt::Display for AlarmSource {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlarmSource::Rule(id) => write!(w, "r{id}"),
            AlarmSource::Guideline(id) => write!(w, "g{id}"),
            AlarmSource::Mpc => write!(w, "mpc"),
        }
    }
}

impl AlarmSource {
    pub fn parse(s: &str) -> Option<AlarmSource> {
        if let Some(rest) = s.strip_prefix('r') {
            return rest.parse().ok().map(AlarmSource::Rule);
        }
        if let Some(rest) = s.strip_prefix('g') {
            return rest.parse().ok().map(AlarmSource::Guideline);
        }
        (s == "mpc").then_some(AlarmSource::Mpc)
    }
}

/// Monitor verdict for one step. An unsafe verdict always carries the
/// hazard type so the mitigation branch knows which way to correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe { hazard: Hazard, source: AlarmSource },
}

impl Verdict {
    pub fn is_unsafe(&self) -> bool {
        matches!(self, Verdict::Unsafe { .. })
    }

    pub fn alarm(&self) -> Option<(Hazard, AlarmSource)> {
        match self {
            Verdict::Safe => None,
            Verdict::Unsafe { hazard, source } => Some((*hazard, *source)),
        }
    }
}

/// A runtime safety monitor. Stateful monitors keep only scenario-local
/// state and must behave identically on an offline replay of the same
/// observations.
pub trait Monitor: Send {
    fn name(&self) -> &str;

    /// Clear scenario-local state before a new trace.
    fn reset(&mut self);

    fn observe(&mut self, obs: &Observation) -> Verdict;
}

/// Names of all registered monitors.
pub fn monitor_names() -> &'static [&'static str] {
    &["cawt", "cawot", "guideline", "mpc"]
}

/// Everything the registry may need to build a monitor. Fields irrelevant
/// to the chosen monitor are ignored.
#[derive(Debug, Clone)]
pub struct MonitorBuild {
    /// Glucose target for rule contexts, mg/dl.
    pub bgt: f64,
    /// Tolerance band realizing `IOB' = 0`, U/min.
    pub diob_eps: f64,
    /// Action-classification band.
    pub epsilon_action: f64,
    /// Learned slot thresholds; required for `"cawt"`.
    pub slots: Option<BTreeMap<String, f64>>,
    /// Patient percentile bounds; required for `"guideline"`.
    pub guideline: Option<GuidelineConfig>,
    /// Internal-model parameters; required for `"mpc"`.
    pub mpc_params: Option<PatientParams>,
    /// Prediction horizon for `"mpc"`, min.
    pub mpc_horizon_min: f64,
    pub dt_min: f64,
}

impl Default for MonitorBuild {
    fn default() -> Self {
        MonitorBuild {
            bgt: crate::scs::DEFAULT_BGT,
            diob_eps: crate::scs::DEFAULT_DIOB_EPS,
            epsilon_action: 0.05,
            slots: None,
            guideline: None,
            mpc_params: None,
            mpc_horizon_min: 240.0,
            dt_min: 5.0,
        }
    }
}

/// Build a monitor by registered name.
pub fn build_monitor(name: &str, build: &MonitorBuild) -> Result<Box<dyn Monitor>> {
    match name {
        "cawt" => {
            let slots = build.slots.clone().ok_or_else(|| {
                Error::config("cawt requires a resolved threshold set (run the learn stage first)")
            })?;
            Ok(Box::new(ContextMonitor::new("cawt", slots, build.bgt, build.diob_eps, build.epsilon_action)?))
        }
        "cawot" => Ok(Box::new(ContextMonitor::new(
            "cawot",
            crate::scs::cawot_slots(),
            build.bgt,
            build.diob_eps,
            build.epsilon_action,
        )?)),
        "guideline" => {
            let cfg = build
                .guideline
                .clone()
                .ok_or_else(|| Error::config("guideline monitor requires percentile bounds"))?;
            Ok(Box::new(GuidelineMonitor::new(cfg, build.dt_min)?))
        }
        "mpc" => {
            let params = build
                .mpc_params
                .clone()
                .ok_or_else(|| Error::config("mpc monitor requires internal model parameters"))?;
            Ok(Box::new(MpcMonitor::new(params, build.mpc_horizon_min, build.dt_min)))
        }
        other => Err(Error::config(format!(
            "unknown monitor `{other}` (expected one of {:?})",
            monitor_names()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_names() {
        let build = MonitorBuild {
            slots: Some(crate::scs::cawot_slots()),
            guideline: Some(GuidelineConfig { lambda10: 80.0, lambda90: 180.0, alpha_min: 25.0 }),
            mpc_params: Some(crate::glucose::PatientParams {
                body_weight: 70.0,
                insulin_clearance: 15.0,
                tau1: 60.0,
                tau2: 60.0,
                p2: 0.01,
                insulin_sensitivity: 5e-6,
                gezi: 2e-3,
                egp: 1.0,
                v_g: 200.0,
            }),
            ..Default::default()
        };
        for name in monitor_names() {
            let m = build_monitor(name, &build).unwrap();
            assert_eq!(m.name(), *name);
        }
        assert!(build_monitor("lstm", &build).is_err());
    }

    #[test]
    fn cawt_refuses_to_start_without_thresholds() {
        let build = MonitorBuild::default();
        assert!(build_monitor("cawt", &build).is_err());
    }

    #[test]
    fn alarm_source_roundtrip() {
        for s in [AlarmSource::Rule(10), AlarmSource::Guideline(2), AlarmSource::Mpc] {
            assert_eq!(AlarmSource::parse(&s.to_string()), Some(s));
        }
        assert_eq!(AlarmSource::parse("bogus"), None);
    }
}

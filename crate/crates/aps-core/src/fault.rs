//! Software fault and attack injection.
//!
//! One transient fault per simulation, targeting the controller's glucose
//! input, its internal IOB estimate, or the command output. Kinds follow the
//! usual attack taxonomy: truncation to zero, stuck-at (hold), forced
//! max/min, additive offsets, and power-of-two scaling standing in for
//! bit-flip corruption. Perturbed values stay inside the declared signal
//! bounds; outside its activation window a fault is the identity.

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};

/// Which controller-side signal the fault perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    ControllerGlucoseInput,
    ControllerIob,
    CommandOutput,
}

impl FaultTarget {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaultTarget::ControllerGlucoseInput => "controller_glucose_input",
            FaultTarget::ControllerIob => "controller_iob",
            FaultTarget::CommandOutput => "command_output",
        }
    }
}

/// The perturbation applied while the fault is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    TruncateZero,
    HoldLast,
    SetMax,
    SetMin,
    Add(f64),
    Sub(f64),
    ScalePow2(i32),
}

impl FaultKind {
    pub fn slug(&self) -> String {
        match self {
            FaultKind::TruncateZero => "truncate_zero".into(),
            FaultKind::HoldLast => "hold_last".into(),
            FaultKind::SetMax => "set_max".into(),
            FaultKind::SetMin => "set_min".into(),
            FaultKind::Add(v) => format!("add{v}"),
            FaultKind::Sub(v) => format!("sub{v}"),
            FaultKind::ScalePow2(k) => format!("pow2_{k}"),
        }
    }
}

/// Inclusive value range a perturbed signal must stay inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Bounds for the glucose input channel, mg/dl.
pub const GLUCOSE_BOUNDS: SignalBounds = SignalBounds { lo: 10.0, hi: 600.0 };

/// Bounds for the controller's IOB estimate, U.
pub const IOB_BOUNDS: SignalBounds = SignalBounds { lo: 0.0, hi: 20.0 };

/// Bounds for the insulin command channel given the pump's max rate, U/h.
pub fn command_bounds(max_rate: f64) -> SignalBounds {
    SignalBounds { lo: 0.0, hi: max_rate }
}

pub fn bounds_for(target: FaultTarget, cfg: &ControllerConfig) -> SignalBounds {
    match target {
        FaultTarget::ControllerGlucoseInput => GLUCOSE_BOUNDS,
        FaultTarget::ControllerIob => IOB_BOUNDS,
        FaultTarget::CommandOutput => command_bounds(cfg.max_rate),
    }
}

/// One transient fault: target, kind, and activation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub target: FaultTarget,
    pub kind: FaultKind,
    pub trigger_min: f64,
    pub duration_min: f64,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trigger_min < 0.0 {
            return Err(Error::invalid(format!("fault trigger must be >= 0, got {}", self.trigger_min)));
        }
        if self.duration_min <= 0.0 {
            return Err(Error::invalid(format!("fault duration must be > 0, got {}", self.duration_min)));
        }
        if let FaultKind::ScalePow2(k) = self.kind {
            if !matches!(k, -2 | -1 | 1 | 2) {
                return Err(Error::invalid(format!("scale_pow2 exponent must be in {{-2,-1,1,2}}, got {k}")));
            }
        }
        Ok(())
    }

    /// Active on `[trigger, trigger + duration)`.
    pub fn active(&self, t_min: f64) -> bool {
        t_min >= self.trigger_min && t_min < self.trigger_min + self.duration_min
    }

    /// Perturb `clean` at time `t_min`. `last` is the value this signal
    /// carried on the previous step (what a stuck-at fault keeps emitting).
    pub fn apply(&self, bounds: SignalBounds, clean: f64, last: f64, t_min: f64) -> f64 {
        if !self.active(t_min) {
            return clean;
        }
        match self.kind {
            FaultKind::TruncateZero => 0.0,
            FaultKind::HoldLast => last,
            FaultKind::SetMax => bounds.hi,
            FaultKind::SetMin => bounds.lo,
            FaultKind::Add(v) => (clean + v).clamp(bounds.lo, bounds.hi),
            FaultKind::Sub(v) => (clean - v).clamp(bounds.lo, bounds.hi),
            FaultKind::ScalePow2(k) => (clean * 2f64.powi(k)).clamp(bounds.lo, bounds.hi),
        }
    }
}

/// Named fault kinds a campaign grid can enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKindName {
    TruncateZero,
    HoldLast,
    SetMax,
    SetMin,
    Add,
    Sub,
    ScalePow2,
}

pub const ALL_KIND_NAMES: [FaultKindName; 7] = [
    FaultKindName::TruncateZero,
    FaultKindName::HoldLast,
    FaultKindName::SetMax,
    FaultKindName::SetMin,
    FaultKindName::Add,
    FaultKindName::Sub,
    FaultKindName::ScalePow2,
];

/// Base magnitude for additive faults per target: the value axis of the
/// campaign grid scales this by powers of two.
fn base_magnitude(target: FaultTarget) -> f64 {
    match target {
        FaultTarget::ControllerGlucoseInput => 10.0, // mg/dl
        FaultTarget::ControllerIob => 0.5,           // U
        FaultTarget::CommandOutput => 0.5,           // U/h
    }
}

impl FaultKindName {
    /// Instantiate the kind for a grid cell. The value index selects the
    /// magnitude `base * 2^idx` for add/sub and the exponent for
    /// power-of-two scaling; value-less kinds ignore it.
    pub fn instantiate(&self, target: FaultTarget, value_index: u32) -> FaultKind {
        match self {
            FaultKindName::TruncateZero => FaultKind::TruncateZero,
            FaultKindName::HoldLast => FaultKind::HoldLast,
            FaultKindName::SetMax => FaultKind::SetMax,
            FaultKindName::SetMin => FaultKind::SetMin,
            FaultKindName::Add => FaultKind::Add(base_magnitude(target) * 2f64.powi(value_index as i32)),
            FaultKindName::Sub => FaultKind::Sub(base_magnitude(target) * 2f64.powi(value_index as i32)),
            FaultKindName::ScalePow2 => {
                const EXPONENTS: [i32; 4] = [-2, -1, 1, 2];
                FaultKind::ScalePow2(EXPONENTS[(value_index as usize) % EXPONENTS.len()])
            }
        }
    }
}

/// Fault start/duration pair in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultTiming {
    pub start_min: f64,
    pub duration_min: f64,
}

/// The nine default activation windows: starts {60, 120, 180} crossed with
/// durations {60, 150, 300} minutes.
pub fn default_timings() -> Vec<FaultTiming> {
    let mut out = Vec::with_capacity(9);
    for start in [60.0, 120.0, 180.0] {
        for duration in [60.0, 150.0, 300.0] {
            out.push(FaultTiming { start_min: start, duration_min: duration });
        }
    }
    out
}

/// Expand a grid of (kinds x targets x values x timings) into fault specs.
/// Purely deterministic: the expansion order is the nesting order above.
pub fn expand_fault_grid(
    kinds: &[FaultKindName],
    targets: &[FaultTarget],
    value_indices: &[u32],
    timings: &[FaultTiming],
) -> Result<Vec<FaultSpec>> {
    if kinds.is_empty() || targets.is_empty() || value_indices.is_empty() || timings.is_empty() {
        return Err(Error::config("fault grid has an empty axis"));
    }
    let mut out = Vec::with_capacity(kinds.len() * targets.len() * value_indices.len() * timings.len());
    for kind in kinds {
        for target in targets {
            for v in value_indices {
                for timing in timings {
                    out.push(FaultSpec {
                        target: *target,
                        kind: kind.instantiate(*target, *v),
                        trigger_min: timing.start_min,
                        duration_min: timing.duration_min,
                    });
                }
            }
        }
    }
    Ok(out)
}

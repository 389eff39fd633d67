//! Safety context specification: the context transform, control-action
//! abstraction, the twelve unsafe-control-action rules with learnable
//! threshold slots, and the hazard-mitigation rule templates.
//!
//! Each rule pairs a context over `(BG, dBG, IOB, dIOB)` with a forbidden
//! action (rule 10: a required stop) and the hazard type a violation leads
//! to. The IOB slot of each rule is left symbolic (`b1`..`b11`, `b21`) and
//! resolved either from a learned threshold file or from the no-learning
//! defaults that make the slot predicate vacuous.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::risk::Hazard;
use crate::stl::{self, Formula};

/// Default glucose target used by rule contexts, mg/dl.
pub const DEFAULT_BGT: f64 = 120.0;

/// Half-width of the tolerance band that realizes `IOB' = 0` on sampled
/// data, U/min. Strict signs exclude the band, non-strict include it.
pub const DEFAULT_DIOB_EPS: f64 = 1e-3;

/// No-learning default for rule 10's glucose threshold, mg/dl.
pub const DEFAULT_B21: f64 = 70.0;

/// Context vector observed by the monitors: glucose, glucose rate, insulin
/// on board, and IOB rate. Derivatives are one-step backward differences;
/// the first sample carries zero derivatives by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextVector {
    pub bg: f64,
    pub dbg: f64,
    pub iob: f64,
    pub diob: f64,
}

/// Build the context at sample `t` from glucose and IOB series.
pub fn context_of(bg: &[f64], iob: &[f64], dt_min: f64, t: usize) -> ContextVector {
    let (dbg, diob) = if t == 0 {
        (0.0, 0.0)
    } else {
        ((bg[t] - bg[t - 1]) / dt_min, (iob[t] - iob[t - 1]) / dt_min)
    };
    ContextVector { bg: bg[t], dbg, iob: iob[t], diob }
}

/// Abstracted control actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionClass {
    /// u1: command below the basal band.
    DecreaseInsulin,
    /// u2: command above the basal band.
    IncreaseInsulin,
    /// u3: zero command.
    StopInsulin,
    /// u4: command inside the basal band.
    KeepInsulin,
}

impl ActionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionClass::DecreaseInsulin => "u1",
            ActionClass::IncreaseInsulin => "u2",
            ActionClass::StopInsulin => "u3",
            ActionClass::KeepInsulin => "u4",
        }
    }
}

/// Classify a command (U/h) against the scenario basal with band `epsilon`:
/// zero is a stop, below `basal*(1-eps)` decreases, above `basal*(1+eps)`
/// increases, anything else keeps. Total over `[0, inf)`.
pub fn classify_action(command: f64, basal: f64, epsilon: f64) -> ActionClass {
    if command == 0.0 {
        ActionClass::StopInsulin
    } else if command < basal * (1.0 - epsilon) {
        ActionClass::DecreaseInsulin
    } else if command > basal * (1.0 + epsilon) {
        ActionClass::IncreaseInsulin
    } else {
        ActionClass::KeepInsulin
    }
}

/// Sign requirement on a context derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Pos,
    Neg,
    Zero,
    NonPos,
    NonNeg,
    Any,
}

impl Trend {
    fn holds(&self, v: f64, eps: f64) -> bool {
        match self {
            Trend::Pos => v > eps,
            Trend::Neg => v < -eps,
            Trend::Zero => v.abs() <= eps,
            Trend::NonPos => v <= eps,
            Trend::NonNeg => v >= -eps,
            Trend::Any => true,
        }
    }
}

/// Which signal a rule's slot thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotSignal {
    Iob,
    Bg,
}

/// Orientation of the slot predicate: the rule fires when the signal is
/// below (`Lt`) or above (`Gt`) the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotOrientation {
    Lt,
    Gt,
}

/// One unsafe-control-action rule.
#[derive(Debug, Clone, PartialEq)]
pub struct UcasRule {
    pub id: u8,
    pub hazard: Hazard,
    /// `Some(true)`: context requires BG > BGT; `Some(false)`: BG < BGT.
    pub bg_above_target: Option<bool>,
    pub dbg: Trend,
    pub diob: Trend,
    pub slot_name: &'static str,
    pub slot_signal: SlotSignal,
    pub slot_orientation: SlotOrientation,
    pub action: ActionClass,
    /// Rule 10 requires its action instead of forbidding it.
    pub required_action: bool,
}

impl UcasRule {
    /// The context conjuncts that do not involve the threshold slot.
    /// dBG signs are strict; dIOB signs honor the tolerance band.
    pub fn nonslot_context_holds(&self, cx: &ContextVector, bgt: f64, diob_eps: f64) -> bool {
        let bg_ok = match self.bg_above_target {
            Some(true) => cx.bg > bgt,
            Some(false) => cx.bg < bgt,
            None => true,
        };
        bg_ok && self.dbg.holds(cx.dbg, 0.0) && self.diob.holds(cx.diob, diob_eps)
    }

    /// The slot predicate under a resolved threshold.
    pub fn slot_holds(&self, cx: &ContextVector, beta: f64) -> bool {
        let v = match self.slot_signal {
            SlotSignal::Iob => cx.iob,
            SlotSignal::Bg => cx.bg,
        };
        match self.slot_orientation {
            SlotOrientation::Lt => v < beta,
            SlotOrientation::Gt => v > beta,
        }
    }

    /// Whether the rule is violated by taking `action` in context `cx`:
    /// context holds and the forbidden action was taken (or the required
    /// action was not).
    pub fn fires(&self, cx: &ContextVector, action: ActionClass, bgt: f64, diob_eps: f64, beta: f64) -> bool {
        if !self.nonslot_context_holds(cx, bgt, diob_eps) || !self.slot_holds(cx, beta) {
            return false;
        }
        if self.required_action {
            action != self.action
        } else {
            action == self.action
        }
    }

    /// Render the rule in the tabular notation used for human review,
    /// e.g. `G[t0,te]((BG>BGT∧ BG'>0)∧ (IOB'<0∧ IOB<β1)⇒¬ u1)`.
    pub fn display_paper(&self) -> String {
        let beta = format!("β{}", &self.slot_name[1..]);
        if self.required_action {
            return format!("G[t0,te]((BG<{beta})⇒ {})", self.action.as_str());
        }
        let bg = match self.bg_above_target {
            Some(true) => "BG>BGT",
            Some(false) => "BG<BGT",
            None => "",
        };
        let dbg = match self.dbg {
            Trend::Pos => "BG'>0",
            Trend::Neg => "BG'<0",
            _ => "",
        };
        let diob = match self.diob {
            Trend::Pos => "IOB'>0",
            Trend::Neg => "IOB'<0",
            Trend::Zero => "IOB'=0",
            Trend::NonPos => "IOB'<=0",
            Trend::NonNeg => "IOB'>=0",
            Trend::Any => "",
        };
        let slot = match self.slot_orientation {
            SlotOrientation::Lt => format!("IOB<{beta}"),
            SlotOrientation::Gt => format!("IOB>{beta}"),
        };
        if diob.is_empty() {
            format!("G[t0,te](({bg}∧ {slot})⇒¬ {})", self.action.as_str())
        } else {
            format!("G[t0,te](({bg}∧ {dbg})∧ ({diob}∧ {slot})⇒¬ {})", self.action.as_str())
        }
    }

    /// The rule body as a machine-checkable formula over the signals
    /// `BG, dBG, IOB, dIOB, u1..u4`, with the threshold left as a named
    /// slot. Combine under `G[t0,te]` via [`UcasRule::to_formula`].
    pub fn to_inner_formula(&self, bgt: f64, diob_eps: f64) -> Formula {
        let mut conjuncts: Vec<Formula> = Vec::new();
        match self.bg_above_target {
            Some(true) => conjuncts.push(atom("BG", stl::CmpOp::Gt, lit(bgt))),
            Some(false) => conjuncts.push(atom("BG", stl::CmpOp::Lt, lit(bgt))),
            None => {}
        }
        match self.dbg {
            Trend::Pos => conjuncts.push(atom("dBG", stl::CmpOp::Gt, lit(0.0))),
            Trend::Neg => conjuncts.push(atom("dBG", stl::CmpOp::Lt, lit(0.0))),
            Trend::Any => {}
            _ => unreachable!("dBG trends are strict or absent"),
        }
        match self.diob {
            Trend::Pos => conjuncts.push(atom("dIOB", stl::CmpOp::Gt, lit(diob_eps))),
            Trend::Neg => conjuncts.push(atom("dIOB", stl::CmpOp::Lt, lit(-diob_eps))),
            Trend::Zero => {
                conjuncts.push(atom("dIOB", stl::CmpOp::Ge, lit(-diob_eps)));
                conjuncts.push(atom("dIOB", stl::CmpOp::Le, lit(diob_eps)));
            }
            Trend::NonPos => conjuncts.push(atom("dIOB", stl::CmpOp::Le, lit(diob_eps))),
            Trend::NonNeg => conjuncts.push(atom("dIOB", stl::CmpOp::Ge, lit(-diob_eps))),
            Trend::Any => {}
        }
        let slot_signal = match self.slot_signal {
            SlotSignal::Iob => "IOB",
            SlotSignal::Bg => "BG",
        };
        let slot_op = match self.slot_orientation {
            SlotOrientation::Lt => stl::CmpOp::Lt,
            SlotOrientation::Gt => stl::CmpOp::Gt,
        };
        conjuncts.push(atom(slot_signal, slot_op, stl::Threshold::Slot(self.slot_name.to_string())));

        let context = conjuncts
            .into_iter()
            .reduce(|a, b| Formula::And(Box::new(a), Box::new(b)))
            .expect("every rule has at least the slot conjunct");
        let action = Formula::Prop(self.action.as_str().to_string());
        let consequent = if self.required_action {
            action
        } else {
            Formula::Not(Box::new(action))
        };
        Formula::Implies(Box::new(context), Box::new(consequent))
    }

    /// Full `G[t0,te](...)` formula for this rule.
    pub fn to_formula(&self, t0: f64, te: f64, bgt: f64, diob_eps: f64) -> Formula {
        Formula::Globally { lo: t0, hi: te, inner: Box::new(self.to_inner_formula(bgt, diob_eps)) }
    }
}

fn atom(signal: &str, op: stl::CmpOp, rhs: stl::Threshold) -> Formula {
    Formula::Atom { signal: signal.to_string(), op, rhs }
}

fn lit(v: f64) -> stl::Threshold {
    stl::Threshold::Lit(v)
}

/// The twelve rules, slots unresolved. Five forbid u1, three forbid u2, one
/// forbids u3, one requires u3, two forbid u4; H2 rules are {1-5, 9, 11}
/// and H1 rules are {6-8, 10, 12}.
pub fn default_ruleset() -> Vec<UcasRule> {
    use ActionClass::*;
    use SlotOrientation::{Gt, Lt};
    use Trend::*;
    let rule = |id, hazard, above, dbg, diob, slot_name, orient, action, required| UcasRule {
        id,
        hazard,
        bg_above_target: above,
        dbg,
        diob,
        slot_name,
        slot_signal: if required { SlotSignal::Bg } else { SlotSignal::Iob },
        slot_orientation: orient,
        action,
        required_action: required,
    };
    vec![
        rule(1, Hazard::H2, Some(true), Pos, Neg, "b1", Lt, DecreaseInsulin, false),
        rule(2, Hazard::H2, Some(true), Pos, Zero, "b2", Lt, DecreaseInsulin, false),
        rule(3, Hazard::H2, Some(true), Neg, Pos, "b3", Lt, DecreaseInsulin, false),
        rule(4, Hazard::H2, Some(true), Neg, Neg, "b4", Lt, DecreaseInsulin, false),
        rule(5, Hazard::H2, Some(true), Neg, Zero, "b5", Lt, DecreaseInsulin, false),
        rule(6, Hazard::H1, Some(false), Neg, Pos, "b6", Gt, IncreaseInsulin, false),
        rule(7, Hazard::H1, Some(false), Neg, Neg, "b7", Gt, IncreaseInsulin, false),
        rule(8, Hazard::H1, Some(false), Neg, Zero, "b8", Gt, IncreaseInsulin, false),
        rule(9, Hazard::H2, Some(true), Any, Any, "b9", Lt, StopInsulin, false),
        rule(10, Hazard::H1, None, Any, Any, "b21", Lt, StopInsulin, true),
        rule(11, Hazard::H2, Some(true), Pos, NonPos, "b10", Lt, KeepInsulin, false),
        rule(12, Hazard::H1, Some(false), Neg, NonNeg, "b11", Gt, KeepInsulin, false),
    ]
}

/// No-learning slot defaults: `<` slots open to +inf, `>` slots open to 0,
/// and rule 10's glucose threshold pinned at the guideline lower bound.
pub fn cawot_slots() -> BTreeMap<String, f64> {
    let mut slots = BTreeMap::new();
    for rule in default_ruleset() {
        let v = if rule.id == 10 {
            DEFAULT_B21
        } else {
            match rule.slot_orientation {
                SlotOrientation::Lt => f64::INFINITY,
                SlotOrientation::Gt => 0.0,
            }
        };
        slots.insert(rule.slot_name.to_string(), v);
    }
    slots
}

/// Hazard-mitigation rule: when the context enters a hazardous region, one
/// of the corrective actions must be taken within `ts_min` minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct HmsRule {
    pub hazard: Hazard,
    /// Context entry predicate over BG, e.g. BG < 70 for the hypo region.
    pub bg_op: stl::CmpOp,
    pub bg_threshold: f64,
    pub corrective: Vec<ActionClass>,
    pub ts_min: f64,
}

impl HmsRule {
    /// `G[t0,te]((F[0,ts](u_c1 || ...)) S (context))`.
    pub fn to_formula(&self, t0: f64, te: f64) -> Formula {
        let action = self
            .corrective
            .iter()
            .map(|a| Formula::Prop(a.as_str().to_string()))
            .reduce(|a, b| Formula::Or(Box::new(a), Box::new(b)))
            .expect("HMS rule needs at least one corrective action");
        let eventually = Formula::Eventually { lo: 0.0, hi: self.ts_min, inner: Box::new(action) };
        let context = atom("BG", self.bg_op, lit(self.bg_threshold));
        Formula::Globally {
            lo: t0,
            hi: te,
            inner: Box::new(Formula::Since(Box::new(eventually), Box::new(context))),
        }
    }
}

/// The shipped mitigation templates: stop insulin within the deadline of
/// entering the hypoglycemic region, add insulin within the deadline of
/// entering the hyperglycemic region.
pub fn default_hms_rules(ts_min: f64) -> Vec<HmsRule> {
    vec![
        HmsRule {
            hazard: Hazard::H1,
            bg_op: stl::CmpOp::Lt,
            bg_threshold: 70.0,
            corrective: vec![ActionClass::StopInsulin],
            ts_min,
        },
        HmsRule {
            hazard: Hazard::H2,
            bg_op: stl::CmpOp::Gt,
            bg_threshold: 180.0,
            corrective: vec![ActionClass::IncreaseInsulin],
            ts_min,
        },
    ]
}

/// Deadline for the mitigation templates from a campaign's time-to-hazard
/// sample: the lower `percentile` (default callers use the 10th) bounds the
/// latest time mitigation may start and still beat most hazards.
pub fn hms_deadline_from_tth(tth_min: &[f64], percentile: f64) -> Option<f64> {
    if tth_min.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = tth_min.iter().copied().filter(|v| v.is_finite() && *v >= 0.0).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank - 1])
}

//! Virtual-patient glucose–insulin dynamics.
//!
//! Four-state compartment model: subcutaneous insulin, plasma insulin,
//! insulin effect, and blood glucose. Insulin delivered subcutaneously
//! transports through two first-order compartments, drives the insulin
//! effect with a first-order delay, and the effect removes glucose in
//! proportion to the current concentration:
//!
//! ```text
//! dI_SC/dt  = -I_SC/tau1 + ID/(tau1 * C_I)
//! dI_P/dt   = (I_SC - I_P)/tau2
//! dI_EFF/dt = -p2 * I_EFF + p2 * S_I * I_P
//! dG/dt     = -(GEZI + I_EFF) * G + EGP + R_A(t)
//! ```
//!
//! Integration is fixed-step classical RK4 with [`SUBSTEPS`] substeps per
//! control step, which keeps trajectories deterministic and bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Substeps per control step for the RK4 integrator.
pub const SUBSTEPS: u32 = 5;

/// Glucose floor, mg/dl. States are clamped here instead of going negative.
pub const DEFAULT_G_FLOOR: f64 = 10.0;

/// Convert an insulin rate in U/h (pump convention) to µU/min (model input).
pub fn u_per_h_to_uu_per_min(rate_u_h: f64) -> f64 {
    rate_u_h * 1.0e6 / 60.0
}

/// Physiological parameters of one virtual patient.
///
/// Units: `body_weight` kg, `insulin_clearance` dl/min, `tau1`/`tau2` min,
/// `p2` 1/min, `insulin_sensitivity` per µU/ml of plasma insulin per min,
/// `gezi` 1/min, `egp` mg/dl/min, `v_g` dl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientParams {
    pub body_weight: f64,
    pub insulin_clearance: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub p2: f64,
    pub insulin_sensitivity: f64,
    pub gezi: f64,
    pub egp: f64,
    pub v_g: f64,
}

impl PatientParams {
    /// Check the parameter invariants: everything strictly positive,
    /// transport time constants at least one minute, `gezi < 1`.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("body_weight", self.body_weight),
            ("insulin_clearance", self.insulin_clearance),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("p2", self.p2),
            ("insulin_sensitivity", self.insulin_sensitivity),
            ("gezi", self.gezi),
            ("egp", self.egp),
            ("v_g", self.v_g),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("patient parameter {name}")));
            }
            if v <= 0.0 {
                return Err(Error::invalid(format!(
                    "patient parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.tau1 < 1.0 || self.tau2 < 1.0 {
            return Err(Error::invalid(format!(
                "tau1 and tau2 must be at least 1 min, got {} and {}",
                self.tau1, self.tau2
            )));
        }
        if self.gezi >= 1.0 {
            return Err(Error::invalid(format!("gezi must be < 1, got {}", self.gezi)));
        }
        Ok(())
    }
}

/// Instantaneous physiological state.
///
/// `g` mg/dl, `i_sc`/`i_p` insulin compartment levels, `i_eff` 1/min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientState {
    pub g: f64,
    pub i_sc: f64,
    pub i_p: f64,
    pub i_eff: f64,
}

impl PatientState {
    /// Steady state consistent with holding glucose at `g` under the basal
    /// delivery returned by [`steady_basal`].
    pub fn steady(params: &PatientParams, g: f64) -> Result<Self> {
        let id = steady_basal(params, g)?;
        let i_sc = id / params.insulin_clearance;
        Ok(PatientState {
            g,
            i_sc,
            i_p: i_sc,
            i_eff: params.insulin_sensitivity * i_sc,
        })
    }

    fn is_finite(&self) -> bool {
        self.g.is_finite() && self.i_sc.is_finite() && self.i_p.is_finite() && self.i_eff.is_finite()
    }
}

/// Time-derivative of a [`PatientState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRates {
    pub dg: f64,
    pub di_sc: f64,
    pub di_p: f64,
    pub di_eff: f64,
}

/// Exogenous glucose appearance: a list of (start, amplitude, duration)
/// rectangles in mg/dl/min. Empty by default; the simulation protocol runs
/// patients without meals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MealProfile(pub Vec<MealEvent>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealEvent {
    pub start_min: f64,
    pub amplitude: f64,
    pub duration_min: f64,
}

impl MealProfile {
    pub fn validate(&self) -> Result<()> {
        for m in &self.0 {
            if m.amplitude < 0.0 {
                return Err(Error::invalid(format!(
                    "meal amplitude must be >= 0, got {}",
                    m.amplitude
                )));
            }
        }
        Ok(())
    }

    /// Glucose appearance rate at absolute time `t_min`.
    pub fn r_a(&self, t_min: f64) -> f64 {
        self.0
            .iter()
            .filter(|m| t_min >= m.start_min && t_min < m.start_min + m.duration_min)
            .map(|m| m.amplitude)
            .sum()
    }
}

/// Evaluate the model right-hand side. `insulin_delivery` is in µU/min,
/// `r_a` in mg/dl/min.
pub fn derivatives(
    state: &PatientState,
    params: &PatientParams,
    insulin_delivery: f64,
    r_a: f64,
) -> Result<StateRates> {
    if !state.is_finite() {
        return Err(Error::NonFinite("patient state".into()));
    }
    if !insulin_delivery.is_finite() || !r_a.is_finite() {
        return Err(Error::NonFinite("model inputs (insulin delivery / R_A)".into()));
    }
    let di_sc = -state.i_sc / params.tau1 + insulin_delivery / (params.tau1 * params.insulin_clearance);
    let di_p = (state.i_sc - state.i_p) / params.tau2;
    let di_eff = -params.p2 * state.i_eff + params.p2 * params.insulin_sensitivity * state.i_p;
    let dg = -(params.gezi + state.i_eff) * state.g + params.egp + r_a;
    if !dg.is_finite() {
        return Err(Error::NonFinite("dG/dt".into()));
    }
    Ok(StateRates { dg, di_sc, di_p, di_eff })
}

/// Result of integrating one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: PatientState,
    /// True when the glucose floor clamp engaged during the step.
    pub clamped: bool,
}

/// Advance the state one control step of `dt_min` minutes under a constant
/// insulin delivery (µU/min), using [`SUBSTEPS`] RK4 substeps and the default
/// glucose floor.
pub fn step(
    state: &PatientState,
    params: &PatientParams,
    insulin_delivery: f64,
    meal: &MealProfile,
    t0_min: f64,
    dt_min: f64,
) -> Result<StepOutcome> {
    step_with(state, params, insulin_delivery, meal, t0_min, dt_min, SUBSTEPS, DEFAULT_G_FLOOR)
}

/// [`step`] with explicit substep count and glucose floor.
#[allow(clippy::too_many_arguments)]
pub fn step_with(
    state: &PatientState,
    params: &PatientParams,
    insulin_delivery: f64,
    meal: &MealProfile,
    t0_min: f64,
    dt_min: f64,
    substeps: u32,
    g_floor: f64,
) -> Result<StepOutcome> {
    if dt_min <= 0.0 {
        return Err(Error::invalid(format!("dt must be > 0, got {dt_min}")));
    }
    if substeps == 0 {
        return Err(Error::invalid("substeps must be >= 1"));
    }
    let h = dt_min / substeps as f64;
    let mut s = *state;
    let mut clamped = false;
    for k in 0..substeps {
        let t = t0_min + h * k as f64;
        let k1 = derivatives(&s, params, insulin_delivery, meal.r_a(t))?;
        let k2 = derivatives(&advance(&s, &k1, h / 2.0), params, insulin_delivery, meal.r_a(t + h / 2.0))?;
        let k3 = derivatives(&advance(&s, &k2, h / 2.0), params, insulin_delivery, meal.r_a(t + h / 2.0))?;
        let k4 = derivatives(&advance(&s, &k3, h), params, insulin_delivery, meal.r_a(t + h))?;
        s = PatientState {
            g: s.g + h / 6.0 * (k1.dg + 2.0 * k2.dg + 2.0 * k3.dg + k4.dg),
            i_sc: s.i_sc + h / 6.0 * (k1.di_sc + 2.0 * k2.di_sc + 2.0 * k3.di_sc + k4.di_sc),
            i_p: s.i_p + h / 6.0 * (k1.di_p + 2.0 * k2.di_p + 2.0 * k3.di_p + k4.di_p),
            i_eff: s.i_eff + h / 6.0 * (k1.di_eff + 2.0 * k2.di_eff + 2.0 * k3.di_eff + k4.di_eff),
        };
        if s.g < g_floor {
            s.g = g_floor;
            clamped = true;
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("patient state after integration substep".into()));
        }
    }
    Ok(StepOutcome { state: s, clamped })
}

fn advance(s: &PatientState, r: &StateRates, h: f64) -> PatientState {
    PatientState {
        g: s.g + h * r.dg,
        i_sc: s.i_sc + h * r.di_sc,
        i_p: s.i_p + h * r.di_p,
        i_eff: s.i_eff + h * r.di_eff,
    }
}

/// Basal insulin delivery (µU/min) that holds glucose at `g_target` in
/// steady state: `C_I * (EGP/G_T - GEZI) / S_I`.
pub fn steady_basal(params: &PatientParams, g_target: f64) -> Result<f64> {
    if g_target <= 0.0 {
        return Err(Error::invalid(format!("glucose target must be > 0, got {g_target}")));
    }
    let ratio = params.egp / g_target;
    if ratio <= params.gezi {
        return Err(Error::InfeasibleBasal { ratio, gezi: params.gezi });
    }
    Ok(params.insulin_clearance * (ratio - params.gezi) / params.insulin_sensitivity)
}

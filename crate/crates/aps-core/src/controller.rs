//! Reference insulin controllers and insulin-on-board bookkeeping.
//!
//! Two interchangeable control laws live behind the [`ControlLaw`] trait and
//! are selected by name (`"basal-bolus"` or `"openaps-like"`). Both emit an
//! insulin rate command in U/h each control step; the spread-over-one-step
//! convention turns correction doses (U) into rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-scenario controller configuration.
///
/// `basal_rate`/`max_rate` U/h, `correction_factor` mg/dl per U,
/// `target_bg` mg/dl, `dia_min` minutes, `hypo_cutoff` mg/dl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub basal_rate: f64,
    pub correction_factor: f64,
    pub target_bg: f64,
    pub max_rate: f64,
    pub dia_min: f64,
    pub epsilon_action: f64,
    #[serde(default = "default_hypo_cutoff")]
    pub hypo_cutoff: f64,
}

fn default_hypo_cutoff() -> f64 {
    70.0
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.basal_rate > 0.0 && self.basal_rate <= self.max_rate) {
            return Err(Error::invalid(format!(
                "need 0 < basal_rate <= max_rate, got basal {} max {}",
                self.basal_rate, self.max_rate
            )));
        }
        if self.correction_factor <= 0.0 {
            return Err(Error::invalid("correction_factor must be > 0"));
        }
        if !(70.0..=180.0).contains(&self.target_bg) {
            return Err(Error::invalid(format!(
                "target_bg must lie in [70, 180], got {}",
                self.target_bg
            )));
        }
        if self.dia_min < 60.0 {
            return Err(Error::invalid(format!("dia_min must be >= 60, got {}", self.dia_min)));
        }
        if !(self.epsilon_action > 0.0 && self.epsilon_action < 0.5) {
            return Err(Error::invalid(format!(
                "epsilon_action must lie in (0, 0.5), got {}",
                self.epsilon_action
            )));
        }
        Ok(())
    }
}

/// Insulin-on-board state: the decayed sum of past doses plus the dose log
/// that backs the bookkeeping invariant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IobState {
    pub iob: f64,
    pub elapsed_min: f64,
    pub history: Vec<(f64, f64)>,
}

impl IobState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Recompute the decayed sum of logged doses; equals `iob` up to
    /// floating-point error after any sequence of updates.
    pub fn decayed_sum(&self, dia_min: f64) -> f64 {
        let half_life = dia_min / 2.0;
        self.history
            .iter()
            .map(|(t, dose)| dose * (-(self.elapsed_min - t) * std::f64::consts::LN_2 / half_life).exp())
            .sum()
    }
}

/// Decay the running IOB over `dt_min` with half-life `dia_min / 2`, then add
/// the newly delivered dose (U).
pub fn iob_update(state: &IobState, delivered_dose: f64, dt_min: f64, dia_min: f64) -> IobState {
    debug_assert!(delivered_dose >= 0.0);
    let half_life = dia_min / 2.0;
    let decay = (-dt_min * std::f64::consts::LN_2 / half_life).exp();
    let elapsed = state.elapsed_min + dt_min;
    let mut history = state.history.clone();
    if delivered_dose > 0.0 {
        history.push((elapsed, delivered_dose));
    }
    IobState { iob: state.iob * decay + delivered_dose, elapsed_min: elapsed, history }
}

/// A control law maps the controller's view of the patient to an insulin
/// rate command in U/h. Implementations are stateless; the simulation loop
/// owns the IOB estimate and glucose trend.
pub trait ControlLaw: Send + Sync {
    fn name(&self) -> &'static str;

    /// `seen_bg` mg/dl (possibly faulted), `trend` mg/dl/min, `iob` U.
    fn command(&self, seen_bg: f64, trend: f64, iob: f64, dt_min: f64, cfg: &ControllerConfig) -> f64;
}

/// Basal rate plus correction boluses above IOB, spread over one step.
/// Suspends below the hypoglycemia cutoff.
pub struct BasalBolus;

impl ControlLaw for BasalBolus {
    fn name(&self) -> &'static str {
        "basal-bolus"
    }

    fn command(&self, seen_bg: f64, _trend: f64, iob: f64, dt_min: f64, cfg: &ControllerConfig) -> f64 {
        if seen_bg < cfg.hypo_cutoff {
            return 0.0;
        }
        let correction_u = ((seen_bg - cfg.target_bg) / cfg.correction_factor - iob).max(0.0);
        (cfg.basal_rate + correction_u * (60.0 / dt_min)).clamp(0.0, cfg.max_rate)
    }
}

/// Trend-projecting law: predicts the eventual glucose 30 minutes out, nets
/// out IOB, and doses proportionally against the duration of insulin action.
pub struct OpenApsLike;

impl ControlLaw for OpenApsLike {
    fn name(&self) -> &'static str {
        "openaps-like"
    }

    fn command(&self, seen_bg: f64, trend: f64, iob: f64, _dt_min: f64, cfg: &ControllerConfig) -> f64 {
        let eventual_bg = seen_bg + trend * 30.0 - iob * cfg.correction_factor;
        if eventual_bg < cfg.hypo_cutoff {
            return 0.0;
        }
        let cmd = cfg.basal_rate + (eventual_bg - cfg.target_bg) / (cfg.correction_factor * (cfg.dia_min / 60.0));
        cmd.clamp(0.0, cfg.max_rate)
    }
}

/// Look a control law up by its registered name.
pub fn control_law(name: &str) -> Result<Box<dyn ControlLaw>> {
    match name {
        "basal-bolus" => Ok(Box::new(BasalBolus)),
        "openaps-like" => Ok(Box::new(OpenApsLike)),
        other => Err(Error::config(format!(
            "unknown controller `{other}` (expected \"basal-bolus\" or \"openaps-like\")"
        ))),
    }
}

/// Names of all registered control laws.
pub fn control_law_names() -> &'static [&'static str] {
    &["basal-bolus", "openaps-like"]
}

/// Convenience wrapper over [`BasalBolus`].
pub fn basal_bolus_step(bg: f64, cfg: &ControllerConfig, iob: f64, dt_min: f64) -> f64 {
    BasalBolus.command(bg, 0.0, iob, dt_min, cfg)
}

/// Convenience wrapper over [`OpenApsLike`].
pub fn openaps_like_step(bg: f64, trend: f64, cfg: &ControllerConfig, iob: f64) -> f64 {
    OpenApsLike.command(bg, trend, iob, 5.0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> ControllerConfig {
        ControllerConfig {
            basal_rate: 1.0,
            correction_factor: 40.0,
            target_bg: 120.0,
            max_rate: 10.0,
            dia_min: 240.0,
            epsilon_action: 0.05,
            hypo_cutoff: 70.0,
        }
    }

    #[test]
    fn iob_one_half_life() {
        let state = IobState { iob: 2.0, elapsed_min: 0.0, history: vec![(0.0, 2.0)] };
        let next = iob_update(&state, 0.0, 120.0, 240.0);
        assert_relative_eq!(next.iob, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn iob_plain_dose() {
        let next = iob_update(&IobState::new(), 1.5, 5.0, 240.0);
        assert_relative_eq!(next.iob, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn iob_geometric_limit() {
        let dia = 60.0;
        let dt = 5.0;
        let dose = 1.0 * dt / 60.0; // 1 U/h for one step
        let decay = (-dt * std::f64::consts::LN_2 / (dia / 2.0)).exp();
        let limit = dose / (1.0 - decay);
        let mut s = IobState::new();
        for _ in 0..200 {
            s = iob_update(&s, dose, dt, dia);
        }
        assert!((s.iob - limit).abs() < 1e-6, "iob {} vs limit {limit}", s.iob);
    }

    #[test]
    fn iob_bookkeeping_matches_history() {
        let dia = 180.0;
        let mut s = IobState::new();
        let doses = [0.5, 0.0, 1.2, 0.0, 0.0, 2.0, 0.1];
        for (k, d) in doses.iter().enumerate() {
            s = iob_update(&s, *d, 5.0 + k as f64, dia);
            assert!((s.iob - s.decayed_sum(dia)).abs() < 1e-9);
        }
    }

    #[test]
    fn basal_bolus_at_target_is_basal() {
        let c = cfg();
        assert_relative_eq!(basal_bolus_step(120.0, &c, 0.0, 5.0), 1.0);
        assert_relative_eq!(basal_bolus_step(120.0, &c, 3.0, 5.0), 1.0);
    }

    #[test]
    fn basal_bolus_hypo_cutoff() {
        let c = cfg();
        assert_eq!(basal_bolus_step(65.0, &c, 0.0, 5.0), 0.0);
    }

    #[test]
    fn basal_bolus_one_unit_spread() {
        let c = cfg();
        // BG = BGT + CF with no IOB: a 1 U correction spread over one step.
        let expected = (1.0_f64 + 1.0 * (60.0 / 5.0)).clamp(0.0, c.max_rate);
        assert_relative_eq!(basal_bolus_step(160.0, &c, 0.0, 5.0), expected);
    }

    #[test]
    fn openaps_at_eventual_target_is_basal() {
        let c = cfg();
        // trend and iob cancel so eventualBG == BGT exactly
        assert_relative_eq!(openaps_like_step(120.0, 0.0, &c, 0.0), 1.0);
    }

    #[test]
    fn openaps_large_iob_suspends() {
        let c = cfg();
        // eventualBG = 100 - 2*40 = 20 < 70
        assert_eq!(openaps_like_step(100.0, 0.0, &c, 2.0), 0.0);
    }

    #[test]
    fn openaps_arithmetic() {
        let c = cfg();
        // BG 180, flat, no IOB: 1 + (180 - 120) / 160
        assert_relative_eq!(openaps_like_step(180.0, 0.0, &c, 0.0), 1.0 + 60.0 / 160.0);
    }

    #[test]
    fn commands_clamped_and_monotone() {
        let c = cfg();
        for law in [&control_law("basal-bolus").unwrap(), &control_law("openaps-like").unwrap()] {
            let mut prev = -1.0;
            for i in 0..200 {
                let bg = 20.0 + i as f64 * 3.0;
                let cmd = law.command(bg, 0.0, 0.4, 5.0, &c);
                assert!((0.0..=c.max_rate).contains(&cmd));
                assert!(cmd >= prev - 1e-12, "not monotone in BG at bg={bg}");
                prev = cmd;
            }
            let mut prev = f64::INFINITY;
            for i in 0..100 {
                let iob = i as f64 * 0.05;
                let cmd = law.command(200.0, 0.0, iob, 5.0, &c);
                assert!(cmd <= prev + 1e-12, "not monotone in IOB at iob={iob}");
                prev = cmd;
            }
        }
    }

    #[test]
    fn registry_rejects_unknown() {
        assert!(control_law("pid").is_err());
        assert_eq!(control_law_names().len(), 2);
    }
}

//! Model-predictive range monitor.
//!
//! Keeps its own copy of the glucose model with population-average
//! parameters (deliberately mismatched with the simulated patient), feeds it
//! the observed commands, and each step propagates the model over the
//! prediction horizon with the current command held constant. An alarm
//! raises when the predicted glucose leaves the [70, 180] mg/dl envelope,
//! typed by which side it exits first.

use crate::glucose::{self, MealProfile, PatientParams, PatientState};
use crate::risk::Hazard;

use super::{AlarmSource, Monitor, Observation, Verdict};

pub struct MpcMonitor {
    params: PatientParams,
    horizon_min: f64,
    dt_min: f64,
    state: PatientState,
    meal: MealProfile,
}

impl MpcMonitor {
    pub fn new(params: PatientParams, horizon_min: f64, dt_min: f64) -> Self {
        let state = PatientState { g: 120.0, i_sc: 0.0, i_p: 0.0, i_eff: 0.0 };
        MpcMonitor { params, horizon_min, dt_min, state, meal: MealProfile::default() }
    }

    /// Average the shipped profiles into the population internal model.
    pub fn population_params(profiles: &[PatientParams]) -> Option<PatientParams> {
        if profiles.is_empty() {
            return None;
        }
        let n = profiles.len() as f64;
        let mean = |f: fn(&PatientParams) -> f64| profiles.iter().map(f).sum::<f64>() / n;
        Some(PatientParams {
            body_weight: mean(|p| p.body_weight),
            insulin_clearance: mean(|p| p.insulin_clearance),
            tau1: mean(|p| p.tau1),
            tau2: mean(|p| p.tau2),
            p2: mean(|p| p.p2),
            insulin_sensitivity: mean(|p| p.insulin_sensitivity),
            gezi: mean(|p| p.gezi),
            egp: mean(|p| p.egp),
            v_g: mean(|p| p.v_g),
        })
    }
}

impl Monitor for MpcMonitor {
    fn name(&self) -> &str {
        "mpc"
    }

    fn reset(&mut self) {
        self.state = PatientState { g: 120.0, i_sc: 0.0, i_p: 0.0, i_eff: 0.0 };
    }

    fn observe(&mut self, obs: &Observation) -> Verdict {
        // snap the model glucose to the sensor; insulin compartments carry
        // the monitor's own estimate built from observed commands
        self.state.g = obs.bg;
        let id = glucose::u_per_h_to_uu_per_min(obs.command);

        let steps = (self.horizon_min / self.dt_min).round() as usize;
        let mut predicted = self.state;
        let mut verdict = Verdict::Safe;
        for k in 0..steps {
            let t = obs.t_min + k as f64 * self.dt_min;
            // the internal model is approximate anyway; a coarser substep
            // keeps the per-step horizon sweep cheap
            match glucose::step_with(
                &predicted,
                &self.params,
                id,
                &self.meal,
                t,
                self.dt_min,
                2,
                glucose::DEFAULT_G_FLOOR,
            ) {
                Ok(out) => predicted = out.state,
                Err(_) => break,
            }
            if predicted.g < 70.0 {
                verdict = Verdict::Unsafe { hazard: Hazard::H1, source: AlarmSource::Mpc };
                break;
            }
            if predicted.g > 180.0 {
                verdict = Verdict::Unsafe { hazard: Hazard::H2, source: AlarmSource::Mpc };
                break;
            }
        }

        // advance the internal estimate one real step with the same command
        if let Ok(out) = glucose::step(&self.state, &self.params, id, &self.meal, obs.t_min, self.dt_min) {
            self.state = out.state;
        }
        verdict
    }
}

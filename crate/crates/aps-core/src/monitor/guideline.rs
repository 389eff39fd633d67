//! Generic medical-guideline monitor.
//!
//! Four checks over the glucose stream alone, no controller or patient
//! knowledge beyond two per-patient percentiles:
//!
//! 1. BG must stay inside (70, 180) mg/dl;
//! 2. the per-step change must stay inside (-5, 3) mg/dl;
//! 3. BG below the patient's 10th percentile must recover within alpha
//!    minutes;
//! 4. BG above the 90th percentile likewise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::Hazard;

use super::{AlarmSource, Monitor, Observation, Verdict};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidelineConfig {
    /// Patient's 10th percentile of fault-free glucose, mg/dl.
    pub lambda10: f64,
    /// Patient's 90th percentile, mg/dl.
    pub lambda90: f64,
    /// Recovery deadline, minutes; multiple of the control step.
    pub alpha_min: f64,
}

pub struct GuidelineMonitor {
    cfg: GuidelineConfig,
    dt_min: f64,
    prev_bg: Option<f64>,
    below_steps: usize,
    above_steps: usize,
}

impl GuidelineMonitor {
    pub fn new(cfg: GuidelineConfig, dt_min: f64) -> Result<Self> {
        if cfg.lambda10 >= cfg.lambda90 {
            return Err(Error::invalid(format!(
                "lambda10 {} must be below lambda90 {}",
                cfg.lambda10, cfg.lambda90
            )));
        }
        if (cfg.alpha_min / dt_min).fract().abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "alpha {} must be a multiple of the control step {}",
                cfg.alpha_min, dt_min
            )));
        }
        Ok(GuidelineMonitor { cfg, dt_min, prev_bg: None, below_steps: 0, above_steps: 0 })
    }
}

impl Monitor for GuidelineMonitor {
    fn name(&self) -> &str {
        "guideline"
    }

    fn reset(&mut self) {
        self.prev_bg = None;
        self.below_steps = 0;
        self.above_steps = 0;
    }

    fn observe(&mut self, obs: &Observation) -> Verdict {
        let bg = obs.bg;
        let delta = self.prev_bg.map(|p| bg - p);
        self.prev_bg = Some(bg);

        if bg < self.cfg.lambda10 {
            self.below_steps += 1;
        } else {
            self.below_steps = 0;
        }
        if bg > self.cfg.lambda90 {
            self.above_steps += 1;
        } else {
            self.above_steps = 0;
        }

        // phi1: absolute range
        if bg <= 70.0 {
            return Verdict::Unsafe { hazard: Hazard::H1, source: AlarmSource::Guideline(1) };
        }
        if bg >= 180.0 {
            return Verdict::Unsafe { hazard: Hazard::H2, source: AlarmSource::Guideline(1) };
        }
        // phi2: rate bound per step
        if let Some(d) = delta {
            if d <= -5.0 {
                return Verdict::Unsafe { hazard: Hazard::H1, source: AlarmSource::Guideline(2) };
            }
            if d >= 3.0 {
                return Verdict::Unsafe { hazard: Hazard::H2, source: AlarmSource::Guideline(2) };
            }
        }
        // phi3/phi4: percentile excursions must recover within alpha minutes.
        // A streak of k samples spans (k-1)*dt minutes since the excursion
        // began; the alarm raises once that exceeds alpha.
        if self.below_steps > 0 && (self.below_steps - 1) as f64 * self.dt_min > self.cfg.alpha_min {
            return Verdict::Unsafe { hazard: Hazard::H1, source: AlarmSource::Guideline(3) };
        }
        if self.above_steps > 0 && (self.above_steps - 1) as f64 * self.dt_min > self.cfg.alpha_min {
            return Verdict::Unsafe { hazard: Hazard::H2, source: AlarmSource::Guideline(4) };
        }
        Verdict::Safe
    }
}

//! Hazard mitigation policy.
//!
//! On an unsafe verdict the corrective command replaces the controller's:
//! zero insulin for H1 (overdosing), a fixed maximum corrective rate for H2
//! (underdosing). Correction latches until the system is back in the safe
//! region — no rule firing and glucose inside [70, 180] — and then the raw
//! command passes through again.

use serde::{Deserialize, Serialize};

use crate::risk::Hazard;

use super::Verdict;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MitigationConfig {
    /// Corrective insulin rate for H2 hazards, U/h; at most the pump max.
    pub max_corrective: f64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig { max_corrective: 10.0 }
    }
}

/// Scenario-local mitigation state.
pub struct Mitigator {
    cfg: MitigationConfig,
    latched: Option<Hazard>,
}

impl Mitigator {
    pub fn new(cfg: MitigationConfig) -> Self {
        Mitigator { cfg, latched: None }
    }

    pub fn reset(&mut self) {
        self.latched = None;
    }

    /// Decide the delivered command. Returns `(delivered, active)`.
    pub fn apply(&mut self, verdict: &Verdict, bg: f64, command: f64) -> (f64, bool) {
        match verdict {
            Verdict::Unsafe { hazard, .. } => self.latched = Some(*hazard),
            Verdict::Safe => {
                // release only once the context is back in the safe region
                if (70.0..=180.0).contains(&bg) {
                    self.latched = None;
                }
            }
        }
        match self.latched {
            Some(Hazard::H1) => (0.0, true),
            Some(Hazard::H2) => (self.cfg.max_corrective, true),
            None => (command, false),
        }
    }
}

//! Context-aware monitor over the twelve UCA rules.
//!
//! With learned thresholds this is the refined monitor ("cawt"); with the
//! no-learning defaults it degrades to the unrefined baseline ("cawot").
//! Stateless: the verdict is a pure function of the observation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scs::{classify_action, ContextVector, UcasRule};

use super::{AlarmSource, Monitor, Observation, Verdict};

pub struct ContextMonitor {
    name: &'static str,
    rules: Vec<(UcasRule, f64)>,
    bgt: f64,
    diob_eps: f64,
    epsilon_action: f64,
}

impl ContextMonitor {
    pub fn new(
        name: &'static str,
        slots: BTreeMap<String, f64>,
        bgt: f64,
        diob_eps: f64,
        epsilon_action: f64,
    ) -> Result<Self> {
        let mut rules = Vec::new();
        for rule in crate::scs::default_ruleset() {
            let beta = *slots
                .get(rule.slot_name)
                .ok_or_else(|| Error::UnresolvedSlot(rule.slot_name.to_string()))?;
            rules.push((rule, beta));
        }
        Ok(ContextMonitor { name, rules, bgt, diob_eps, epsilon_action })
    }

    /// The resolved threshold of a rule, for reports.
    pub fn threshold(&self, rule_id: u8) -> Option<f64> {
        self.rules.iter().find(|(r, _)| r.id == rule_id).map(|(_, beta)| *beta)
    }
}

impl Monitor for ContextMonitor {
    fn name(&self) -> &str {
        self.name
    }

    fn reset(&mut self) {}

    fn observe(&mut self, obs: &Observation) -> Verdict {
        let cx = ContextVector { bg: obs.bg, dbg: obs.dbg, iob: obs.iob, diob: obs.diob };
        let action = classify_action(obs.command, obs.basal, self.epsilon_action);
        for (rule, beta) in &self.rules {
            if rule.fires(&cx, action, self.bgt, self.diob_eps, *beta) {
                return Verdict::Unsafe { hazard: rule.hazard, source: AlarmSource::Rule(rule.id) };
            }
        }
        Verdict::Safe
    }
}

//! Discrete-time evaluation: boolean satisfaction series and atom robustness.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{CmpOp, Formula, Threshold};

/// Named signals sampled on a shared uniform grid.
#[derive(Debug, Clone, Default)]
pub struct SignalTrace {
    dt_min: f64,
    len: usize,
    signals: BTreeMap<String, Vec<f64>>,
}

impl SignalTrace {
    pub fn new(dt_min: f64) -> Self {
        SignalTrace { dt_min, len: 0, signals: BTreeMap::new() }
    }

    pub fn with_signal(mut self, name: &str, samples: Vec<f64>) -> Result<Self> {
        self.insert(name, samples)?;
        Ok(self)
    }

    pub fn insert(&mut self, name: &str, samples: Vec<f64>) -> Result<()> {
        if self.signals.is_empty() {
            self.len = samples.len();
        } else if samples.len() != self.len {
            return Err(Error::invalid(format!(
                "signal `{name}` has {} samples, trace has {}",
                samples.len(),
                self.len
            )));
        }
        self.signals.insert(name.to_string(), samples);
        Ok(())
    }

    pub fn dt_min(&self) -> f64 {
        self.dt_min
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.signals
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownSignal(name.to_string()))
    }

    /// Convert a temporal bound in minutes to a sample offset. Lower bounds
    /// round up, upper bounds round down, so the window is the set of grid
    /// points inside `[lo, hi]`.
    fn offset(&self, minutes: f64, round_up: bool) -> usize {
        let ratio = minutes / self.dt_min;
        let r = if round_up { (ratio - 1e-9).ceil() } else { (ratio + 1e-9).floor() };
        r.max(0.0) as usize
    }
}

fn cmp_holds(op: CmpOp, value: f64, threshold: f64) -> bool {
    match op {
        CmpOp::Lt => value < threshold,
        CmpOp::Le => value <= threshold,
        CmpOp::Gt => value > threshold,
        CmpOp::Ge => value >= threshold,
        CmpOp::Eq => value == threshold,
    }
}

/// Satisfaction of the formula at every sample of the trace.
pub fn eval_series(f: &Formula, trace: &SignalTrace) -> Result<Vec<bool>> {
    let n = trace.len();
    Ok(match f {
        Formula::Prop(name) => trace.get(name)?.iter().map(|v| *v > 0.5).collect(),
        Formula::Atom { signal, op, rhs } => {
            let threshold = match rhs {
                Threshold::Lit(v) => *v,
                Threshold::Slot(name) => return Err(Error::UnresolvedSlot(name.clone())),
            };
            trace.get(signal)?.iter().map(|v| cmp_holds(*op, *v, threshold)).collect()
        }
        Formula::Not(inner) => eval_series(inner, trace)?.into_iter().map(|b| !b).collect(),
        Formula::And(a, b) => {
            let (a, b) = (eval_series(a, trace)?, eval_series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| x && y).collect()
        }
        Formula::Or(a, b) => {
            let (a, b) = (eval_series(a, trace)?, eval_series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| x || y).collect()
        }
        Formula::Implies(a, b) => {
            let (a, b) = (eval_series(a, trace)?, eval_series(b, trace)?);
            a.into_iter().zip(b).map(|(x, y)| !x || y).collect()
        }
        Formula::Globally { lo, hi, inner } => {
            let series = eval_series(inner, trace)?;
            let (lo, hi) = (trace.offset(*lo, true), trace.offset(*hi, false));
            (0..n)
                .map(|t| {
                    let a = t + lo;
                    let b = (t + hi).min(n.saturating_sub(1));
                    if a >= n || a > b {
                        true // empty window: vacuously satisfied
                    } else {
                        series[a..=b].iter().all(|x| *x)
                    }
                })
                .collect()
        }
        Formula::Eventually { lo, hi, inner } => {
            let series = eval_series(inner, trace)?;
            let (lo, hi) = (trace.offset(*lo, true), trace.offset(*hi, false));
            (0..n)
                .map(|t| {
                    let a = t + lo;
                    let b = (t + hi).min(n.saturating_sub(1));
                    if a >= n || a > b {
                        false // empty window: nothing to witness
                    } else {
                        series[a..=b].iter().any(|x| *x)
                    }
                })
                .collect()
        }
        Formula::Since(lhs, rhs) => {
            let (phi, psi) = (eval_series(lhs, trace)?, eval_series(rhs, trace)?);
            let mut out = vec![false; n];
            for t in 0..n {
                out[t] = psi[t] || (t > 0 && phi[t] && out[t - 1]);
            }
            out
        }
    })
}

/// Satisfaction at a single grid sample.
pub fn eval_bool(f: &Formula, trace: &SignalTrace, t: usize) -> Result<bool> {
    if t >= trace.len() {
        return Err(Error::invalid(format!("sample {t} beyond trace of length {}", trace.len())));
    }
    Ok(eval_series(f, trace)?[t])
}

/// Signed satisfaction margin of an ordering atom at sample `t`:
/// `value - threshold` for `>`/`>=`, `threshold - value` for `<`/`<=`.
/// Equality atoms and non-atoms have no robustness.
pub fn robustness(f: &Formula, trace: &SignalTrace, t: usize) -> Result<f64> {
    match f {
        Formula::Atom { signal, op, rhs } => {
            let threshold = match rhs {
                Threshold::Lit(v) => *v,
                Threshold::Slot(name) => return Err(Error::UnresolvedSlot(name.clone())),
            };
            let samples = trace.get(signal)?;
            let value = *samples
                .get(t)
                .ok_or_else(|| Error::invalid(format!("sample {t} beyond trace")))?;
            match op {
                CmpOp::Gt | CmpOp::Ge => Ok(value - threshold),
                CmpOp::Lt | CmpOp::Le => Ok(threshold - value),
                CmpOp::Eq => Err(Error::EqualityRobustness),
            }
        }
        _ => Err(Error::invalid("robustness is defined on atoms only")),
    }
}

//! Bounded-time signal temporal logic over uniformly sampled traces.
//!
//! The fragment covers ordering/equality atoms over named signals, boolean
//! propositions (0/1 signals), the usual connectives, time-bounded `G`/`F`,
//! and unbounded `S` (since). Thresholds are literals or named slots
//! (`?b1`) substituted before evaluation.
//!
//! Semantics are discrete over the sample grid. Interval bounds in minutes
//! convert to inclusive sample offsets. Windows extending past the end of a
//! trace clip to the available samples; an entirely out-of-range window makes
//! `G` vacuously true and `F` false. At zero robustness, non-strict
//! comparators are satisfied and strict ones are violated.
//!
//! Rule files are UTF-8 text with one formula per line; `#` starts a comment.
//! Grammar (precedence low to high, `->` right-associative):
//!
//! ```text
//! formula := or ('->' formula)?
//! or      := and ('||' and)*
//! and     := since ('&&' since)*
//! since   := unary ('S' unary)*
//! unary   := '!' unary | 'G' '[' num ',' num ']' unary
//!          | 'F' '[' num ',' num ']' unary | '(' formula ')' | atom
//! atom    := ident (('<'|'<='|'>'|'>='|'=') (num | '?' ident))?
//! ```
//!
//! `G`, `F`, and `S` are reserved words and cannot name signals.

mod eval;
mod parse;

pub use eval::{eval_bool, eval_series, robustness, SignalTrace};
pub use parse::{parse, parse_rule_file};

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Ordering or equality comparator of an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }
}

/// Right-hand side of an atom: a literal or a named slot to be resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Threshold {
    Lit(f64),
    Slot(String),
}

/// Formula AST.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// Boolean proposition: signal sample > 0.5 counts as true.
    Prop(String),
    /// `signal op threshold`.
    Atom { signal: String, op: CmpOp, rhs: Threshold },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    /// `G[lo,hi] inner`, bounds in minutes.
    Globally { lo: f64, hi: f64, inner: Box<Formula> },
    /// `F[lo,hi] inner`, bounds in minutes.
    Eventually { lo: f64, hi: f64, inner: Box<Formula> },
    /// `lhs S rhs`: rhs held at some past sample and lhs ever since
    /// (exclusive of that sample, inclusive of now).
    Since(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Substitute named slots with values; errors on a slot missing from the
    /// map so partially resolved formulas never reach evaluation.
    pub fn resolve(&self, slots: &BTreeMap<String, f64>) -> Result<Formula> {
        Ok(match self {
            Formula::Prop(s) => Formula::Prop(s.clone()),
            Formula::Atom { signal, op, rhs } => {
                let rhs = match rhs {
                    Threshold::Lit(v) => Threshold::Lit(*v),
                    Threshold::Slot(name) => Threshold::Lit(
                        *slots.get(name).ok_or_else(|| Error::UnresolvedSlot(name.clone()))?,
                    ),
                };
                Formula::Atom { signal: signal.clone(), op: *op, rhs }
            }
            Formula::Not(f) => Formula::Not(Box::new(f.resolve(slots)?)),
            Formula::And(a, b) => Formula::And(Box::new(a.resolve(slots)?), Box::new(b.resolve(slots)?)),
            Formula::Or(a, b) => Formula::Or(Box::new(a.resolve(slots)?), Box::new(b.resolve(slots)?)),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.resolve(slots)?), Box::new(b.resolve(slots)?))
            }
            Formula::Globally { lo, hi, inner } => {
                Formula::Globally { lo: *lo, hi: *hi, inner: Box::new(inner.resolve(slots)?) }
            }
            Formula::Eventually { lo, hi, inner } => {
                Formula::Eventually { lo: *lo, hi: *hi, inner: Box::new(inner.resolve(slots)?) }
            }
            Formula::Since(a, b) => {
                Formula::Since(Box::new(a.resolve(slots)?), Box::new(b.resolve(slots)?))
            }
        })
    }

    /// Names of unresolved slots, in first-appearance order.
    pub fn slots(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots(&self, out: &mut Vec<String>) {
        match self {
            Formula::Atom { rhs: Threshold::Slot(name), .. } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Formula::Atom { .. } | Formula::Prop(_) => {}
            Formula::Not(f) => f.collect_slots(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Since(a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
            Formula::Globally { inner, .. } | Formula::Eventually { inner, .. } => inner.collect_slots(out),
        }
    }

    /// Check that every referenced signal is known.
    pub fn validate_signals(&self, known: &[&str]) -> Result<()> {
        match self {
            Formula::Prop(s) | Formula::Atom { signal: s, .. } => {
                if known.contains(&s.as_str()) {
                    Ok(())
                } else {
                    Err(Error::UnknownSignal(s.clone()))
                }
            }
            Formula::Not(f) => f.validate_signals(known),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Since(a, b) => {
                a.validate_signals(known)?;
                b.validate_signals(known)
            }
            Formula::Globally { inner, .. } | Formula::Eventually { inner, .. } => {
                inner.validate_signals(known)
            }
        }
    }

    /// Well-formedness of interval bounds: `0 <= lo <= hi` everywhere.
    pub fn validate_intervals(&self) -> Result<()> {
        match self {
            Formula::Prop(_) | Formula::Atom { .. } => Ok(()),
            Formula::Not(f) => f.validate_intervals(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Since(a, b) => {
                a.validate_intervals()?;
                b.validate_intervals()
            }
            Formula::Globally { lo, hi, inner } | Formula::Eventually { lo, hi, inner } => {
                if !(*lo >= 0.0 && lo <= hi) {
                    return Err(Error::invalid(format!("bad temporal interval [{lo},{hi}]")));
                }
                inner.validate_intervals()
            }
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for Formula {
    /// Canonical fully parenthesized rendering; `parse(format!("{f}"))`
    /// reconstructs the identical AST.
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Prop(s) => write!(w, "{s}"),
            Formula::Atom { signal, op, rhs } => match rhs {
                Threshold::Lit(v) => write!(w, "{signal} {} {}", op.as_str(), fmt_num(*v)),
                Threshold::Slot(name) => write!(w, "{signal} {} ?{name}", op.as_str()),
            },
            Formula::Not(f) => match **f {
                Formula::Prop(_) => write!(w, "!{f}"),
                _ => write!(w, "!({f})"),
            },
            Formula::And(a, b) => write!(w, "({a} && {b})"),
            Formula::Or(a, b) => write!(w, "({a} || {b})"),
            Formula::Implies(a, b) => write!(w, "({a} -> {b})"),
            Formula::Globally { lo, hi, inner } => {
                write!(w, "G[{},{}]({inner})", fmt_num(*lo), fmt_num(*hi))
            }
            Formula::Eventually { lo, hi, inner } => {
                write!(w, "F[{},{}]({inner})", fmt_num(*lo), fmt_num(*hi))
            }
            Formula::Since(a, b) => write!(w, "({a} S {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_slots() {
        let f = parse("G[0,750]((BG > ?bgt && IOB < ?b1) -> !u1)").unwrap();
        assert_eq!(f.slots(), vec!["bgt".to_string(), "b1".to_string()]);
        let mut slots = BTreeMap::new();
        slots.insert("bgt".to_string(), 120.0);
        assert!(matches!(f.resolve(&slots), Err(Error::UnresolvedSlot(ref s)) if s == "b1"));
        slots.insert("b1".to_string(), 1.5);
        let resolved = f.resolve(&slots).unwrap();
        assert!(resolved.slots().is_empty());
        assert_eq!(resolved.to_string(), "G[0,750](((BG > 120 && IOB < 1.5) -> !u1))");
    }

    #[test]
    fn validate_signals_reports_unknown() {
        let f = parse("G[0,10](XY > 1)").unwrap();
        assert!(matches!(f.validate_signals(&["BG"]), Err(Error::UnknownSignal(ref s)) if s == "XY"));
        assert!(f.validate_signals(&["XY"]).is_ok());
    }

    #[test]
    fn interval_validation() {
        let f = Formula::Globally { lo: 5.0, hi: 1.0, inner: Box::new(Formula::Prop("u1".into())) };
        assert!(f.validate_intervals().is_err());
    }
}

//! Blood-glucose risk function, windowed LBGI/HBGI indices, and hazard
//! ground-truth labeling.
//!
//! The symmetrizing risk function is
//! `risk(BG) = 10 * (1.509 * ((ln BG)^1.084 - 5.381))^2`,
//! zero near 112.5 mg/dl and close to 100 at both 20 and 600 mg/dl. Samples
//! on the low side (inner term negative) feed LBGI, the high side feeds
//! HBGI; each windowed index is the mean of its one-sided risk over the
//! trailing window. A step is labeled hazardous when an index exceeds its
//! clinical threshold (LBGI > 5, HBGI > 9) while still increasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hazard classes: H1 is excessive insulin (toward hypoglycemia), H2 is
/// insufficient insulin (toward hyperglycemia).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hazard {
    H1,
    H2,
}

impl Hazard {
    pub fn as_str(&self) -> &'static str {
        match self {
            Hazard::H1 => "H1",
            Hazard::H2 => "H2",
        }
    }

    pub fn parse(s: &str) -> Option<Hazard> {
        match s {
            "H1" => Some(Hazard::H1),
            "H2" => Some(Hazard::H2),
            _ => None,
        }
    }
}

/// Side of the risk curve a glucose reading falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskSide {
    Low,
    High,
    Zero,
}

/// Inner symmetrized deviation `1.509 * ((ln BG)^1.084 - 5.381)`; negative on
/// the hypoglycemic side.
pub fn risk_signed(bg: f64) -> Result<f64> {
    if bg.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::invalid(format!("BG must be > 0 for the risk function, got {bg}")));
    }
    let v = 1.509 * (bg.ln().powf(1.084) - 5.381);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("risk({bg})")));
    }
    Ok(v)
}

/// Risk value at one glucose reading.
pub fn risk(bg: f64) -> Result<f64> {
    let f = risk_signed(bg)?;
    Ok(10.0 * f * f)
}

/// Risk with its side of the curve.
pub fn risk_sided(bg: f64) -> Result<(f64, RiskSide)> {
    let f = risk_signed(bg)?;
    let side = if f < 0.0 {
        RiskSide::Low
    } else if f > 0.0 {
        RiskSide::High
    } else {
        RiskSide::Zero
    };
    Ok((10.0 * f * f, side))
}

/// Windowed indices: mean one-sided risk over the given glucose window.
/// Low-side samples contribute to LBGI only, high-side to HBGI only.
pub fn lbgi_hbgi(window: &[f64]) -> Result<(f64, f64)> {
    if window.is_empty() {
        return Err(Error::invalid("LBGI/HBGI window must be non-empty"));
    }
    let mut low = 0.0;
    let mut high = 0.0;
    for &bg in window {
        let (r, side) = risk_sided(bg)?;
        match side {
            RiskSide::Low => low += r,
            RiskSide::High => high += r,
            RiskSide::Zero => {}
        }
    }
    let n = window.len() as f64;
    Ok((low / n, high / n))
}

/// Default trailing-window length in samples (1 hour at 5-minute steps).
pub const DEFAULT_WINDOW: usize = 12;

/// Labeling thresholds and window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelParams {
    pub window: usize,
    pub lbgi_threshold: f64,
    pub hbgi_threshold: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        LabelParams { window: DEFAULT_WINDOW, lbgi_threshold: 5.0, hbgi_threshold: 9.0 }
    }
}

/// Per-step risk indices over a glucose series.
#[derive(Debug, Clone)]
pub struct RiskSeries {
    pub risk: Vec<f64>,
    pub lbgi: Vec<f64>,
    pub hbgi: Vec<f64>,
    pub window: usize,
}

/// Compute per-step risk and trailing-window LBGI/HBGI. Early steps use the
/// partial window available so far.
pub fn risk_series(bg: &[f64], window: usize) -> Result<RiskSeries> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    let mut out = RiskSeries {
        risk: Vec::with_capacity(bg.len()),
        lbgi: Vec::with_capacity(bg.len()),
        hbgi: Vec::with_capacity(bg.len()),
        window,
    };
    for t in 0..bg.len() {
        out.risk.push(risk(bg[t])?);
        let start = (t + 1).saturating_sub(window);
        let (l, h) = lbgi_hbgi(&bg[start..=t])?;
        out.lbgi.push(l);
        out.hbgi.push(h);
    }
    Ok(out)
}

/// Hazard labels for one trace.
#[derive(Debug, Clone, Default)]
pub struct LabelSeries {
    pub labels: Vec<Option<Hazard>>,
    /// First labeled step, if any.
    pub onset: Option<usize>,
    /// Hazard type at onset; fixes the trace's type for learning.
    pub onset_type: Option<Hazard>,
}

/// Label each step: H1 when LBGI exceeds its threshold and is still rising
/// versus the previous step, H2 symmetrically for HBGI. A flat plateau at the
/// threshold does not label. If both sides fire at one step, H1 wins.
pub fn label(bg: &[f64], params: &LabelParams) -> Result<LabelSeries> {
    if bg.len() < params.window {
        return Err(Error::invalid(format!(
            "trace of {} samples is shorter than the {}-sample labeling window",
            bg.len(),
            params.window
        )));
    }
    let series = risk_series(bg, params.window)?;
    let mut out = LabelSeries { labels: vec![None; bg.len()], ..Default::default() };
    for t in 1..bg.len() {
        let h1 = series.lbgi[t] > params.lbgi_threshold && series.lbgi[t] > series.lbgi[t - 1];
        let h2 = series.hbgi[t] > params.hbgi_threshold && series.hbgi[t] > series.hbgi[t - 1];
        let label = if h1 {
            Some(Hazard::H1)
        } else if h2 {
            Some(Hazard::H2)
        } else {
            None
        };
        out.labels[t] = label;
        if let (Some(h), None) = (label, out.onset) {
            out.onset = Some(t);
            out.onset_type = Some(h);
        }
    }
    Ok(out)
}

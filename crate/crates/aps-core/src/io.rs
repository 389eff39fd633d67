//! File formats: trace CSV with JSON sidecar, patient profiles, threshold
//! sets, fold assignments, and run manifests.
//!
//! Trace CSV schema, one row per control step:
//!
//! ```text
//! t_min,true_bg,seen_bg,iob,raw_cmd,delivered_cmd,fault,alarm,mitig,label
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so re-reading a
//! trace reproduces the exact values and repeated runs produce byte-identical
//! files. The `alarm` column is `-` or `H1:r10`-style (hazard:source);
//! `label` is `-`, `H1`, or `H2`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::glucose::PatientParams;
use crate::learn::ThresholdSet;
use crate::monitor::AlarmSource;
use crate::risk::Hazard;
use crate::sim::{Trace, TraceHeader, TraceStep};

pub const TRACE_CSV_HEADER: &str =
    "t_min,true_bg,seen_bg,iob,raw_cmd,delivered_cmd,fault,alarm,mitig,label";

/// Sentinel for +infinity in threshold JSON (JSON has no infinity literal).
const INF_SENTINEL: f64 = 1.0e308;

/// A named patient profile as stored in the profiles file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatientProfile {
    pub name: String,
    #[serde(flatten)]
    pub params: PatientParams,
}

/// Load the profiles file: a JSON array of named parameter records.
pub fn load_profiles(path: &Path) -> Result<Vec<PatientProfile>> {
    let text = fs::read_to_string(path)?;
    let profiles: Vec<PatientProfile> = serde_json::from_str(&text)?;
    if profiles.is_empty() {
        return Err(Error::config(format!("{} contains no profiles", path.display())));
    }
    for p in &profiles {
        p.params.validate().map_err(|e| Error::config(format!("profile {}: {e}", p.name)))?;
    }
    Ok(profiles)
}

pub fn profile_map(profiles: &[PatientProfile]) -> BTreeMap<String, PatientParams> {
    profiles.iter().map(|p| (p.name.clone(), p.params.clone())).collect()
}

fn fmt_alarm(alarm: &Option<(Hazard, AlarmSource)>) -> String {
    match alarm {
        None => "-".to_string(),
        Some((h, s)) => format!("{}:{s}", h.as_str()),
    }
}

fn parse_alarm(text: &str) -> Result<Option<(Hazard, AlarmSource)>> {
    if text == "-" {
        return Ok(None);
    }
    let (h, s) = text
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("bad alarm cell `{text}`")))?;
    let hazard = Hazard::parse(h).ok_or_else(|| Error::invalid(format!("bad hazard `{h}`")))?;
    let source = AlarmSource::parse(s).ok_or_else(|| Error::invalid(format!("bad source `{s}`")))?;
    Ok(Some((hazard, source)))
}

/// Serialize one trace to its CSV body.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.steps.len() * 64 + 64);
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.t_min,
            s.true_bg,
            s.seen_bg,
            s.iob,
            s.raw_cmd,
            s.delivered_cmd,
            u8::from(s.fault_active),
            fmt_alarm(&s.alarm),
            u8::from(s.mitigation_active),
            s.label.map_or("-", |h| h.as_str()),
        ));
    }
    out
}

fn parse_f64(cell: &str, what: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::invalid(format!("bad {what} cell `{cell}`")))
}

/// Parse a CSV body back into steps.
pub fn steps_from_csv(text: &str) -> Result<Vec<TraceStep>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty trace file"))?;
    if header != TRACE_CSV_HEADER {
        return Err(Error::invalid(format!("unexpected trace header `{header}`")));
    }
    let mut steps = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 {
            return Err(Error::invalid(format!("expected 10 cells, got {}", cells.len())));
        }
        steps.push(TraceStep {
            t_min: parse_f64(cells[0], "t_min")?,
            true_bg: parse_f64(cells[1], "true_bg")?,
            seen_bg: parse_f64(cells[2], "seen_bg")?,
            iob: parse_f64(cells[3], "iob")?,
            raw_cmd: parse_f64(cells[4], "raw_cmd")?,
            delivered_cmd: parse_f64(cells[5], "delivered_cmd")?,
            fault_active: cells[6] == "1",
            alarm: parse_alarm(cells[7])?,
            mitigation_active: cells[8] == "1",
            label: if cells[9] == "-" { None } else { Hazard::parse(cells[9]) },
        });
    }
    Ok(steps)
}

/// Write a trace as `<dir>/<patient>/<scenario-id>.csv` plus the JSON
/// sidecar header. Returns the CSV path.
pub fn save_trace(dir: &Path, trace: &Trace) -> Result<PathBuf> {
    let patient_dir = dir.join(&trace.header.scenario.patient);
    fs::create_dir_all(&patient_dir)?;
    let base = patient_dir.join(&trace.header.scenario.id);
    let csv_path = base.with_extension("csv");
    fs::write(&csv_path, trace_to_csv(trace))?;
    let sidecar = serde_json::to_string_pretty(&trace.header)?;
    fs::write(base.with_extension("json"), sidecar + "\n")?;
    Ok(csv_path)
}

/// Load one trace from its CSV path (sidecar expected alongside).
pub fn load_trace(csv_path: &Path) -> Result<Trace> {
    let header_text = fs::read_to_string(csv_path.with_extension("json"))?;
    let header: TraceHeader = serde_json::from_str(&header_text)?;
    let steps = steps_from_csv(&fs::read_to_string(csv_path)?)?;
    Ok(Trace { header, steps })
}

/// Every trace CSV under a campaign directory, sorted for determinism.
pub fn list_trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for patient_entry in fs::read_dir(dir)? {
        let patient_entry = patient_entry?;
        if !patient_entry.file_type()?.is_dir() {
            continue;
        }
        for entry in fs::read_dir(patient_entry.path())? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Load a whole campaign.
pub fn load_campaign(dir: &Path) -> Result<Vec<Trace>> {
    list_trace_files(dir)?.iter().map(|p| load_trace(p)).collect()
}

/// Rewrite a trace in place (used by the labeling stage).
pub fn rewrite_trace(dir: &Path, trace: &Trace) -> Result<()> {
    save_trace(dir, trace)?;
    Ok(())
}

/// Threshold file: slots with provenance. Infinite no-learning defaults are
/// stored as a large sentinel and restored on load.
pub fn save_thresholds(path: &Path, set: &ThresholdSet) -> Result<()> {
    let mut stored = set.clone();
    for v in stored.slots.values_mut() {
        if v.is_infinite() {
            *v = INF_SENTINEL;
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(&stored)? + "\n")?;
    Ok(())
}

pub fn load_thresholds(path: &Path) -> Result<ThresholdSet> {
    let mut set: ThresholdSet = serde_json::from_str(&fs::read_to_string(path)?)?;
    for v in set.slots.values_mut() {
        if *v >= INF_SENTINEL {
            *v = f64::INFINITY;
        }
    }
    Ok(set)
}

/// Fold assignment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldFile {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

pub fn save_folds(path: &Path, folds: &FoldFile) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(folds)? + "\n")?;
    Ok(())
}

pub fn load_folds(path: &Path) -> Result<FoldFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Run manifest written into every output directory: tool version, seed,
/// input hashes, and the stage's parameters. Pure function of its inputs so
/// reruns stay byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub stage: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub params: serde_json::Value,
}

impl RunManifest {
    pub fn new(stage: &str, seed: Option<u64>) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            stage: stage.to_string(),
            seed,
            inputs: BTreeMap::new(),
            params: serde_json::Value::Null,
        }
    }

    pub fn with_input(mut self, name: &str, path: &Path) -> Result<Self> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(self)
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Digest of every file under a directory (relative path + contents),
/// for whole-campaign byte-identity checks.
pub fn sha256_dir(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap_or(&f);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(fs::read(&f)?);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

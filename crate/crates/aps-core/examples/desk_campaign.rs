//! End-to-end desk-scale campaign: simulate, label, learn, evaluate, and
//! run the mitigation study in process, printing the summary table.
//!
//! ```text
//! cargo run --release -p aps-core --example desk_campaign -- configs/profiles.json
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use aps_core::io;
use aps_core::learn::LearnConfig;
use aps_core::monitor::MonitorBuild;
use aps_core::pipeline::{self, CampaignSpec, MonitorProvider};
use aps_core::risk::LabelParams;

fn main() {
    let profiles_path = std::env::args().nth(1).unwrap_or_else(|| "configs/profiles.json".into());
    let profiles = io::load_profiles(std::path::Path::new(&profiles_path)).expect("profiles");

    // 7 kinds x 2 targets x 1 value x 9 timings = 126 faults per
    // (patient, initial BG) pair; 10 x 7 x 126 = 8,820 faulted runs.
    let spec = CampaignSpec { value_indices: vec![0, 3, 6], ..Default::default() };

    let t0 = Instant::now();
    let scenarios = pipeline::generate_scenarios(&spec, &profiles).expect("scenarios");
    let params = io::profile_map(&profiles);
    let (mut traces, failures) = pipeline::run_scenarios(&scenarios, &params, None, false);
    println!("simulated {} traces ({} failures) in {:.1?}", traces.len(), failures.len(), t0.elapsed());

    let label_params = LabelParams::default();
    let labels = pipeline::label_traces(&mut traces, &label_params).expect("labels");
    println!(
        "hazardous: {} of {} ({} H1, {} H2) in {:.1?}",
        labels.hazardous,
        labels.traces,
        labels.h1,
        labels.h2,
        t0.elapsed()
    );
    let faulted = traces.iter().filter(|t| t.header.scenario.fault.is_some()).count();
    let mut coverage: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for t in &traces {
        if t.header.scenario.fault.is_some() {
            let entry = coverage.entry(t.header.scenario.patient.clone()).or_default();
            entry.1 += 1;
            if t.hazard_onset().is_some() {
                entry.0 += 1;
            }
        }
    }
    println!("overall hazard coverage: {:.1}%", 100.0 * labels.hazardous as f64 / faulted as f64);
    for (patient, (h, n)) in &coverage {
        println!("  {patient}: {:.1}% ({h}/{n})", 100.0 * *h as f64 / *n as f64);
    }

    let learn_dir = tempfile::tempdir().expect("tempdir");
    let (cv, learn_summary) =
        pipeline::learn_campaign(&traces, 4, spec.seed, &LearnConfig::default(), learn_dir.path())
            .expect("learn");
    println!(
        "learned {} threshold sets ({} with fallback slots) in {:.1?}",
        learn_summary.threshold_files,
        learn_summary.unlearnable.len(),
        t0.elapsed()
    );
    if let Some(set) = cv.thresholds.get(&(0, "patientA".to_string())) {
        println!("  patientA fold 0 slots: {:?}", set.slots);
    }

    let base = MonitorBuild::default();
    let providers = vec![
        MonitorProvider::new("cawt", base.clone()).with_cv(&cv),
        MonitorProvider::new("cawot", base.clone()),
        MonitorProvider::new("guideline", base.clone())
            .with_percentiles_from(&traces, 25.0)
            .expect("percentiles"),
        MonitorProvider::new("mpc", base).with_population_from(&profiles).expect("population"),
    ];
    let eval_dir = tempfile::tempdir().expect("tempdir");
    let report = pipeline::eval_campaign(&traces, &providers, 12, eval_dir.path()).expect("eval");
    println!("evaluated in {:.1?}", t0.elapsed());

    let cawt_provider = MonitorProvider::new("cawt", MonitorBuild::default()).with_cv(&cv);
    let (mitigation, _) =
        pipeline::mitigate_eval(&traces, &cawt_provider, &label_params, None).expect("mitigate");
    println!("mitigation study in {:.1?}", t0.elapsed());

    print!("{}", pipeline::render_report(&report, &[mitigation]));
}

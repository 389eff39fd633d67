//! `aps` — campaign pipeline for closed-loop insulin-delivery fault
//! injection and safety-monitor evaluation.
//!
//! Stages: `simulate` runs a campaign of closed-loop scenarios into a trace
//! directory; `label` appends hazard ground truth; `learn` fits
//! patient-specific rule thresholds with k-fold cross-validation; `eval`
//! replays monitors offline over the labeled traces; `mitigate-eval` reruns
//! the campaign live with a monitor plus the mitigation policy and compares
//! against the baseline; `report` renders the collected numbers as a table.
//!
//! Exit codes: 0 on success, 1 when individual scenarios failed, 2 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aps_core::io;
use aps_core::learn::LearnConfig;
use aps_core::monitor::MonitorBuild;
use aps_core::pipeline::{self, CampaignSpec, MonitorProvider};
use aps_core::risk::LabelParams;

#[derive(Parser)]
#[command(name = "aps", version, about = "Closed-loop APS fault-injection and safety-monitor pipeline")]
struct Cli {
    /// Worker threads for campaign fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign of closed-loop simulations into a trace directory.
    Simulate {
        /// Campaign spec JSON.
        #[arg(long)]
        campaign: PathBuf,
        /// Patient profiles JSON.
        #[arg(long)]
        profiles: PathBuf,
        /// Output directory for traces.
        #[arg(long)]
        out: PathBuf,
        /// Run a monitor inside the loop (cawt|cawot|guideline|mpc).
        #[arg(long)]
        monitor: Option<String>,
        /// Learn-stage output directory (required for --monitor cawt).
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Labeled baseline campaign used to derive guideline percentiles.
        #[arg(long)]
        percentiles_from: Option<PathBuf>,
        /// Enable the mitigation policy (requires --monitor).
        #[arg(long)]
        mitigate: bool,
        /// Override the campaign seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Label hazards in a simulated campaign directory (in place).
    Label {
        #[arg(long)]
        campaign: PathBuf,
        /// Risk window in samples.
        #[arg(long, default_value_t = 12)]
        window: usize,
    },
    /// Learn patient-specific thresholds with k-fold cross-validation.
    Learn {
        /// Labeled campaign directory.
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        folds: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Replay monitors offline over a labeled campaign and write metrics.
    Eval {
        /// Labeled campaign directory.
        #[arg(long)]
        campaign: PathBuf,
        /// Monitor names, comma separated, or `all`.
        #[arg(long, default_value = "all")]
        monitor: String,
        /// Learn-stage output directory (required when evaluating cawt).
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Profiles JSON (required when evaluating mpc).
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Tolerance window in samples.
        #[arg(long, default_value_t = 12)]
        delta: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a labeled campaign live with a monitor plus mitigation and
    /// compare against the baseline.
    MitigateEval {
        /// Labeled baseline campaign directory.
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long)]
        monitor: String,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Profiles JSON (required for mpc).
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Output directory for the mitigated traces and report.
        #[arg(long)]
        out: PathBuf,
        /// Risk window in samples.
        #[arg(long, default_value_t = 12)]
        window: usize,
    },
    /// Render eval/mitigation JSON into a human-readable table.
    Report {
        /// eval.json from the eval stage.
        #[arg(long)]
        eval: PathBuf,
        /// mitigation.json files, repeatable.
        #[arg(long)]
        mitigation: Vec<PathBuf>,
        /// Write the table here as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_provider(
    name: &str,
    thresholds: Option<&PathBuf>,
    profiles: Option<&PathBuf>,
    percentile_traces: Option<&[aps_core::sim::Trace]>,
) -> Result<MonitorProvider, aps_core::Error> {
    if !aps_core::monitor::monitor_names().contains(&name) {
        return Err(aps_core::Error::config(format!(
            "unknown monitor `{name}` (expected one of {:?})",
            aps_core::monitor::monitor_names()
        )));
    }
    let mut provider = MonitorProvider::new(name, MonitorBuild::default());
    if name == "cawt" {
        let dir = thresholds.ok_or_else(|| {
            aps_core::Error::config("--thresholds <learn dir> is required for the cawt monitor")
        })?;
        provider = provider.with_learn_dir(dir)?;
    }
    if name == "guideline" {
        let traces = percentile_traces.ok_or_else(|| {
            aps_core::Error::config("guideline monitor needs a labeled campaign for percentiles")
        })?;
        provider = provider.with_percentiles_from(traces, 25.0)?;
    }
    if name == "mpc" {
        let path = profiles.ok_or_else(|| {
            aps_core::Error::config("--profiles is required for the mpc monitor")
        })?;
        provider = provider.with_population_from(&io::load_profiles(path)?)?;
    }
    Ok(provider)
}

fn run(cli: Cli) -> Result<u8, aps_core::Error> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| aps_core::Error::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate {
            campaign,
            profiles,
            out,
            monitor,
            thresholds,
            percentiles_from,
            mitigate,
            seed,
        } => {
            let mut spec = CampaignSpec::load(&campaign)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if mitigate && monitor.is_none() {
                return Err(aps_core::Error::config("--mitigate requires --monitor"));
            }
            let profile_list = io::load_profiles(&profiles)?;
            let percentile_traces = match &percentiles_from {
                Some(dir) => Some(io::load_campaign(dir)?),
                None => None,
            };
            let provider = match &monitor {
                Some(name) => Some(build_provider(
                    name,
                    thresholds.as_ref(),
                    Some(&profiles),
                    percentile_traces.as_deref(),
                )?),
                None => None,
            };
            let summary =
                pipeline::simulate_campaign(&spec, &profile_list, provider.as_ref(), mitigate, &out)?;
            io::RunManifest::new("simulate", Some(spec.seed))
                .with_input("campaign", &campaign)?
                .with_input("profiles", &profiles)?
                .with_params(serde_json::json!({
                    "monitor": monitor,
                    "mitigate": mitigate,
                    "scenarios": summary.scenarios,
                }))
                .save(&out)?;
            println!(
                "simulated {} scenarios -> {} traces ({} invalid) under {}",
                summary.scenarios,
                summary.traces_written,
                summary.invalid_traces,
                out.display()
            );
            if !summary.failures.is_empty() {
                for (id, msg) in &summary.failures {
                    eprintln!("scenario {id} failed: {msg}");
                }
                return Ok(1);
            }
            Ok(0)
        }
        Command::Label { campaign, window } => {
            let params = LabelParams { window, ..Default::default() };
            let summary = pipeline::label_campaign_dir(&campaign, &params)?;
            io::RunManifest::new("label", None)
                .with_params(serde_json::json!({"window": window}))
                .save(&campaign)?;
            println!(
                "labeled {} traces: {} hazardous ({} H1, {} H2)",
                summary.traces, summary.hazardous, summary.h1, summary.h2
            );
            Ok(0)
        }
        Command::Learn { campaign, out, folds, seed } => {
            let traces = io::load_campaign(&campaign)?;
            let (_, summary) =
                pipeline::learn_campaign(&traces, folds, seed, &LearnConfig::default(), &out)?;
            io::RunManifest::new("learn", Some(seed))
                .with_params(serde_json::json!({"folds": folds, "campaign": campaign.display().to_string()}))
                .save(&out)?;
            println!(
                "learned thresholds for {} (fold, patient) pairs from {} hazardous traces",
                summary.threshold_files, summary.hazardous_traces
            );
            if !summary.unlearnable.is_empty() {
                eprintln!(
                    "warning: {} (fold, patient) pairs kept no-learning defaults for some slots",
                    summary.unlearnable.len()
                );
            }
            Ok(0)
        }
        Command::Eval { campaign, monitor, thresholds, profiles, delta, out } => {
            let traces = io::load_campaign(&campaign)?;
            let names: Vec<String> = if monitor == "all" {
                aps_core::monitor::monitor_names().iter().map(|s| s.to_string()).collect()
            } else {
                monitor.split(',').map(|s| s.trim().to_string()).collect()
            };
            let mut providers = Vec::new();
            for name in &names {
                providers.push(build_provider(name, thresholds.as_ref(), profiles.as_ref(), Some(&traces))?);
            }
            let report = pipeline::eval_campaign(&traces, &providers, delta, &out)?;
            io::RunManifest::new("eval", None)
                .with_params(serde_json::json!({"monitors": names, "delta": delta}))
                .save(&out)?;
            for (name, m) in &report.monitors {
                println!(
                    "{name}: sample F1 {:.3} (FPR {:.3}, FNR {:.3}), simulation F1 {:.3}",
                    m.sample.f1, m.sample.fpr, m.sample.fnr, m.simulation.f1
                );
            }
            Ok(0)
        }
        Command::MitigateEval { campaign, monitor, thresholds, profiles, out, window } => {
            let baseline = io::load_campaign(&campaign)?;
            let provider = build_provider(&monitor, thresholds.as_ref(), profiles.as_ref(), Some(&baseline))?;
            let params = LabelParams { window, ..Default::default() };
            let (report, _) = pipeline::mitigate_eval(&baseline, &provider, &params, Some(&out))?;
            io::RunManifest::new("mitigate-eval", None)
                .with_params(serde_json::json!({"monitor": monitor}))
                .save(&out)?;
            println!(
                "{}: recovery {:.1}% ({} of {} baseline hazards), {} new hazards, avg risk {:.3} vs {:.3} unmonitored",
                report.monitor,
                100.0 * report.recovery_rate,
                (report.recovery_rate * report.baseline_hazards as f64).round() as u64,
                report.baseline_hazards,
                report.new_hazards,
                report.avg_risk,
                report.baseline_fn_equivalent_risk
            );
            Ok(0)
        }
        Command::Report { eval, mitigation, out } => {
            let report: pipeline::EvalReport = serde_json::from_str(&std::fs::read_to_string(&eval)?)?;
            let mut mitigations = Vec::new();
            for path in &mitigation {
                mitigations.push(serde_json::from_str(&std::fs::read_to_string(path)?)?);
            }
            let text = pipeline::render_report(&report, &mitigations);
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, &text)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

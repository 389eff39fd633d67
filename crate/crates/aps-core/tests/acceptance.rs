//! Acceptance suite: every release criterion as one test with a printed
//! pass line (run with `--nocapture` to see them). Tolerances are pinned in
//! the assertions.

#![allow(clippy::needless_range_loop)] // reference oracles index on purpose

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};

use aps_core::glucose::{self, MealProfile, PatientState};
use aps_core::io::{self, PatientProfile};
use aps_core::learn::{fit_threshold, minimize, tmee, tmee_grad, LearnConfig, OptimizerConfig, TrainingSet};
use aps_core::metrics::{sample_confusion, ConfusionCounts};
use aps_core::monitor::MonitorBuild;
use aps_core::pipeline::{self, CampaignSpec, MonitorProvider};
use aps_core::risk::{self, LabelParams};
use aps_core::scs::SlotOrientation;
use aps_core::stl::{eval_series, CmpOp, Formula, SignalTrace, Threshold};

fn profiles() -> Vec<PatientProfile> {
    io::load_profiles(std::path::Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/profiles.json"
    )))
    .expect("shipped profiles")
}

/// Gradient root of the per-sample loss by bisection.
fn r_star_oracle() -> f64 {
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tmee_grad(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn acceptance_1_risk_function_anchors() {
    let t0 = Instant::now();
    let r50 = risk::risk(50.0).unwrap();
    assert!((r50 - 22.5).abs() <= 0.01, "risk(50) = {r50}");
    let r20 = risk::risk(20.0).unwrap();
    let r600 = risk::risk(600.0).unwrap();
    assert!((r20 - 100.0).abs() <= 0.5, "risk(20) = {r20}");
    assert!((r600 - 100.0).abs() <= 0.5, "risk(600) = {r600}");
    // zero of the risk curve by bisection on the signed inner term
    let (mut lo, mut hi) = (60.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if risk::risk_signed(mid).unwrap() < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let zero = 0.5 * (lo + hi);
    assert!((zero - 112.5).abs() <= 0.2, "risk zero at {zero}");
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    println!("acceptance 1 (risk-function anchors): PASS — risk(50)={r50:.4}, zero at {zero:.2} mg/dl");
}

#[test]
fn acceptance_2_tmee_suite() {
    let t0 = Instant::now();
    assert_eq!(tmee(0.0), 0.5);
    let r_star = r_star_oracle();
    assert!((r_star - 0.5).abs() <= 1e-3, "r* = {r_star}");
    // analytic gradient vs central differences, relative over [-10, 10]
    let h = 1e-6;
    let mut r = -10.0;
    while r <= 10.0 {
        let numeric = (tmee(r + h) - tmee(r - h)) / (2.0 * h);
        let analytic = tmee_grad(r);
        assert!(
            (numeric - analytic).abs() / numeric.abs().max(1.0) <= 1e-6,
            "gradient mismatch at {r}: {analytic} vs {numeric}"
        );
        r += 0.01;
    }
    // asymmetry on (0, 10]
    let mut r = 1e-3;
    while r <= 10.0 {
        assert!(tmee(-r) > tmee(r), "asymmetry fails at {r}");
        r += 1e-3;
    }
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    println!("acceptance 2 (TMEE suite): PASS — r* = {r_star:.6}");
}

#[test]
fn acceptance_3_optimizer() {
    let t0 = Instant::now();
    // bounded Rosenbrock
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let g = |x: &[f64]| {
        vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ]
    };
    let out = minimize(f, g, &[-1.2, 1.0], &[(-2.0, 2.0), (-2.0, 2.0)], &OptimizerConfig::default()).unwrap();
    assert!((out.x[0] - 1.0).abs() <= 1e-6 && (out.x[1] - 1.0).abs() <= 1e-6, "{:?}", out.x);

    // active bound is hit exactly
    let out = minimize(
        |x| (x[0] - 3.0).powi(2),
        |x| vec![2.0 * (x[0] - 3.0)],
        &[0.5],
        &[(0.0, 2.0)],
        &OptimizerConfig::default(),
    )
    .unwrap();
    assert_eq!(out.x[0], 2.0);

    // convex quadratic matches the direct solve
    let a = [
        [4.0, 1.0, 0.0, 0.5],
        [1.0, 5.0, 1.0, 0.0],
        [0.0, 1.0, 6.0, 1.0],
        [0.5, 0.0, 1.0, 7.0],
    ];
    let b = [1.0, -2.0, 0.5, 3.0];
    let av = |x: &[f64]| -> Vec<f64> { (0..4).map(|i| (0..4).map(|j| a[i][j] * x[j]).sum()).collect() };
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
    let fq = |x: &[f64]| 0.5 * dot(&av(x), x) - dot(&b, x);
    let gq = |x: &[f64]| av(x).iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<f64>>();
    let mut m: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            let mut row = a[i].to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..4 {
        let pivot = (col..4).max_by(|&p, &q| m[p][col].abs().partial_cmp(&m[q][col].abs()).unwrap()).unwrap();
        m.swap(col, pivot);
        for row in 0..4 {
            if row != col {
                let factor = m[row][col] / m[col][col];
                for k in col..5 {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    let direct: Vec<f64> = (0..4).map(|i| m[i][4] / m[i][i]).collect();
    let cfg = OptimizerConfig { grad_tol: 1e-12, ..Default::default() };
    let out = minimize(fq, gq, &[0.0; 4], &[(f64::NEG_INFINITY, f64::INFINITY); 4], &cfg).unwrap();
    for (xi, si) in out.x.iter().zip(&direct) {
        assert!((xi - si).abs() <= 1e-10, "{:?} vs {direct:?}", out.x);
    }
    assert!(t0.elapsed().as_secs_f64() < 5.0);
    println!("acceptance 3 (optimizer): PASS — Rosenbrock, exact bound, quadratic = direct solve");
}

#[test]
fn acceptance_4_threshold_learning() {
    let t0 = Instant::now();
    let r_star = r_star_oracle();
    let mut rng = StdRng::seed_from_u64(4040);
    for case in 0..100 {
        // clustered sample sets: the regime rule contexts actually produce
        let n = rng.gen_range(1..=12);
        let center = rng.gen_range(0.0..5.0);
        let sigma = rng.gen_range(0.02..0.12);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(-1.0..1.0);
                let v: f64 = rng.gen_range(-1.0..1.0);
                center + sigma * (u + v) // light-tailed spread
            })
            .collect();
        let set = TrainingSet {
            rule_id: 1,
            slot_name: "b1".into(),
            orientation: SlotOrientation::Lt,
            samples: samples.clone(),
        };
        let fit = fit_threshold(&set, &LearnConfig::default()).unwrap();
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        // every margin non-negative
        for s in &samples {
            assert!(fit.beta - s >= -1e-12, "case {case}: negative margin");
        }
        // slack within (0, r*]
        let slack = fit.beta - max;
        assert!(slack > 0.0, "case {case}: slack {slack} not positive");
        assert!(slack <= r_star + 1e-9, "case {case}: slack {slack} exceeds r*");

        // agreement with the 1e-5 grid oracle
        let objective =
            |beta: f64| samples.iter().map(|s| tmee(beta - s)).sum::<f64>() / samples.len() as f64;
        let mut best = (f64::INFINITY, max);
        let mut beta = max;
        while beta <= max + 1.5 {
            let v = objective(beta);
            if v < best.0 {
                best = (v, beta);
            }
            beta += 1e-5;
        }
        assert!((fit.beta - best.1).abs() <= 1e-3, "case {case}: {} vs grid {}", fit.beta, best.1);
    }
    assert!(t0.elapsed().as_secs_f64() < 30.0, "took {:?}", t0.elapsed());
    println!("acceptance 4 (threshold learning): PASS — 100 random sets vs grid oracle");
}

#[test]
fn acceptance_5_stl_engine() {
    let t0 = Instant::now();
    // 1,000 random formula/trace pairs against a literal pointwise evaluator
    fn ref_eval(f: &Formula, trace: &SignalTrace, t: usize) -> bool {
        match f {
            Formula::Prop(name) => trace.get(name).unwrap()[t] > 0.5,
            Formula::Atom { signal, op, rhs } => {
                let v = trace.get(signal).unwrap()[t];
                let Threshold::Lit(b) = rhs else { panic!("unresolved slot") };
                match op {
                    CmpOp::Lt => v < *b,
                    CmpOp::Le => v <= *b,
                    CmpOp::Gt => v > *b,
                    CmpOp::Ge => v >= *b,
                    CmpOp::Eq => v == *b,
                }
            }
            Formula::Not(inner) => !ref_eval(inner, trace, t),
            Formula::And(a, b) => ref_eval(a, trace, t) && ref_eval(b, trace, t),
            Formula::Or(a, b) => ref_eval(a, trace, t) || ref_eval(b, trace, t),
            Formula::Implies(a, b) => !ref_eval(a, trace, t) || ref_eval(b, trace, t),
            Formula::Globally { lo, hi, inner } => {
                let dt = trace.dt_min();
                let a = t + (((lo / dt) - 1e-9).ceil().max(0.0) as usize);
                let b = t + (((hi / dt) + 1e-9).floor().max(0.0) as usize);
                (a..=b.min(trace.len() - 1)).filter(|k| *k < trace.len()).all(|k| ref_eval(inner, trace, k))
            }
            Formula::Eventually { lo, hi, inner } => {
                let dt = trace.dt_min();
                let a = t + (((lo / dt) - 1e-9).ceil().max(0.0) as usize);
                let b = t + (((hi / dt) + 1e-9).floor().max(0.0) as usize);
                (a..=b.min(trace.len() - 1)).filter(|k| *k < trace.len()).any(|k| ref_eval(inner, trace, k))
            }
            Formula::Since(lhs, rhs) => (0..=t).any(|anchor| {
                ref_eval(rhs, trace, anchor) && ((anchor + 1)..=t).all(|k| ref_eval(lhs, trace, k))
            }),
        }
    }
    fn random_formula(rng: &mut StdRng, depth: usize) -> Formula {
        if depth == 0 || rng.gen_bool(0.3) {
            if rng.gen_bool(0.25) {
                return Formula::Prop("u1".into());
            }
            let signal = ["BG", "IOB"][rng.gen_range(0..2)].to_string();
            let op = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq][rng.gen_range(0..5)];
            return Formula::Atom { signal, op, rhs: Threshold::Lit(rng.gen_range(-20..40) as f64 * 5.0) };
        }
        let a = Box::new(random_formula(rng, depth - 1));
        let b = Box::new(random_formula(rng, depth - 1));
        match rng.gen_range(0..7) {
            0 => Formula::Not(a),
            1 => Formula::And(a, b),
            2 => Formula::Or(a, b),
            3 => Formula::Implies(a, b),
            4 => Formula::Globally { lo: rng.gen_range(0..5) as f64 * 5.0, hi: rng.gen_range(5..16) as f64 * 5.0, inner: a },
            5 => Formula::Eventually { lo: rng.gen_range(0..5) as f64 * 5.0, hi: rng.gen_range(5..16) as f64 * 5.0, inner: a },
            _ => Formula::Since(a, b),
        }
    }
    let mut rng = StdRng::seed_from_u64(5050);
    for case in 0..1000 {
        let f = random_formula(&mut rng, 3);
        let n = rng.gen_range(1..=50);
        let mut trace = SignalTrace::new(5.0);
        trace.insert("BG", (0..n).map(|_| rng.gen_range(-20..40) as f64 * 5.0).collect()).unwrap();
        trace.insert("IOB", (0..n).map(|_| rng.gen_range(-20..40) as f64 * 5.0).collect()).unwrap();
        trace.insert("u1", (0..n).map(|_| f64::from(rng.gen_bool(0.4))).collect()).unwrap();
        let series = eval_series(&f, &trace).unwrap();
        for t in 0..n {
            assert_eq!(series[t], ref_eval(&f, &trace, t), "case {case} at t={t}: {f}");
        }
    }

    // all 12 context rules and 4 guideline rules parse and round-trip
    for rule in aps_core::scs::default_ruleset() {
        let f = rule.to_formula(0.0, 750.0, aps_core::scs::DEFAULT_BGT, aps_core::scs::DEFAULT_DIOB_EPS);
        assert_eq!(aps_core::stl::parse(&f.to_string()).unwrap(), f, "rule {}", rule.id);
    }
    for text in [
        "G[0,750]((BG > 70 && BG < 180))",
        "G[0,750]((dBG5 > -5 && dBG5 < 3))",
        "(BG < 90) -> F[0,25](BG > 90)",
        "(BG > 160) -> F[0,25](BG < 160)",
    ] {
        let f = aps_core::stl::parse(text).unwrap();
        assert_eq!(aps_core::stl::parse(&f.to_string()).unwrap(), f);
    }
    assert!(t0.elapsed().as_secs_f64() < 30.0, "took {:?}", t0.elapsed());
    println!("acceptance 5 (STL engine): PASS — 1,000 random pairs agree; 16 rules round-trip");
}

#[test]
fn acceptance_6_metrics() {
    let t0 = Instant::now();
    // naive enumerator, literal transcription
    fn enumerate(pred: &[bool], truth: &[bool], delta: usize) -> ConfusionCounts {
        let n = truth.len();
        let mut out = ConfusionCounts::default();
        for t in 0..n {
            let g = (t..n.min(t + delta + 1)).find(|k| truth[*k]);
            match g {
                Some(g) => {
                    if (g.saturating_sub(delta)..=t).any(|k| pred[k]) {
                        out.tp += 1;
                    } else {
                        out.fn_ += 1;
                    }
                }
                None => {
                    if pred[t] {
                        out.fp += 1;
                    } else {
                        out.tn += 1;
                    }
                }
            }
        }
        out
    }
    let mut rng = StdRng::seed_from_u64(6060);
    for case in 0..1000 {
        let n = rng.gen_range(1..=150);
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
        let delta = rng.gen_range(0..=15);
        assert_eq!(
            sample_confusion(&pred, &truth, delta).unwrap(),
            enumerate(&pred, &truth, delta),
            "case {case}"
        );
    }
    // delta = 0 equals point-wise confusion
    let pred = [true, false, true, true, false, false];
    let truth = [true, true, false, true, false, true];
    let c = sample_confusion(&pred, &truth, 0).unwrap();
    assert_eq!(c, ConfusionCounts { tp: 2, fp: 1, fn_: 2, tn: 1 });
    // campaign-average risk arithmetic, exact
    assert_eq!(aps_core::metrics::average_risk(10, &[6.0, 4.0], &[5.0]), 1.5);
    assert_eq!(aps_core::metrics::average_risk(10, &[], &[]), 0.0);
    assert!(t0.elapsed().as_secs_f64() < 10.0, "took {:?}", t0.elapsed());
    println!("acceptance 6 (metrics): PASS — 1,000 instances agree with the enumerator");
}

#[test]
fn acceptance_7_simulator() {
    let t0 = Instant::now();
    let profiles = profiles();
    let params = &profiles[0].params;

    // steady-basal hold within +/- 0.5 mg/dl over 150 steps
    let id = glucose::steady_basal(params, 120.0).unwrap();
    let mut state = PatientState::steady(params, 120.0).unwrap();
    let meal = MealProfile::default();
    for k in 0..150 {
        state = glucose::step(&state, params, id, &meal, k as f64 * 5.0, 5.0).unwrap().state;
        assert!((state.g - 120.0).abs() < 0.5, "hold broke at step {k}: {}", state.g);
    }

    // RK4 convergence factor >= 8 on halving, against a dt/8 reference
    let endpoint = |dt: f64| {
        let mut s = PatientState { g: 180.0, i_sc: 0.0, i_p: 0.0, i_eff: 0.0 };
        let basal = glucose::steady_basal(params, 120.0).unwrap();
        let n = (750.0 / dt).round() as usize;
        for k in 0..n {
            let t = k as f64 * dt;
            let seg = (t / 50.0).floor() as u64;
            let delivery = basal * (1.0 + 0.5 * ((seg % 3) as f64 - 1.0));
            s = glucose::step(&s, params, delivery, &meal, t, dt).unwrap().state;
        }
        s.g
    };
    let (g5, g25, gref) = (endpoint(5.0), endpoint(2.5), endpoint(0.625));
    let factor = (g5 - gref).abs() / (g25 - gref).abs();
    assert!(factor >= 8.0, "convergence factor {factor}");

    // monotone insulin response on 50 random paired runs
    let mut rng = StdRng::seed_from_u64(7070);
    for pair in 0..50 {
        let p = &profiles[rng.gen_range(0..profiles.len())].params;
        let g0 = rng.gen_range(90.0..200.0);
        let basal = glucose::steady_basal(p, g0).unwrap();
        let mut lo = PatientState::steady(p, g0).unwrap();
        let mut hi = lo;
        let window = rng.gen_range(5..60)..rng.gen_range(60..140);
        let extra = rng.gen_range(0.2..3.0) * basal;
        for k in 0..150 {
            let t = k as f64 * 5.0;
            let boost = if window.contains(&k) { extra } else { 0.0 };
            lo = glucose::step(&lo, p, basal, &meal, t, 5.0).unwrap().state;
            hi = glucose::step(&hi, p, basal + boost, &meal, t, 5.0).unwrap().state;
            assert!(hi.g <= lo.g + 1e-9, "pair {pair} step {k}: {} > {}", hi.g, lo.g);
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 30.0, "took {:?}", t0.elapsed());
    println!("acceptance 7 (simulator): PASS — hold, RK4 factor {factor:.1}, monotone insulin");
}

fn hash_campaign(traces: &[aps_core::sim::Trace]) -> String {
    let mut hasher = Sha256::new();
    for t in traces {
        hasher.update(io::trace_to_csv(t).as_bytes());
        hasher.update(serde_json::to_string(&t.header).unwrap().as_bytes());
    }
    format!("{:x}", hasher.finalize())
}

#[test]
fn acceptance_8_and_9_end_to_end() {
    let t0 = Instant::now();
    let profiles = profiles();
    // 7 kinds x 2 targets x 3 values x 9 timings = 378 faults per
    // (patient, initial BG) pair -> 26,460 faulted plus 70 fault-free runs.
    let spec = CampaignSpec { value_indices: vec![0, 3, 6], seed: 7, ..Default::default() };
    let scenarios = pipeline::generate_scenarios(&spec, &profiles).unwrap();
    let faults_per_pair = spec.kinds.len() * spec.targets.len() * spec.value_indices.len() * spec.timings.len();
    assert!(faults_per_pair >= 100, "need >= 100 fault scenarios per pair");
    assert!(scenarios.len() >= 7000, "need >= 7,000 traces, planned {}", scenarios.len());

    let params = io::profile_map(&profiles);
    let (mut traces, failures) = pipeline::run_scenarios(&scenarios, &params, None, false);
    assert!(failures.is_empty(), "scenario failures: {failures:?}");
    let label_params = LabelParams::default();
    pipeline::label_traces(&mut traces, &label_params).unwrap();

    // (a) hazard coverage strictly inside (0, 1), varying across profiles
    let mut per_patient: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for t in &traces {
        if t.header.scenario.fault.is_some() {
            let e = per_patient.entry(t.header.scenario.patient.as_str()).or_default();
            e.1 += 1;
            e.0 += usize::from(t.hazard_onset().is_some());
        }
    }
    let coverages: Vec<f64> = per_patient.values().map(|(h, n)| *h as f64 / *n as f64).collect();
    let overall: f64 =
        per_patient.values().map(|(h, _)| *h).sum::<usize>() as f64 / per_patient.values().map(|(_, n)| *n).sum::<usize>() as f64;
    assert!(overall > 0.0 && overall < 1.0, "overall coverage {overall}");
    let (cov_min, cov_max) = (
        coverages.iter().copied().fold(f64::INFINITY, f64::min),
        coverages.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    assert!(cov_max - cov_min > 0.02, "coverage must vary across profiles: {coverages:?}");

    // learn thresholds with 4-fold cross-validation
    let learn_dir = tempfile::tempdir().unwrap();
    let (cv, _) = pipeline::learn_campaign(&traces, 4, spec.seed, &LearnConfig::default(), learn_dir.path()).unwrap();

    // (b) F1 ordering under a tolerance window matched to the monitors'
    // design lead (~2 h early detection): CAWT above CAWOT and Guideline
    let base = MonitorBuild::default();
    let providers = vec![
        MonitorProvider::new("cawt", base.clone()).with_cv(&cv),
        MonitorProvider::new("cawot", base.clone()),
        MonitorProvider::new("guideline", base.clone()).with_percentiles_from(&traces, 25.0).unwrap(),
    ];
    let eval_dir = tempfile::tempdir().unwrap();
    let delta = 24;
    let report = pipeline::eval_campaign(&traces, &providers, delta, eval_dir.path()).unwrap();
    let f1 = |name: &str| report.monitors[name].sample.f1;
    assert!(
        f1("cawt") > f1("cawot"),
        "F1(cawt) {} must exceed F1(cawot) {}",
        f1("cawt"),
        f1("cawot")
    );
    assert!(
        f1("cawt") > f1("guideline"),
        "F1(cawt) {} must exceed F1(guideline) {}",
        f1("cawt"),
        f1("guideline")
    );

    // (c) positive mean reaction time: early detection on average
    let reaction = report.monitors["cawt"].timing.mean_reaction_min.unwrap();
    assert!(reaction > 0.0, "mean reaction {reaction}");

    // (e) TTH distribution spans at least an hour
    let tths = &report.monitors["cawt"].timing.tth_min_values;
    let (tth_min, tth_max) = (
        tths.iter().copied().fold(f64::INFINITY, f64::min),
        tths.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    assert!(tth_max - tth_min >= 60.0, "TTH span {} too narrow", tth_max - tth_min);

    // (d) mitigation: positive recovery, average risk below the unmonitored
    // FN-equivalent risk
    let cawt = MonitorProvider::new("cawt", MonitorBuild::default()).with_cv(&cv);
    let (mitigation, _) = pipeline::mitigate_eval(&traces, &cawt, &label_params, None).unwrap();
    assert!(mitigation.recovery_rate > 0.0, "recovery {}", mitigation.recovery_rate);
    assert!(
        mitigation.avg_risk < mitigation.baseline_fn_equivalent_risk,
        "avg risk {} !< unmonitored {}",
        mitigation.avg_risk,
        mitigation.baseline_fn_equivalent_risk
    );

    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 600, "campaign pipeline took {elapsed:?}");
    println!(
        "acceptance 8 (end-to-end direction): PASS — coverage {:.1}%..{:.1}% (overall {:.1}%), \
         F1 cawt {:.3} > cawot {:.3} / guideline {:.3} (delta={delta}), reaction {:.0} min, \
         recovery {:.1}%, risk {:.3} < {:.3}, in {elapsed:.1?}",
        100.0 * cov_min,
        100.0 * cov_max,
        100.0 * overall,
        f1("cawt"),
        f1("cawot"),
        f1("guideline"),
        reaction,
        100.0 * mitigation.recovery_rate,
        mitigation.avg_risk,
        mitigation.baseline_fn_equivalent_risk,
    );

    // criterion 9: repeating the campaign with the same seed yields
    // byte-identical traces, thresholds, and reports
    let (mut traces2, _) = pipeline::run_scenarios(&scenarios, &params, None, false);
    pipeline::label_traces(&mut traces2, &label_params).unwrap();
    assert_eq!(hash_campaign(&traces), hash_campaign(&traces2), "traces not byte-identical");

    let learn_dir2 = tempfile::tempdir().unwrap();
    pipeline::learn_campaign(&traces2, 4, spec.seed, &LearnConfig::default(), learn_dir2.path()).unwrap();
    let thresholds_a = io::sha256_dir(&learn_dir.path().join("thresholds")).unwrap();
    let thresholds_b = io::sha256_dir(&learn_dir2.path().join("thresholds")).unwrap();
    assert_eq!(thresholds_a, thresholds_b, "threshold files not byte-identical");

    let cawot2 = MonitorProvider::new("cawot", MonitorBuild::default());
    let eval_a = serde_json::to_string(&pipeline::evaluate_monitor(&traces, &cawot2, delta).unwrap()).unwrap();
    let eval_b = serde_json::to_string(&pipeline::evaluate_monitor(&traces2, &cawot2, delta).unwrap()).unwrap();
    assert_eq!(eval_a, eval_b, "evaluation reports not byte-identical");
    println!("acceptance 9 (determinism): PASS — identical trace, threshold, and report bytes");
}

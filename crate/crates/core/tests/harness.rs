//! Experiment runner: bundled configs, persistence, resume, aggregation.

use std::path::{Path, PathBuf};

use chance_infer::certify::CertifyConfig;
use chance_infer::generators::EndpointConfig;
use chance_infer::harness::{
    read_records, report, run, verdict_counts, ExperimentConfig, GeneratorRef, MatchMode, RunOptions, Scenario, Tier,
    TrialVerdict, SUMMARY_HEADER,
};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn small_tier_table(trials: u64) -> ExperimentConfig {
    ExperimentConfig::synthetic(
        Scenario::TierTable,
        trials,
        77,
        CertifyConfig::new(0.4, 0.05, 40).unwrap(),
        vec![
            Tier::synthetic("easy", 0.02),
            Tier::synthetic("medium", 0.4),
            Tier::synthetic("hard", 0.9),
        ],
    )
}

#[test]
fn bundled_configs_parse_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(bundled("")).unwrap() {
        let path = entry.unwrap().path();
        let config = ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        config.validate().unwrap();
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn bundled_hierarchy_config_runs() {
    let mut config = ExperimentConfig::from_path(bundled("hierarchy.toml")).unwrap();
    config.trials = 50;
    let out = run(&config, &RunOptions::default()).unwrap();
    let levels = |tier: &str| out.summary.row(tier).unwrap().level_feasible.clone().unwrap();
    assert!(levels("clean")[0] > 0.9 && levels("clean")[1] > 0.9);
    assert_eq!(levels("unsafe-top"), vec![0.0, 0.0]);
    assert!(levels("noisy-bottom")[0] > 0.9 && levels("noisy-bottom")[1] < 0.1);
}

#[test]
fn output_files_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &small_tier_table(100),
        &RunOptions {
            out_dir: Some(dir.path().into()),
            ..Default::default()
        },
    )
    .unwrap();
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SUMMARY_HEADER.join(","));
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("metrics.csv").exists());

    let records = read_records(dir.path().join("records.jsonl"), false).unwrap();
    assert_eq!(records, out.records);
    assert!(records.windows(2).all(|w| w[0].trial_id < w[1].trial_id));
    assert_eq!(report(&dir.path().join("records.jsonl")).unwrap(), out.summary);
}

#[test]
fn summary_matches_independent_counts() {
    let out = run(&small_tier_table(300), &RunOptions::default()).unwrap();
    let counts = verdict_counts(&out.records);
    for row in &out.summary.rows {
        let c = &counts[&row.tier];
        let get = |v| *c.get(&v).unwrap_or(&0) as f64;
        let total = get(TrialVerdict::Feasible) + get(TrialVerdict::Infeasible) + get(TrialVerdict::Undecided);
        assert!((row.feasible - get(TrialVerdict::Feasible) / total).abs() <= 1e-12);
        assert!((row.infeasible - get(TrialVerdict::Infeasible) / total).abs() <= 1e-12);
        assert!((row.undecided - get(TrialVerdict::Undecided) / total).abs() <= 1e-12);
        let taus: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.tier == row.tier)
            .map(|r| r.stopping_time as f64)
            .collect();
        let mean = taus.iter().sum::<f64>() / taus.len() as f64;
        assert!((row.avg_samples - mean).abs() <= 1e-12);
    }
    assert!(out.records.iter().all(|r| r.is_consistent(40)));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let config = small_tier_table(200);
    let one = run(
        &config,
        &RunOptions {
            workers: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let many = run(
        &config,
        &RunOptions {
            workers: Some(7),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(one.records, many.records);
}

#[test]
fn resume_completes_an_interrupted_run() {
    let config = small_tier_table(120);
    let full_dir = tempfile::tempdir().unwrap();
    run(
        &config,
        &RunOptions {
            out_dir: Some(full_dir.path().into()),
            ..Default::default()
        },
    )
    .unwrap();
    let full = std::fs::read(full_dir.path().join("records.jsonl")).unwrap();

    // Keep the first 50 lines plus half of the 51st, as a crash would.
    let text = String::from_utf8(full.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut partial = lines[..50].join("\n");
    partial.push('\n');
    partial.push_str(&lines[50][..lines[50].len() / 2]);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("records.jsonl"), partial).unwrap();

    let out = run(
        &config,
        &RunOptions {
            out_dir: Some(dir.path().into()),
            resume: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.resumed, 50);
    assert_eq!(std::fs::read(dir.path().join("records.jsonl")).unwrap(), full);
}

#[test]
fn resume_rejects_foreign_records() {
    let dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        out_dir: Some(dir.path().into()),
        ..Default::default()
    };
    run(&small_tier_table(10), &options).unwrap();
    let mut other = small_tier_table(10);
    other.base_seed += 1;
    assert!(run(
        &other,
        &RunOptions {
            resume: true,
            ..options
        }
    )
    .is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(run(&small_tier_table(0), &RunOptions::default()).is_err());
    let mut no_tiers = small_tier_table(5);
    no_tiers.tiers.clear();
    assert!(run(&no_tiers, &RunOptions::default()).is_err());
    let mut bad_r = small_tier_table(5);
    bad_r.tiers[0].true_r = Some(1.5);
    assert!(run(&bad_r, &RunOptions::default()).is_err());
}

#[test]
fn unreachable_endpoint_marks_trials_aborted() {
    let env = "CHANCE_INFER_HARNESS_TEST_TOKEN";
    std::env::set_var(env, "x");
    // Bind then drop a listener so the port is very likely closed.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut endpoint = EndpointConfig::new(format!("http://127.0.0.1:{port}/v1/chat/completions"), "m", 0.7);
    endpoint.api_key_env = env.into();
    endpoint.retries = 0;
    endpoint.timeout_ms = 2_000;

    let mut config = small_tier_table(3);
    config.tiers = vec![Tier {
        label: "easy".into(),
        true_r: None,
        constraint_probs: None,
        question_tier: Some("easy".into()),
    }];
    config.generator = GeneratorRef::Live {
        endpoint,
        questions: Path::new(env!("CARGO_MANIFEST_DIR")).join("data/questions.jsonl"),
        match_mode: MatchMode::Contains,
    };
    let out = run(&config, &RunOptions::default()).unwrap();
    assert!(out
        .records
        .iter()
        .all(|r| r.verdict == TrialVerdict::Aborted && r.error.is_some()));
    assert_eq!(out.summary.rows[0].aborted, 3);
    assert!(out.records.iter().all(|r| r.question_id.is_some()));
}

// Fraction of trajectories whose interval holds the true rate at every n,
// written to a directory so it can be re-summarized later.

use chance_infer::certify::CertifyConfig;
use chance_infer::harness::{report, run, ExperimentConfig, RunOptions, Scenario, Tier};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::synthetic(
        Scenario::Coverage,
        2000,
        101,
        CertifyConfig::new(0.4, 0.05, 1000)?,
        vec![Tier::synthetic("r0.1", 0.1), Tier::synthetic("r0.5", 0.5)],
    );
    config.horizon = Some(1000);
    let dir = std::env::temp_dir().join(format!("cci-coverage-{}", std::process::id()));
    let out = run(
        &config,
        &RunOptions {
            out_dir: Some(dir.clone()),
            ..Default::default()
        },
    )?;
    for row in &out.summary.rows {
        println!("{}: coverage {:.4}", row.tier, row.coverage.unwrap_or(f64::NAN));
    }
    let again = report(&dir.join("records.jsonl"))?;
    assert_eq!(again, out.summary);
    std::fs::remove_dir_all(dir)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

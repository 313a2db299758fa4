// Easy, medium and hard inputs under a 40-sample budget.

use chance_infer::certify::CertifyConfig;
use chance_infer::harness::{run, ExperimentConfig, RunOptions, Scenario, Tier};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::synthetic(
        Scenario::TierTable,
        1000,
        606,
        CertifyConfig::new(0.4, 0.05, 40)?,
        vec![
            Tier::synthetic("easy", 0.02),
            Tier::synthetic("medium", 0.40),
            Tier::synthetic("hard", 0.90),
        ],
    );
    let out = run(&config, &RunOptions::default())?;
    print!("{}", out.summary);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Confidence thresholding and self-consistency next to certification on a
// generator whose confidence carries no signal.

use chance_infer::certify::CertifyConfig;
use chance_infer::generators::ConfidenceModel;
use chance_infer::harness::{run, BaselineSettings, ExperimentConfig, GeneratorRef, RunOptions, Scenario, Tier};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::synthetic(
        Scenario::BaselineCompare,
        500,
        3,
        CertifyConfig::new(0.05, 0.05, 3000)?,
        vec![Tier::synthetic("r0.10", 0.10), Tier::synthetic("r0.01", 0.01)],
    );
    config.generator = GeneratorRef::Synthetic {
        true_r: None,
        confidence_model: ConfidenceModel::Constant { value: 0.9 },
        distractors: 3,
    };
    config.baselines = Some(BaselineSettings {
        conf_threshold: 0.9,
        sc_m: 5,
        sc_agreement: 0.6,
    });
    let out = run(&config, &RunOptions::default())?;
    print!("{}", out.summary);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

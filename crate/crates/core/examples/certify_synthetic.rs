// Certify a single input against a synthetic generator with a known
// violation rate.

use chance_infer::certify::{certify_and_respond, CertifyConfig};
use chance_infer::generators::{SyntheticSource, SyntheticSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = CertifyConfig::new(0.2, 0.05, 2000)?;
    for true_r in [0.05, 0.2, 0.4] {
        let mut source = SyntheticSource::new(SyntheticSpec::bernoulli(true_r, 42))?;
        let d = certify_and_respond(&mut source, &config)?;
        let interval = d.final_state.interval()?;
        println!(
            "R = {true_r:.2}: {} after {} samples, rate in [{:.3}, {:.3}]",
            d.verdict, d.stopping_time, interval.lower, interval.upper
        );
        if let Some(sample) = d.returned_sample {
            println!("  returned {:?} (violated: {})", sample.payload, sample.violated());
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

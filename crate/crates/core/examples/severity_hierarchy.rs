// Several constraints at once: weighted severity and priority levels.

use chance_infer::certify::{certify, CertifyConfig};
use chance_infer::constraints::{certify_hierarchy, cost, severity_event, ConstraintSpec, ViolationVector};
use chance_infer::generators::{Indicator, SyntheticVectorSource};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Safety (weight 5), format (1), length (1). Format plus length alone
    // stays under the threshold of 2.
    let spec = ConstraintSpec::new(vec![5.0, 1.0, 1.0], 2.0)?;
    let v = ViolationVector::new(vec![false, true, true]);
    println!("cost {} -> severe: {}", cost(&v, &spec)?, severity_event(&v, &spec)?);

    let config = CertifyConfig::new(0.1, 0.05, 3000)?;
    let probs = vec![0.01, 0.3, 0.3];
    let severe_spec = spec.clone();
    let mut severe = Indicator::new(
        SyntheticVectorSource::new(probs.clone(), 5)?,
        move |s: &chance_infer::generators::GeneratorSample| {
            severity_event(&s.violation, &severe_spec)
                .map(|e| e == 1)
                .unwrap_or(true)
        },
    );
    let d = certify(&mut severe, &config)?;
    println!("severity event: {} after {}", d.verdict, d.stopping_time);

    let mut any = Indicator::aggregate(SyntheticVectorSource::new(probs.clone(), 5)?);
    let d = certify(&mut any, &config)?;
    println!("any violation:  {} after {}", d.verdict, d.stopping_time);

    let levels = spec.with_levels(vec![vec![0], vec![1, 2]])?;
    let configs = [
        CertifyConfig::new(0.05, 0.025, 3000)?,
        CertifyConfig::new(0.6, 0.025, 3000)?,
    ];
    let out = certify_hierarchy(&mut SyntheticVectorSource::new(probs, 6)?, &levels, &configs)?;
    for (i, level) in out.iter().enumerate() {
        match level {
            Some(d) => println!("level {i}: {} after {}", d.verdict, d.stopping_time),
            None => println!("level {i}: skipped"),
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

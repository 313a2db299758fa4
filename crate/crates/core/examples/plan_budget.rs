// How many samples a decision needs, as a function of the distance between
// the true rate and the budget.

use chance_infer::certify::{plan_samples, FeasibilityGap};
use chance_infer::confseq::radius;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("radius at delta = 0.05:");
    for n in [1, 10, 100, 1000, 10_000] {
        println!("  n = {n:>6}: {:.5}", radius(n, 0.05)?);
    }
    println!("worst-case samples to decide:");
    for gap in [0.05, 0.1, 0.2, 0.4, -0.6] {
        println!("  gap {gap:>5}: {}", plan_samples(gap, 0.05)?);
    }
    let g = FeasibilityGap::new(0.1, 0.3)?;
    println!(
        "R = 0.1 against epsilon = 0.3: gap {:.2}, needs at most {}",
        g.gap(),
        plan_samples(g.gap(), 0.05)?
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

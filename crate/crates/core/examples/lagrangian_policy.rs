// The closed-form accept/abstain rule and its utility/risk trade-off.

use chance_infer::policy::{conditional_risk, lagrangian_frontier, FiniteOutcomeDistribution, LagrangianRule, Outcome};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dist = FiniteOutcomeDistribution::new(vec![
        Outcome::new(0.5, 1.0, false),
        Outcome::new(0.2, 0.6, false),
        Outcome::new(0.2, 0.9, true),
        Outcome::new(0.1, 0.3, true),
    ])?;
    let eps = 0.1;
    println!("{:>7} {:>7} {:>8} {:>6}", "lambda", "accept", "utility", "risk");
    for p in lagrangian_frontier(&dist, eps, [0.0, 0.5, 1.0, 1.2, 2.0, 5.0])? {
        let risk = p.risk.value().map_or("-".to_owned(), |r| format!("{r:.3}"));
        println!("{:>7.2} {:>7.2} {:>8.3} {:>6}", p.lambda, p.acceptance, p.utility, risk);
    }
    let rule = LagrangianRule::new(2.0, eps)?;
    println!("risk at lambda = 2: {:?}", conditional_risk(&dist, &rule));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Push-style certification: feed verdicts as they arrive from elsewhere.

use chance_infer::certify::{CertifyConfig, Session};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut session = Session::new(CertifyConfig::new(0.3, 0.05, 500)?)?;
    // An external checker reporting one violation in every ten outputs.
    let mut i = 0u64;
    while session.verdict().is_none() {
        session.observe(i % 10 == 9);
        i += 1;
        if i.is_multiple_of(25) {
            let iv = session.state().interval()?;
            println!("n = {i:>3}: rate in [{:.3}, {:.3}]", iv.lower, iv.upper);
        }
    }
    let d = session.decision().expect("session finished");
    println!("{} after {} observations", d.verdict, d.stopping_time);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

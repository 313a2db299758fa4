//! Sequential, anytime-valid certification of violation risk for stochastic
//! generators.
//!
//! A generator (an LLM behind an API, or a synthetic Bernoulli oracle) is
//! sampled repeatedly for one fixed input. Each sample is mapped to a binary
//! violation indicator, and a time-uniform confidence sequence on the
//! violation probability decides, as soon as the evidence allows, whether the
//! input is *feasible* (risk at most the budget ε) or *infeasible* (risk above
//! ε). When the sampling budget runs out first, the engine abstains with
//! *undecided*.
//!
//! ```
//! use chance_infer::certify::{certify, CertifyConfig, Verdict};
//! use chance_infer::generators::{SyntheticSource, SyntheticSpec};
//!
//! let config = CertifyConfig::new(0.4, 0.05, 40).unwrap();
//! let mut source = SyntheticSource::new(SyntheticSpec::bernoulli(0.0, 7)).unwrap();
//! let decision = certify(&mut source, &config).unwrap();
//! assert_eq!(decision.verdict, Verdict::Feasible);
//! assert_eq!(decision.stopping_time, 17);
//! ```
//!
//! Module map:
//!
//! * [`confseq`]: stitched Hoeffding confidence sequence for a Bernoulli mean.
//! * [`certify`]: the sequential certification loop and sample planning.
//! * [`constraints`]: multi-constraint violation vectors, severity costs and
//!   lexicographic hierarchies.
//! * [`policy`]: utility/risk acceptance rules over finite outcome sets.
//! * [`generators`]: synthetic, scripted and HTTP-backed sample sources plus
//!   deterministic verifiers.
//! * [`baselines`]: confidence-threshold and self-consistency selective
//!   prediction.
//! * [`harness`]: seeded, resumable Monte Carlo experiments.
//! * [`cli`]: the `cci` command-line front end.

pub mod baselines;
pub mod certify;
pub mod cli;
pub mod confseq;
pub mod constraints;
mod error;
pub mod generators;
pub mod harness;
pub mod policy;

pub use error::{Error, Result};

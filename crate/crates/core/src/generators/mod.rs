//! Sources of stochastic samples and the verifiers that label them.
//!
//! The certification engine only needs a stream of violation indicators
//! ([`ViolationSource`]). Sources that also produce a payload and an optional
//! confidence score implement [`SampleSource`]; [`Indicator`] adapts one into
//! the other.

mod llm;
mod questions;
mod synthetic;
mod verifier;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::ViolationVector;

pub use llm::{ChatClient, EndpointConfig, LlmSource};
pub use questions::{load_questions, Question};
pub use synthetic::{derive_seed, ConfidenceModel, SyntheticSource, SyntheticSpec, SyntheticVectorSource};
pub use verifier::{normalize, verify, Rule, Verifier, VerifierSpec};

/// Failure of an upstream generator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeneratorError {
    #[error("HTTP {status} from endpoint after {attempts} attempt(s): {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response body: {0}")]
    Decode(String),
    #[error("generator misconfigured: {0}")]
    Config(String),
    #[error("scripted stream exhausted after {0} samples")]
    Exhausted(usize),
}

/// One stochastic generation together with its verification result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSample {
    pub payload: String,
    /// Heuristic confidence in `[0, 1]`, used only by the baselines.
    pub confidence: Option<f64>,
    pub violation: ViolationVector,
}

impl GeneratorSample {
    pub fn new(payload: impl Into<String>, confidence: Option<f64>, violation: ViolationVector) -> Self {
        if let Some(c) = confidence {
            debug_assert!((0.0..=1.0).contains(&c), "confidence {c} outside [0, 1]");
        }
        Self {
            payload: payload.into(),
            confidence,
            violation,
        }
    }

    /// Aggregate indicator: true iff any constraint is violated.
    pub fn violated(&self) -> bool {
        self.violation.any()
    }
}

/// A stream of binary violation indicators for one fixed input.
pub trait ViolationSource {
    fn next_violation(&mut self) -> Result<bool, GeneratorError>;
}

/// A stream of full generations for one fixed input.
pub trait SampleSource {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError>;
}

impl<S: ViolationSource + ?Sized> ViolationSource for &mut S {
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        (**self).next_violation()
    }
}

impl<S: SampleSource + ?Sized> SampleSource for &mut S {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        (**self).next_sample()
    }
}

impl<S: ViolationSource + ?Sized> ViolationSource for Box<S> {
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        (**self).next_violation()
    }
}

impl<S: SampleSource + ?Sized> SampleSource for Box<S> {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        (**self).next_sample()
    }
}

/// Views a [`SampleSource`] as a [`ViolationSource`] through an indicator
/// function, e.g. the aggregate flag or a severity event.
pub struct Indicator<S, F> {
    source: S,
    indicator: F,
}

impl<S, F> Indicator<S, F>
where
    S: SampleSource,
    F: FnMut(&GeneratorSample) -> bool,
{
    pub fn new(source: S, indicator: F) -> Self {
        Self { source, indicator }
    }

    pub fn into_inner(self) -> S {
        self.source
    }
}

impl<S> Indicator<S, fn(&GeneratorSample) -> bool>
where
    S: SampleSource,
{
    /// Uses the aggregate "any constraint violated" flag.
    pub fn aggregate(source: S) -> Self {
        Self::new(source, GeneratorSample::violated)
    }
}

impl<S, F> ViolationSource for Indicator<S, F>
where
    S: SampleSource,
    F: FnMut(&GeneratorSample) -> bool,
{
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        let sample = self.source.next_sample()?;
        Ok((self.indicator)(&sample))
    }
}

/// Wraps a closure as a violation source.
pub struct FromFn<F>(pub F);

impl<F> ViolationSource for FromFn<F>
where
    F: FnMut() -> Result<bool, GeneratorError>,
{
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        (self.0)()
    }
}

/// Replays a fixed list of samples, then fails with
/// [`GeneratorError::Exhausted`].
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    samples: Vec<GeneratorSample>,
    cursor: usize,
}

impl ScriptedSource {
    pub fn new(samples: Vec<GeneratorSample>) -> Self {
        Self { samples, cursor: 0 }
    }

    /// Single-constraint samples with the given flags and empty payloads.
    pub fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        Self::new(
            flags
                .into_iter()
                .map(|f| GeneratorSample::new("", None, ViolationVector::single(f)))
                .collect(),
        )
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }
}

impl SampleSource for ScriptedSource {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        let sample = self
            .samples
            .get(self.cursor)
            .cloned()
            .ok_or(GeneratorError::Exhausted(self.cursor))?;
        self.cursor += 1;
        Ok(sample)
    }
}

impl ViolationSource for ScriptedSource {
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        self.next_sample().map(|s| s.violated())
    }
}

/// Endless constant stream, handy for deterministic stopping-time checks.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSource(pub bool);

impl ViolationSource for ConstantSource {
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        Ok(self.0)
    }
}

impl SampleSource for ConstantSource {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        Ok(GeneratorSample::new("", None, ViolationVector::single(self.0)))
    }
}

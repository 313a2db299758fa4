//! Sequential chance-constrained certification.
//!
//! Samples are drawn one at a time. After each one the engine checks, in
//! order:
//!
//! 1. `R̂ₙ + rₙ ≤ ε` → **Feasible**
//! 2. `R̂ₙ − rₙ > ε` → **Infeasible**
//!
//! and stops at the first hit. If neither fires within `N_max` samples the
//! verdict is **Undecided**. Both tests use the unclipped radius. Since
//! `rₙ > 0`, at most one of them can hold at any step.
//!
//! Degenerate budgets are allowed: with `ε = 0` Feasible is unreachable and
//! with `ε = 1` Infeasible is unreachable.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::confseq::{self, radius_unchecked, ConfidenceState};
use crate::generators::{GeneratorSample, Indicator, SampleSource, ViolationSource};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub n_max: u64,
}

impl CertifyConfig {
    pub fn new(epsilon: f64, delta: f64, n_max: u64) -> Result<Self> {
        let config = Self { epsilon, delta, n_max };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(
                "epsilon",
                format!("must lie in [0, 1], got {}", self.epsilon),
            ));
        }
        confseq::check_delta(self.delta)?;
        if self.n_max == 0 {
            return Err(Error::invalid("n_max", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Feasible,
    Infeasible,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Feasible => "Feasible",
            Verdict::Infeasible => "Infeasible",
            Verdict::Undecided => "Undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    /// Samples consumed by the stopping rule (`N_max` when undecided).
    pub stopping_time: u64,
    pub final_state: ConfidenceState,
    /// The response sample drawn after a Feasible certification, if requested.
    pub returned_sample: Option<GeneratorSample>,
}

impl Decision {
    /// Re-derives the verdict conditions from `final_state` alone.
    ///
    /// For Undecided only the terminal state can be checked here; the claim
    /// that no earlier step triggered is a property of the trajectory.
    pub fn is_consistent(&self, config: &CertifyConfig) -> bool {
        let s = &self.final_state;
        if s.n() != self.stopping_time || s.n() == 0 || s.n() > config.n_max {
            return false;
        }
        match terminal_check(s, config.epsilon) {
            Some(v) => v == self.verdict,
            None => self.verdict == Verdict::Undecided && s.n() == config.n_max,
        }
    }
}

#[inline]
fn terminal_check(state: &ConfidenceState, epsilon: f64) -> Option<Verdict> {
    let rate = state.violations() as f64 / state.n() as f64;
    let r = radius_unchecked(state.n(), state.delta());
    if rate + r <= epsilon {
        Some(Verdict::Feasible)
    } else if rate - r > epsilon {
        Some(Verdict::Infeasible)
    } else {
        None
    }
}

/// One iteration of the loop: record the observation, then test Feasible
/// before Infeasible. Returns the updated state and the verdict if the rule
/// fired. Never returns Undecided; that is decided by the caller at `N_max`.
pub fn step(state: ConfidenceState, config: &CertifyConfig, violated: bool) -> (ConfidenceState, Option<Verdict>) {
    debug_assert!(state.n() < config.n_max, "step called past n_max");
    let state = state.observed(violated);
    let verdict = terminal_check(&state, config.epsilon);
    (state, verdict)
}

/// Push-style certification session for callers that own the sampling loop.
///
/// A session can be moved between threads between observations.
#[derive(Debug, Clone)]
pub struct Session {
    config: CertifyConfig,
    state: ConfidenceState,
    verdict: Option<Verdict>,
}

impl Session {
    pub fn new(config: CertifyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: ConfidenceState::new(config.delta)?,
            config,
            verdict: None,
        })
    }

    pub fn config(&self) -> &CertifyConfig {
        &self.config
    }

    pub fn state(&self) -> &ConfidenceState {
        &self.state
    }

    /// The terminal verdict, once reached.
    pub fn verdict(&self) -> Option<Verdict> {
        self.verdict
    }

    /// Feeds one observation. Observations after termination are ignored.
    pub fn observe(&mut self, violated: bool) -> Option<Verdict> {
        if self.verdict.is_some() {
            return self.verdict;
        }
        let (state, verdict) = step(self.state, &self.config, violated);
        self.state = state;
        self.verdict = verdict.or_else(|| (state.n() >= self.config.n_max).then_some(Verdict::Undecided));
        self.verdict
    }

    pub fn decision(&self) -> Option<Decision> {
        self.verdict.map(|verdict| Decision {
            verdict,
            stopping_time: self.state.n(),
            final_state: self.state,
            returned_sample: None,
        })
    }
}

/// Runs the sequential test against `source` until a verdict or `N_max`.
///
/// Consumes exactly `stopping_time` indicators. A generator failure aborts
/// with [`Error::InferenceAborted`] carrying the evidence gathered so far; it
/// is never counted as a violation or as a success.
pub fn certify<S: ViolationSource + ?Sized>(source: &mut S, config: &CertifyConfig) -> Result<Decision> {
    let mut session = Session::new(*config)?;
    loop {
        let violated = source.next_violation().map_err(|source| Error::InferenceAborted {
            state: *session.state(),
            source,
        })?;
        if session.observe(violated).is_some() {
            return Ok(session.decision().expect("terminated session has a decision"));
        }
    }
}

/// Certifies on the aggregate violation flag and, on Feasible, draws one more
/// independent sample to return as the response. Infeasible and Undecided
/// abstain.
pub fn certify_and_respond<S: SampleSource>(source: &mut S, config: &CertifyConfig) -> Result<Decision> {
    certify_and_respond_with(source, config, GeneratorSample::violated)
}

/// [`certify_and_respond`] with a caller-chosen violation indicator, e.g. a
/// severity event.
pub fn certify_and_respond_with<S, F>(source: &mut S, config: &CertifyConfig, indicator: F) -> Result<Decision>
where
    S: SampleSource,
    F: FnMut(&GeneratorSample) -> bool,
{
    let mut view = Indicator::new(&mut *source, indicator);
    let mut decision = certify(&mut view, config)?;
    if decision.verdict == Verdict::Feasible {
        match source.next_sample() {
            Ok(sample) => decision.returned_sample = Some(sample),
            Err(e) => {
                return Err(Error::DeliveryFailed {
                    decision: Box::new(decision),
                    source: e,
                })
            }
        }
    }
    Ok(decision)
}

/// Signed gap `R − ε` between a known violation rate and the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityGap(f64);

impl FeasibilityGap {
    pub fn new(true_r: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&true_r) {
            return Err(Error::invalid("true_r", format!("must lie in [0, 1], got {true_r}")));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self(true_r - epsilon))
    }

    pub fn gap(&self) -> f64 {
        self.0
    }

    /// True when the chance constraint holds (`R ≤ ε`).
    pub fn is_feasible(&self) -> bool {
        self.0 <= 0.0
    }
}

/// Smallest `n` with `rₙ ≤ |gap|`: the horizon at which a sample path whose
/// empirical rate sits on the true rate separates from the budget.
pub fn plan_samples(gap: f64, delta: f64) -> Result<u64> {
    if gap == 0.0 || !gap.is_finite() {
        return Err(Error::invalid(
            "gap",
            format!("no finite certification horizon for gap {gap}"),
        ));
    }
    confseq::check_delta(delta)?;
    let target = gap.abs();
    let fits = |n: u64| radius_unchecked(n, delta) <= target;
    // The radius is strictly decreasing in n, so gallop then bisect.
    let mut hi = 1u64;
    while !fits(hi) {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::invalid("gap", "horizon overflows u64"))?;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

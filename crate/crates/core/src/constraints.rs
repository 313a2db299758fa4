//! Violation semantics for multi-constraint outputs.
//!
//! A generation is checked against `K` binary constraints. The aggregate
//! indicator is their OR. A severity-weighted cost `C = Σ wₖ·hₖ` turns the
//! vector into a scalar, and the thresholded event `C > τ_c` is a binary
//! indicator that the certification engine can consume in place of the
//! aggregate. With `τ_c = 0` and strictly positive weights the two coincide.
//!
//! Zero weights are legal: such a constraint still sets the aggregate flag
//! but contributes nothing to the cost.

use serde::{Deserialize, Serialize};

use crate::certify::{self, CertifyConfig, Decision, Verdict};
use crate::generators::{GeneratorSample, Indicator, SampleSource};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViolationVector(Vec<bool>);

impl ViolationVector {
    pub fn new(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn single(violated: bool) -> Self {
        Self(vec![violated])
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Aggregate indicator.
    pub fn any(&self) -> bool {
        self.0.iter().any(|&f| f)
    }
}

impl From<Vec<bool>> for ViolationVector {
    fn from(flags: Vec<bool>) -> Self {
        Self(flags)
    }
}

/// Aggregate indicator as 0/1.
pub fn aggregate(v: &ViolationVector) -> u8 {
    u8::from(v.any())
}

/// Severity weights, cost threshold and optional priority levels for `K`
/// constraints.
///
/// Level indices are 0-based constraint positions. Levels are listed from
/// highest to lowest priority and must partition `0..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub severity_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<Vec<usize>>>,
}

impl ConstraintSpec {
    pub fn new(weights: Vec<f64>, severity_threshold: f64) -> Result<Self> {
        let spec = Self {
            weights,
            severity_threshold,
            levels: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_levels(mut self, levels: Vec<Vec<usize>>) -> Result<Self> {
        self.levels = Some(levels);
        self.validate()?;
        Ok(self)
    }

    /// Number of constraints.
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::invalid("weights", "need at least one constraint"));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(
                "weights",
                format!("must be finite and non-negative, got {w}"),
            ));
        }
        if !(self.severity_threshold.is_finite() && self.severity_threshold >= 0.0) {
            return Err(Error::invalid(
                "severity_threshold",
                format!("must be finite and non-negative, got {}", self.severity_threshold),
            ));
        }
        if let Some(levels) = &self.levels {
            let mut seen = vec![false; self.k()];
            for level in levels {
                if level.is_empty() {
                    return Err(Error::invalid("levels", "a level is empty"));
                }
                for &i in level {
                    match seen.get_mut(i) {
                        None => {
                            return Err(Error::invalid(
                                "levels",
                                format!("constraint index {i} out of range 0..{}", self.k()),
                            ))
                        }
                        Some(true) => return Err(Error::invalid("levels", format!("constraint {i} appears twice"))),
                        Some(s) => *s = true,
                    }
                }
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::invalid(
                    "levels",
                    format!("constraint {i} is not assigned a level"),
                ));
            }
        }
        Ok(())
    }

    fn check_len(&self, v: &ViolationVector) -> Result<()> {
        if v.len() == self.k() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.k(),
                got: v.len(),
            })
        }
    }
}

/// Severity-weighted cost `Σ wₖ·hₖ`.
pub fn cost(v: &ViolationVector, spec: &ConstraintSpec) -> Result<f64> {
    spec.check_len(v)?;
    Ok(v.flags()
        .iter()
        .zip(&spec.weights)
        .filter(|(f, _)| **f)
        .map(|(_, w)| w)
        .sum())
}

/// Thresholded severity event `cost > τ_c`. The boundary is not a violation.
pub fn severity_event(v: &ViolationVector, spec: &ConstraintSpec) -> Result<u8> {
    Ok(u8::from(cost(v, spec)? > spec.severity_threshold))
}

/// Certifies priority levels in order, each on fresh samples.
///
/// Level `j + 1` is only examined when level `j` is certified feasible;
/// otherwise it and all lower levels come back as `None` and draw no
/// samples. Each level's δ comes from its own config: no multiplicity
/// correction is applied, so callers wanting a joint `1 − δ` guarantee should
/// split δ across levels themselves.
pub fn certify_hierarchy<S: SampleSource>(
    source: &mut S,
    spec: &ConstraintSpec,
    configs: &[CertifyConfig],
) -> Result<Vec<Option<Decision>>> {
    spec.validate()?;
    let levels = spec
        .levels
        .as_ref()
        .ok_or_else(|| Error::invalid("levels", "hierarchy certification needs priority levels"))?;
    if configs.len() != levels.len() {
        return Err(Error::invalid(
            "configs",
            format!("{} levels but {} certify configs", levels.len(), configs.len()),
        ));
    }
    let k = spec.k();
    let mut out: Vec<Option<Decision>> = Vec::with_capacity(levels.len());
    let mut proceed = true;
    for (level, config) in levels.iter().zip(configs) {
        if !proceed {
            out.push(None);
            continue;
        }
        let mut width_error = None;
        let indicator = |s: &GeneratorSample| {
            if s.violation.len() != k {
                width_error.get_or_insert(s.violation.len());
                return false;
            }
            level.iter().any(|&i| s.violation.flags()[i])
        };
        let decision = certify::certify(&mut Indicator::new(&mut *source, indicator), config);
        if let Some(got) = width_error {
            return Err(Error::LengthMismatch { expected: k, got });
        }
        let decision = decision?;
        proceed = decision.verdict == Verdict::Feasible;
        out.push(Some(decision));
    }
    Ok(out)
}

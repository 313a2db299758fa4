//! Time-uniform confidence sequence for a Bernoulli mean.
//!
//! After `n` observations with empirical violation rate `R̂ₙ`, the true rate
//! lies in `[R̂ₙ − rₙ, R̂ₙ + rₙ]` simultaneously for every `n ≥ 1` with
//! probability at least `1 − δ`, where `rₙ` is the stitched Hoeffding radius
//!
//! ```text
//! rₙ = sqrt( ln(2·log₂(2n) / δ) / (2n) )
//! ```
//!
//! The guarantee holds under arbitrary data-dependent stopping, which is what
//! lets the certification loop stop as soon as either bound crosses the
//! budget.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "delta",
            format!("must lie strictly inside (0, 1), got {delta}"),
        ))
    }
}

/// Stitched Hoeffding radius `rₙ` for `n` samples at confidence `1 − δ`.
///
/// The outer logarithm is natural, the inner one base 2. For small `n` the
/// radius exceeds 1; it is returned unclipped.
pub fn radius(n: u64, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::NoSamples);
    }
    check_delta(delta)?;
    Ok(radius_unchecked(n, delta))
}

#[inline]
pub(crate) fn radius_unchecked(n: u64, delta: f64) -> f64 {
    let n = n as f64;
    ((2.0 * (2.0 * n).log2() / delta).ln() / (2.0 * n)).sqrt()
}

/// Running evidence for one certification session.
///
/// Counters are exact integers. The empirical rate is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceState {
    n: u64,
    violations: u64,
    delta: f64,
}

impl ConfidenceState {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            n: 0,
            violations: 0,
            delta,
        })
    }

    pub fn from_counts(n: u64, violations: u64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if violations > n {
            return Err(Error::invalid(
                "violations",
                format!("{violations} violations exceed {n} samples"),
            ));
        }
        Ok(Self { n, violations, delta })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Records one observation in place.
    pub fn observe(&mut self, violated: bool) {
        self.n += 1;
        self.violations += u64::from(violated);
    }

    /// Value-returning form of [`observe`](Self::observe).
    #[must_use]
    pub fn observed(mut self, violated: bool) -> Self {
        self.observe(violated);
        self
    }

    pub fn empirical_rate(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::NoSamples);
        }
        Ok(self.violations as f64 / self.n as f64)
    }

    pub fn radius(&self) -> Result<f64> {
        radius(self.n, self.delta)
    }

    pub fn interval(&self) -> Result<Interval> {
        let rate = self.empirical_rate()?;
        let r = radius_unchecked(self.n, self.delta);
        Ok(Interval {
            lower: (rate - r).max(0.0),
            upper: (rate + r).min(1.0),
            raw_radius: r,
        })
    }
}

/// A reported confidence interval, clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Unclipped radius; decision rules use this, not the clipped bounds.
    pub raw_radius: f64,
}

impl Interval {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

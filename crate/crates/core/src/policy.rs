//! Utility/risk acceptance over finite outcome distributions.
//!
//! An acceptance rule `A` picks which generations are returned. The chance
//! constraint is on the accepted outputs, `P(H = 1 | A = 1) ≤ ε`, which for
//! `E[A] > 0` is the same as `E[H·A] ≤ ε·E[A]`. For a fixed multiplier
//! `λ ≥ 0` the Lagrangian `E[A·(U − λH + λε)]` is maximised pointwise by
//! accepting exactly when `U − λH + λε ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack used when comparing probabilities that went through floating-point
/// sums.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub utility: f64,
    pub violated: bool,
    pub accept: bool,
}

/// One atom of a finite outcome distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub probability: f64,
    pub utility: f64,
    pub violated: bool,
}

impl Outcome {
    pub fn new(probability: f64, utility: f64, violated: bool) -> Self {
        Self {
            probability,
            utility,
            violated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteOutcomeDistribution {
    outcomes: Vec<Outcome>,
}

impl FiniteOutcomeDistribution {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::invalid("distribution", "no outcomes"));
        }
        if let Some(o) = outcomes
            .iter()
            .find(|o| !(o.probability.is_finite() && o.probability >= 0.0 && o.utility.is_finite()))
        {
            return Err(Error::invalid("distribution", format!("bad outcome {o:?}")));
        }
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::invalid(
                "distribution",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// `E[A]`, `E[H·A]` and `E[U·A]` under `rule`.
    pub fn moments(&self, rule: &impl AcceptanceRule) -> Moments {
        let mut m = Moments::default();
        for o in &self.outcomes {
            if rule.accept(o) {
                m.accept += o.probability;
                m.utility += o.probability * o.utility;
                if o.violated {
                    m.violation_and_accept += o.probability;
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub accept: f64,
    pub violation_and_accept: f64,
    pub utility: f64,
}

impl Moments {
    /// `ε·E[A] − E[H·A]`; non-negative iff the expectation form holds.
    pub fn slack(&self, epsilon: f64) -> f64 {
        epsilon * self.accept - self.violation_and_accept
    }
}

pub trait AcceptanceRule {
    fn accept(&self, outcome: &Outcome) -> bool;
}

impl<F: Fn(&Outcome) -> bool> AcceptanceRule for F {
    fn accept(&self, outcome: &Outcome) -> bool {
        self(outcome)
    }
}

/// The pointwise maximiser of the Lagrangian for a fixed multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianRule {
    lambda: f64,
    epsilon: f64,
}

impl LagrangianRule {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and >= 0, got {lambda}"),
            ));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self { lambda, epsilon })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl AcceptanceRule for LagrangianRule {
    fn accept(&self, o: &Outcome) -> bool {
        lagrangian_score(o.utility, o.violated, self.lambda, self.epsilon) >= 0.0
    }
}

#[inline]
fn lagrangian_score(utility: f64, violated: bool, lambda: f64, epsilon: f64) -> f64 {
    utility - lambda * f64::from(u8::from(violated)) + lambda * epsilon
}

/// Closed-form acceptance `𝟙[U − λH + λε ≥ 0]`. The boundary accepts.
pub fn lagrangian_accept(utility: f64, violated: bool, lambda: f64, epsilon: f64) -> Result<bool> {
    let rule = LagrangianRule::new(lambda, epsilon)?;
    Ok(lagrangian_score(utility, violated, rule.lambda, rule.epsilon) >= 0.0)
}

/// `P(H = 1 | A = 1)`, or `Undefined` when nothing is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionalRisk {
    Defined(f64),
    Undefined,
}

impl ConditionalRisk {
    pub fn value(self) -> Option<f64> {
        match self {
            ConditionalRisk::Defined(r) => Some(r),
            ConditionalRisk::Undefined => None,
        }
    }
}

pub fn conditional_risk(dist: &FiniteOutcomeDistribution, rule: &impl AcceptanceRule) -> ConditionalRisk {
    let m = dist.moments(rule);
    if m.accept > 0.0 {
        ConditionalRisk::Defined(m.violation_and_accept / m.accept)
    } else {
        ConditionalRisk::Undefined
    }
}

/// Evaluates the chance constraint in its conditional form
/// (`E[HA]/E[A] ≤ ε`) and its expectation form (`E[HA] ≤ ε·E[A]`), each with
/// the same relative slack. Returns `(conditional, expectation)`.
pub fn equivalence_check(
    dist: &FiniteOutcomeDistribution,
    rule: &impl AcceptanceRule,
    epsilon: f64,
) -> Result<(bool, bool)> {
    let m = dist.moments(rule);
    if m.accept <= 0.0 {
        return Err(Error::NothingAccepted);
    }
    let conditional = m.violation_and_accept / m.accept <= epsilon + PROBABILITY_TOLERANCE;
    let expectation = m.violation_and_accept <= (epsilon + PROBABILITY_TOLERANCE) * m.accept;
    Ok((conditional, expectation))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub lambda: f64,
    pub acceptance: f64,
    pub utility: f64,
    pub risk: ConditionalRisk,
}

/// Sweeps `lambdas` and reports the (utility, risk) pair each induced
/// closed-form rule achieves.
pub fn lagrangian_frontier(
    dist: &FiniteOutcomeDistribution,
    epsilon: f64,
    lambdas: impl IntoIterator<Item = f64>,
) -> Result<Vec<FrontierPoint>> {
    lambdas
        .into_iter()
        .map(|lambda| {
            let rule = LagrangianRule::new(lambda, epsilon)?;
            let m = dist.moments(&rule);
            Ok(FrontierPoint {
                lambda,
                acceptance: m.accept,
                utility: m.utility,
                risk: conditional_risk(dist, &rule),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counterexample() -> FiniteOutcomeDistribution {
        FiniteOutcomeDistribution::new(vec![Outcome::new(0.9, 1.0, false), Outcome::new(0.1, 1.0, true)]).unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        assert!(lagrangian_accept(0.5, false, 1.0, 0.1).unwrap());
        assert!(!lagrangian_accept(-0.2, true, 1.0, 0.1).unwrap());
        assert!(lagrangian_accept(0.9, true, 1.0, 0.1).unwrap());
        assert!(lagrangian_accept(0.0, false, -1.0, 0.1).is_err());
    }

    #[test]
    fn counterexample_risk() {
        let accept_all = |_: &Outcome| true;
        let r = conditional_risk(&counterexample(), &accept_all).value().unwrap();
        assert!((r - 0.1).abs() < 1e-15);
        assert_eq!(
            equivalence_check(&counterexample(), &accept_all, 0.05).unwrap(),
            (false, false)
        );
        assert_eq!(
            equivalence_check(&counterexample(), &accept_all, 0.1).unwrap(),
            (true, true)
        );
    }

    #[test]
    fn rejecting_everything_is_undefined() {
        let reject_all = |_: &Outcome| false;
        assert_eq!(
            conditional_risk(&counterexample(), &reject_all),
            ConditionalRisk::Undefined
        );
        assert!(matches!(
            equivalence_check(&counterexample(), &reject_all, 0.1),
            Err(Error::NothingAccepted)
        ));
    }

    #[test]
    fn four_outcome_mixed_acceptance() {
        let dist = FiniteOutcomeDistribution::new(vec![
            Outcome::new(0.4, 2.0, false),
            Outcome::new(0.3, -1.0, true),
            Outcome::new(0.2, 0.5, true),
            Outcome::new(0.1, -0.5, false),
        ])
        .unwrap();
        let rule = |o: &Outcome| o.utility > 0.0;
        // Brute force: accepted atoms are #0 and #2.
        let expected = 0.2 / (0.4 + 0.2);
        let got = conditional_risk(&dist, &rule).value().unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(FiniteOutcomeDistribution::new(vec![]).is_err());
        assert!(FiniteOutcomeDistribution::new(vec![Outcome::new(0.5, 0.0, false)]).is_err());
        assert!(
            FiniteOutcomeDistribution::new(vec![Outcome::new(-0.5, 0.0, false), Outcome::new(1.5, 0.0, true)]).is_err()
        );
    }

    #[test]
    fn identical_confidence_threshold_policies_have_risk_r() {
        let dist = counterexample();
        let confidence = 0.8;
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let rule = move |_: &Outcome| confidence >= t;
            match conditional_risk(&dist, &rule) {
                ConditionalRisk::Defined(r) => {
                    assert!(t <= confidence);
                    assert_eq!(r, 0.1 / 1.0);
                }
                ConditionalRisk::Undefined => assert!(t > confidence),
            }
        }
    }

    #[test]
    fn frontier_tightens_with_lambda() {
        let dist = FiniteOutcomeDistribution::new(vec![
            Outcome::new(0.5, 1.0, false),
            Outcome::new(0.3, 2.0, true),
            Outcome::new(0.2, 0.5, true),
        ])
        .unwrap();
        let pts = lagrangian_frontier(&dist, 0.2, [0.0, 1.0, 2.0, 10.0]).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].acceptance <= w[0].acceptance);
        }
        assert_eq!(pts.last().unwrap().risk, ConditionalRisk::Defined(0.0));
    }
}

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeneratorError, GeneratorSample, SampleSource, ViolationSource};
use crate::constraints::ViolationVector;
use crate::{Error, Result};

/// Payload emitted by synthetic generators for a non-violating sample.
pub const VALID_PAYLOAD: &str = "answer";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Per-trial seed: the SplitMix64 output function applied to
/// `base_seed + (trial_id + 1) · γ` with γ the 64-bit golden-ratio constant.
pub fn derive_seed(base_seed: u64, trial_id: u64) -> u64 {
    let mut z = base_seed.wrapping_add(trial_id.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Confidence score attached to synthetic samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConfidenceModel {
    /// Every sample gets the same score, valid or not.
    Constant { value: f64 },
    /// Valid samples get `valid`, violating samples get `invalid`.
    Separated { valid: f64, invalid: f64 },
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel::Constant { value: 0.9 }
    }
}

impl ConfidenceModel {
    fn validate(&self) -> Result<()> {
        let scores = match *self {
            ConfidenceModel::Constant { value } => vec![value],
            ConfidenceModel::Separated { valid, invalid } => vec![valid, invalid],
        };
        if scores.iter().all(|c| (0.0..=1.0).contains(c)) {
            Ok(())
        } else {
            Err(Error::invalid(
                "confidence",
                format!("scores must lie in [0, 1], got {self:?}"),
            ))
        }
    }

    fn score(&self, violated: bool) -> f64 {
        match *self {
            ConfidenceModel::Constant { value } => value,
            ConfidenceModel::Separated { valid, invalid } => {
                if violated {
                    invalid
                } else {
                    valid
                }
            }
        }
    }
}

fn default_distractors() -> u32 {
    3
}

/// A Bernoulli oracle with known violation probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub true_r: f64,
    #[serde(default)]
    pub confidence_model: ConfidenceModel,
    pub seed: u64,
    /// Number of distinct wrong payloads a violating sample picks from.
    #[serde(default = "default_distractors")]
    pub distractors: u32,
}

impl SyntheticSpec {
    pub fn bernoulli(true_r: f64, seed: u64) -> Self {
        Self {
            true_r,
            confidence_model: ConfidenceModel::default(),
            seed,
            distractors: default_distractors(),
        }
    }

    pub fn with_confidence(mut self, model: ConfidenceModel) -> Self {
        self.confidence_model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.true_r) {
            return Err(Error::invalid(
                "true_r",
                format!("must lie in [0, 1], got {}", self.true_r),
            ));
        }
        self.confidence_model.validate()
    }
}

#[inline]
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seeded single-constraint Bernoulli generator.
///
/// Each sample consumes exactly one `u64` from a ChaCha8 stream: the top 53
/// bits decide the violation, the low bits pick the distractor payload. The
/// violation stream is therefore identical whether it is read through
/// [`ViolationSource`] or [`SampleSource`].
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    spec: SyntheticSpec,
    rng: ChaCha8Rng,
}

impl SyntheticSource {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(Self { spec, rng })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    #[inline]
    fn draw(&mut self) -> (bool, u64) {
        let bits = self.rng.next_u64();
        (unit_interval(bits) < self.spec.true_r, bits)
    }
}

impl ViolationSource for SyntheticSource {
    #[inline]
    fn next_violation(&mut self) -> Result<bool, GeneratorError> {
        Ok(self.draw().0)
    }
}

impl SampleSource for SyntheticSource {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        let (violated, bits) = self.draw();
        let payload = if !violated {
            VALID_PAYLOAD.to_owned()
        } else if self.spec.distractors == 0 {
            "wrong".to_owned()
        } else {
            format!("wrong-{}", (bits & 0x7ff) % u64::from(self.spec.distractors))
        };
        Ok(GeneratorSample::new(
            payload,
            Some(self.spec.confidence_model.score(violated)),
            ViolationVector::single(violated),
        ))
    }
}

/// Seeded multi-constraint generator with independent per-constraint
/// violation probabilities.
#[derive(Debug, Clone)]
pub struct SyntheticVectorSource {
    probs: Vec<f64>,
    rng: ChaCha8Rng,
}

impl SyntheticVectorSource {
    pub fn new(probs: Vec<f64>, seed: u64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid(
                "constraint probabilities",
                "need at least one constraint",
            ));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(
                "constraint probabilities",
                format!("{p} outside [0, 1]"),
            ));
        }
        Ok(Self {
            probs,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl SampleSource for SyntheticVectorSource {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        let flags: Vec<bool> = self
            .probs
            .iter()
            .map(|&p| unit_interval(self.rng.next_u64()) < p)
            .collect();
        let payload = if flags.iter().any(|&f| f) {
            "wrong"
        } else {
            VALID_PAYLOAD
        };
        Ok(GeneratorSample::new(payload, None, ViolationVector::new(flags)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(r: f64, seed: u64, n: usize) -> Vec<bool> {
        let mut s = SyntheticSource::new(SyntheticSpec::bernoulli(r, seed)).unwrap();
        (0..n).map(|_| s.next_violation().unwrap()).collect()
    }

    #[test]
    fn degenerate_rates() {
        assert!(flags(0.0, 1, 10_000).iter().all(|&f| !f));
        assert!(flags(1.0, 1, 10_000).iter().all(|&f| f));
    }

    #[test]
    fn empirical_mean_matches_rate() {
        let n = 1_000_000;
        let k = flags(0.3, 42, n).iter().filter(|&&f| f).count();
        let mean = k as f64 / n as f64;
        // 0.002 is about 4.4 binomial standard errors at n = 1e6.
        assert!((mean - 0.3).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn draws_look_independent() {
        let n = 1_000_000;
        let xs: Vec<f64> = flags(0.3, 9, n).into_iter().map(|f| f as u8 as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1) as f64;
        let rho = cov / var;
        assert!(rho.abs() < 0.01, "lag-1 autocorrelation {rho}");

        // Wald-Wolfowitz runs test.
        let n1 = xs.iter().filter(|&&x| x == 1.0).count() as f64;
        let n0 = n as f64 - n1;
        let runs = 1 + xs.windows(2).filter(|w| w[0] != w[1]).count();
        let expected = 2.0 * n0 * n1 / (n0 + n1) + 1.0;
        let variance = (expected - 1.0) * (expected - 2.0) / (n0 + n1 - 1.0);
        let z = (runs as f64 - expected) / variance.sqrt();
        assert!(z.abs() < 4.0, "runs test z = {z}");
    }

    #[test]
    fn same_seed_same_stream_across_interfaces() {
        let spec = SyntheticSpec::bernoulli(0.4, 77);
        let mut a = SyntheticSource::new(spec.clone()).unwrap();
        let mut b = SyntheticSource::new(spec).unwrap();
        for _ in 0..1000 {
            let via_sample = b.next_sample().unwrap();
            assert_eq!(a.next_violation().unwrap(), via_sample.violated());
        }
        assert_ne!(flags(0.5, 1, 64), flags(0.5, 2, 64));
    }

    #[test]
    fn confidence_models() {
        let spec = SyntheticSpec::bernoulli(0.5, 3).with_confidence(ConfidenceModel::Separated {
            valid: 0.9,
            invalid: 0.2,
        });
        let mut s = SyntheticSource::new(spec).unwrap();
        for _ in 0..200 {
            let x = s.next_sample().unwrap();
            let expected = if x.violated() { 0.2 } else { 0.9 };
            assert_eq!(x.confidence, Some(expected));
            assert_eq!(x.payload == VALID_PAYLOAD, !x.violated());
        }
        let bad = SyntheticSpec::bernoulli(0.5, 3).with_confidence(ConfidenceModel::Constant { value: 1.2 });
        assert!(SyntheticSource::new(bad).is_err());
        assert!(SyntheticSource::new(SyntheticSpec::bernoulli(1.1, 0)).is_err());
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|t| derive_seed(5, t)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
        assert_ne!(derive_seed(5, 3), derive_seed(6, 3));
    }

    #[test]
    fn vector_source_rates() {
        let mut s = SyntheticVectorSource::new(vec![0.0, 1.0], 1).unwrap();
        for _ in 0..100 {
            assert_eq!(s.next_sample().unwrap().violation.flags(), &[false, true]);
        }
        assert!(SyntheticVectorSource::new(vec![], 1).is_err());
        assert!(SyntheticVectorSource::new(vec![-0.1], 1).is_err());
    }
}

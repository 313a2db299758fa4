//! Heuristic selective-prediction baselines.
//!
//! Neither rule carries a risk guarantee; their conditional violation rates
//! are measured, not certified. Thresholds are inclusive: Conf-SP accepts at
//! `confidence ≥ t`, SC-SP at a modal count of at least `⌈γ·m⌉`.

use serde::{Deserialize, Serialize};

use crate::generators::{normalize, GeneratorSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfSpConfig {
    pub threshold: f64,
}

impl ConfSpConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(
                "threshold",
                format!("must lie in [0, 1], got {threshold}"),
            ));
        }
        Ok(Self { threshold })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScSpConfig {
    /// Samples per input.
    pub m: usize,
    /// Required agreement fraction γ.
    pub agreement: f64,
}

impl ScSpConfig {
    pub fn new(m: usize, agreement: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("m", format!("need at least 2 samples, got {m}")));
        }
        if !(agreement > 0.0 && agreement <= 1.0) {
            return Err(Error::invalid(
                "agreement",
                format!("must lie in (0, 1], got {agreement}"),
            ));
        }
        Ok(Self { m, agreement })
    }

    /// `⌈γ·m⌉`.
    pub fn required_votes(&self) -> usize {
        // Guard against 0.6 * 5 = 3.0000000000000004 rounding up to 4.
        let raw = self.agreement * self.m as f64;
        (raw - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub accepted: bool,
    pub payload: Option<String>,
    /// Index of the sample whose payload was returned.
    pub chosen: Option<usize>,
}

impl Selection {
    fn reject() -> Self {
        Self {
            accepted: false,
            payload: None,
            chosen: None,
        }
    }
}

/// Confidence-threshold selective prediction on a single sample.
pub fn conf_sp(sample: &GeneratorSample, config: &ConfSpConfig) -> Result<Selection> {
    let confidence = sample
        .confidence
        .ok_or_else(|| Error::Config("Conf-SP needs samples with a confidence score".into()))?;
    Ok(if confidence >= config.threshold {
        Selection {
            accepted: true,
            payload: Some(sample.payload.clone()),
            chosen: Some(0),
        }
    } else {
        Selection::reject()
    })
}

/// Self-consistency selective prediction: accept the modal normalized
/// payload when it reaches `⌈γ·m⌉` votes. Ties go to the payload seen first.
pub fn sc_sp(samples: &[GeneratorSample], config: &ScSpConfig) -> Result<Selection> {
    if samples.len() != config.m {
        return Err(Error::invalid(
            "samples",
            format!("SC-SP configured for m = {} but got {}", config.m, samples.len()),
        ));
    }
    // (normalized payload, count, first index); m is small so a linear scan
    // keeps first-occurrence order without a map.
    let mut tally: Vec<(String, usize, usize)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let key = normalize(&s.payload);
        match tally.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.1 += 1,
            None => tally.push((key, 1, i)),
        }
    }
    let mut best = &tally[0];
    for entry in &tally[1..] {
        if entry.1 > best.1 {
            best = entry;
        }
    }
    Ok(if best.1 >= config.required_votes() {
        Selection {
            accepted: true,
            payload: Some(best.0.clone()),
            chosen: Some(best.2),
        }
    } else {
        Selection::reject()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ViolationVector;

    fn sample(payload: &str, confidence: Option<f64>) -> GeneratorSample {
        GeneratorSample::new(payload, confidence, ViolationVector::single(false))
    }

    fn batch(payloads: &[&str]) -> Vec<GeneratorSample> {
        payloads.iter().map(|p| sample(p, None)).collect()
    }

    #[test]
    fn conf_sp_threshold_is_inclusive() {
        let t = ConfSpConfig::new(0.8).unwrap();
        assert!(conf_sp(&sample("x", Some(0.9)), &t).unwrap().accepted);
        let s = conf_sp(&sample("x", Some(0.8)), &t).unwrap();
        assert!(s.accepted);
        assert_eq!(s.payload.as_deref(), Some("x"));
        assert!(!conf_sp(&sample("x", Some(0.79)), &t).unwrap().accepted);
        assert!(conf_sp(&sample("x", None), &t).is_err());
        assert!(ConfSpConfig::new(1.5).is_err());
    }

    #[test]
    fn sc_sp_examples() {
        let five = ScSpConfig::new(5, 0.6).unwrap();
        let s = sc_sp(&batch(&["a", "a", "a", "b", "c"]), &five).unwrap();
        assert!(s.accepted);
        assert_eq!(s.payload.as_deref(), Some("a"));

        let distinct = ScSpConfig::new(5, 0.4).unwrap();
        assert!(!sc_sp(&batch(&["a", "b", "c", "d", "e"]), &distinct).unwrap().accepted);

        let tie = ScSpConfig::new(4, 0.5).unwrap();
        let s = sc_sp(&batch(&["a", "a", "b", "b"]), &tie).unwrap();
        assert_eq!((s.payload.as_deref(), s.chosen), (Some("a"), Some(0)));
        let s = sc_sp(&batch(&["b", "a", "a", "b"]), &tie).unwrap();
        assert_eq!(s.payload.as_deref(), Some("b"));
    }

    #[test]
    fn sc_sp_normalizes_and_checks_size() {
        let cfg = ScSpConfig::new(3, 1.0).unwrap();
        let s = sc_sp(&batch(&["Paris.", " paris", "PARIS"]), &cfg).unwrap();
        assert_eq!(s.payload.as_deref(), Some("paris"));
        assert!(sc_sp(&batch(&["a", "a"]), &cfg).is_err());
        assert!(ScSpConfig::new(1, 0.5).is_err());
        assert!(ScSpConfig::new(3, 0.0).is_err());
    }

    #[test]
    fn required_votes_rounds_up() {
        assert_eq!(ScSpConfig::new(5, 0.6).unwrap().required_votes(), 3);
        assert_eq!(ScSpConfig::new(5, 0.4).unwrap().required_votes(), 2);
        assert_eq!(ScSpConfig::new(5, 0.41).unwrap().required_votes(), 3);
        assert_eq!(ScSpConfig::new(4, 0.5).unwrap().required_votes(), 2);
        assert_eq!(ScSpConfig::new(7, 1.0).unwrap().required_votes(), 7);
    }

    #[test]
    fn acceptance_monotone_in_thresholds() {
        let confidences: Vec<f64> = (0..50).map(|i| (i * 37 % 50) as f64 / 49.0).collect();
        let mut prev = usize::MAX;
        for i in 0..=20 {
            let cfg = ConfSpConfig::new(i as f64 / 20.0).unwrap();
            let n = confidences
                .iter()
                .filter(|&&c| conf_sp(&sample("x", Some(c)), &cfg).unwrap().accepted)
                .count();
            assert!(n <= prev);
            prev = n;
        }

        let batches = [
            batch(&["a", "a", "b", "c", "a", "d"]),
            batch(&["a", "b", "c", "d", "e", "f"]),
            batch(&["a", "a", "a", "a", "a", "b"]),
            batch(&["x", "y", "x", "y", "z", "z"]),
        ];
        let mut prev = usize::MAX;
        for i in 1..=20 {
            let cfg = ScSpConfig::new(6, i as f64 / 20.0).unwrap();
            let n = batches.iter().filter(|b| sc_sp(b, &cfg).unwrap().accepted).count();
            assert!(n <= prev);
            prev = n;
        }
    }
}

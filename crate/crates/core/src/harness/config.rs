use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::CertifyConfig;
use crate::constraints::ConstraintSpec;
use crate::generators::{ConfidenceModel, EndpointConfig, VerifierSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// All-n coverage of the confidence sequence over full trajectories.
    Coverage,
    /// Wrong-verdict rates against a known violation rate.
    DecisionError,
    /// Stopping-time distribution as a function of the feasibility gap.
    GapScaling,
    /// Verdict fractions and average samples per difficulty tier.
    TierTable,
    /// Certification against Conf-SP and SC-SP on shared generations.
    BaselineCompare,
    /// Lexicographic certification of prioritised constraint levels.
    Hierarchy,
}

impl Scenario {
    fn needs_known_rate(self) -> bool {
        matches!(
            self,
            Scenario::Coverage | Scenario::DecisionError | Scenario::GapScaling
        )
    }
}

fn default_distractors() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    ExactMatch,
    #[default]
    Contains,
}

impl MatchMode {
    pub fn verifier(self, references: &[String]) -> VerifierSpec {
        match self {
            MatchMode::ExactMatch => VerifierSpec::exact_match(references.iter().cloned()),
            MatchMode::Contains => VerifierSpec::contains(references.iter().cloned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorRef {
    Synthetic {
        /// Default rate for tiers that do not set their own.
        #[serde(default)]
        true_r: Option<f64>,
        #[serde(default)]
        confidence_model: ConfidenceModel,
        #[serde(default = "default_distractors")]
        distractors: u32,
    },
    Live {
        endpoint: EndpointConfig,
        /// Question-set file; relative paths resolve against the config file.
        questions: PathBuf,
        #[serde(default)]
        match_mode: MatchMode,
    },
}

impl Default for GeneratorRef {
    fn default() -> Self {
        GeneratorRef::Synthetic {
            true_r: None,
            confidence_model: ConfidenceModel::default(),
            distractors: default_distractors(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub label: String,
    #[serde(default)]
    pub true_r: Option<f64>,
    /// Per-constraint violation probabilities (hierarchy scenario).
    #[serde(default)]
    pub constraint_probs: Option<Vec<f64>>,
    /// Question-set tier to draw from (live generator).
    #[serde(default)]
    pub question_tier: Option<String>,
}

impl Tier {
    pub fn synthetic(label: impl Into<String>, true_r: f64) -> Self {
        Self {
            label: label.into(),
            true_r: Some(true_r),
            constraint_probs: None,
            question_tier: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSettings {
    pub conf_threshold: f64,
    pub sc_m: usize,
    pub sc_agreement: f64,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            conf_threshold: 0.5,
            sc_m: 5,
            sc_agreement: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySettings {
    pub spec: ConstraintSpec,
    /// One budget per priority level; δ and `n_max` come from `certify`.
    pub level_epsilons: Vec<f64>,
}

/// A Monte Carlo experiment. `trials` counts trials per tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub trials: u64,
    pub base_seed: u64,
    pub certify: CertifyConfig,
    #[serde(default)]
    pub generator: GeneratorRef,
    #[serde(default)]
    pub tiers: Vec<Tier>,
    /// Trajectory length for the coverage scenario; defaults to `n_max`.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub baselines: Option<BaselineSettings>,
    #[serde(default)]
    pub hierarchy: Option<HierarchySettings>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Adds `wall_time_us` to records. Off by default because it makes
    /// record files differ between otherwise identical runs.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn synthetic(
        scenario: Scenario,
        trials: u64,
        base_seed: u64,
        certify: CertifyConfig,
        tiers: Vec<Tier>,
    ) -> Self {
        Self {
            scenario,
            trials,
            base_seed,
            certify,
            generator: GeneratorRef::default(),
            tiers,
            horizon: None,
            baselines: None,
            hierarchy: None,
            workers: None,
            record_wall_time: false,
        }
    }

    /// Loads a config from TOML (`.toml`) or JSON (anything else). Relative
    /// question-set paths are resolved against the config's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        if let GeneratorRef::Live { questions, .. } = &mut config.generator {
            if questions.is_relative() {
                if let Some(dir) = path.parent() {
                    *questions = dir.join(&*questions);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon.unwrap_or(self.certify.n_max)
    }

    pub fn baseline_settings(&self) -> BaselineSettings {
        self.baselines.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        self.certify.validate()?;
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        if self.scenario == Scenario::Coverage && self.horizon() < self.certify.n_max {
            return Err(Error::invalid("horizon", "coverage horizon must be at least n_max"));
        }
        let mut labels = std::collections::HashSet::new();
        for t in &self.tiers {
            if !labels.insert(t.label.as_str()) {
                return Err(Error::invalid("tiers", format!("duplicate tier label {}", t.label)));
            }
        }
        match &self.generator {
            GeneratorRef::Synthetic {
                true_r,
                confidence_model,
                ..
            } => {
                crate::generators::SyntheticSpec {
                    true_r: true_r.unwrap_or(0.0),
                    confidence_model: *confidence_model,
                    seed: 0,
                    distractors: 1,
                }
                .validate()?;
                if self.scenario == Scenario::Hierarchy {
                    self.validate_hierarchy()?;
                } else {
                    for tier in self.resolved_tiers() {
                        match tier.true_r {
                            Some(r) if (0.0..=1.0).contains(&r) => {}
                            Some(r) => {
                                return Err(Error::invalid(
                                    "true_r",
                                    format!("tier {}: {r} outside [0, 1]", tier.label),
                                ))
                            }
                            None => {
                                return Err(Error::invalid(
                                    "true_r",
                                    format!("tier {} has no violation rate", tier.label),
                                ))
                            }
                        }
                    }
                }
            }
            GeneratorRef::Live { endpoint, .. } => {
                if self.scenario.needs_known_rate() || self.scenario == Scenario::Hierarchy {
                    return Err(Error::invalid(
                        "generator",
                        format!("scenario {:?} needs a synthetic generator", self.scenario),
                    ));
                }
                endpoint.validate()?;
            }
        }
        if let Some(b) = &self.baselines {
            crate::baselines::ConfSpConfig::new(b.conf_threshold)?;
            crate::baselines::ScSpConfig::new(b.sc_m, b.sc_agreement)?;
        }
        Ok(())
    }

    fn validate_hierarchy(&self) -> Result<()> {
        let h = self
            .hierarchy
            .as_ref()
            .ok_or_else(|| Error::invalid("hierarchy", "hierarchy scenario needs a [hierarchy] section"))?;
        h.spec.validate()?;
        let levels = h
            .spec
            .levels
            .as_ref()
            .ok_or_else(|| Error::invalid("levels", "hierarchy spec needs priority levels"))?;
        if levels.len() != h.level_epsilons.len() {
            return Err(Error::invalid(
                "level_epsilons",
                format!("{} levels but {} budgets", levels.len(), h.level_epsilons.len()),
            ));
        }
        for &eps in &h.level_epsilons {
            CertifyConfig::new(eps, self.certify.delta, self.certify.n_max)?;
        }
        if self.tiers.is_empty() {
            return Err(Error::invalid(
                "tiers",
                "hierarchy scenario needs tiers with constraint_probs",
            ));
        }
        for t in &self.tiers {
            match &t.constraint_probs {
                Some(p) if p.len() == h.spec.k() => {
                    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                        return Err(Error::invalid(
                            "constraint_probs",
                            format!("tier {}: outside [0, 1]", t.label),
                        ));
                    }
                }
                _ => {
                    return Err(Error::invalid(
                        "constraint_probs",
                        format!("tier {} needs {} per-constraint probabilities", t.label, h.spec.k()),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Tiers with generator defaults filled in. An empty tier list yields one
    /// `default` tier.
    pub fn resolved_tiers(&self) -> Vec<Tier> {
        let default_r = match &self.generator {
            GeneratorRef::Synthetic { true_r, .. } => *true_r,
            GeneratorRef::Live { .. } => None,
        };
        if self.tiers.is_empty() {
            return vec![Tier {
                label: "default".into(),
                true_r: default_r,
                constraint_probs: None,
                question_tier: None,
            }];
        }
        self.tiers
            .iter()
            .cloned()
            .map(|mut t| {
                t.true_r = t.true_r.or(default_r);
                t
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::synthetic(
            Scenario::TierTable,
            10,
            1,
            CertifyConfig::new(0.4, 0.05, 40).unwrap(),
            vec![Tier::synthetic("easy", 0.02)],
        )
    }

    #[test]
    fn zero_trials_rejected() {
        let mut c = base();
        c.trials = 0;
        assert!(c.validate().is_err());
        assert!(base().validate().is_ok());
    }

    #[test]
    fn tiers_need_rates() {
        let mut c = base();
        c.tiers[0].true_r = None;
        assert!(c.validate().is_err());
        c.generator = GeneratorRef::Synthetic {
            true_r: Some(0.3),
            confidence_model: ConfidenceModel::default(),
            distractors: 3,
        };
        assert!(c.validate().is_ok());
        assert_eq!(c.resolved_tiers()[0].true_r, Some(0.3));
    }

    #[test]
    fn live_generator_rejected_for_known_rate_scenarios() {
        let mut c = base();
        c.scenario = Scenario::Coverage;
        c.generator = GeneratorRef::Live {
            endpoint: EndpointConfig::new("http://localhost:1", "m", 0.7),
            questions: "q.jsonl".into(),
            match_mode: MatchMode::Contains,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("exp.toml");
        std::fs::write(
            &toml_path,
            r#"
scenario = "tier-table"
trials = 5
base_seed = 3
certify = { epsilon = 0.4, delta = 0.05, n_max = 40 }
[[tiers]]
label = "easy"
true_r = 0.02
"#,
        )
        .unwrap();
        let c = ExperimentConfig::from_path(&toml_path).unwrap();
        assert_eq!(c.scenario, Scenario::TierTable);
        let json_path = dir.path().join("exp.json");
        std::fs::write(&json_path, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::from_path(&json_path).unwrap(), c);
        assert!(ExperimentConfig::from_path(dir.path().join("missing.toml")).is_err());
    }
}

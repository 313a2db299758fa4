use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::constraints::ViolationVector;
use crate::{Error, Result};

/// Canonical form used for every comparison: lowercase, runs of whitespace
/// collapsed to one space, surrounding whitespace trimmed, then trailing
/// `.,!?;:` stripped.
pub fn normalize(text: &str) -> String {
    let collapsed = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(['.', ',', '!', '?', ';', ':'])
        .trim_end()
        .to_owned()
}

/// A single check in a rule-list verifier. A rule that does not hold marks
/// its constraint as violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    NonEmpty,
    MaxChars { limit: usize },
    Contains { text: String },
    NotContains { text: String },
    Matches { pattern: String },
    Constant { holds: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum VerifierSpec {
    /// Valid iff the normalized payload equals a normalized reference.
    ExactMatch { references: Vec<String> },
    /// Valid iff the normalized payload contains a normalized reference.
    Contains { references: Vec<String> },
    /// One constraint per rule, evaluated on the normalized payload.
    RuleList { rules: Vec<Rule> },
}

impl VerifierSpec {
    pub fn exact_match<S: Into<String>>(references: impl IntoIterator<Item = S>) -> Self {
        VerifierSpec::ExactMatch {
            references: references.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains<S: Into<String>>(references: impl IntoIterator<Item = S>) -> Self {
        VerifierSpec::Contains {
            references: references.into_iter().map(Into::into).collect(),
        }
    }

    /// Number of constraints the verifier reports.
    pub fn constraint_count(&self) -> usize {
        match self {
            VerifierSpec::RuleList { rules } => rules.len(),
            _ => 1,
        }
    }

    pub fn compile(&self) -> Result<Verifier> {
        let compiled = match self {
            VerifierSpec::ExactMatch { references } | VerifierSpec::Contains { references } => {
                if references.is_empty() {
                    return Err(Error::invalid("verifier", "reference list is empty"));
                }
                let refs = references.iter().map(|r| normalize(r)).collect();
                if matches!(self, VerifierSpec::ExactMatch { .. }) {
                    Compiled::Exact(refs)
                } else {
                    Compiled::Contains(refs)
                }
            }
            VerifierSpec::RuleList { rules } => {
                if rules.is_empty() {
                    return Err(Error::invalid("verifier", "rule list is empty"));
                }
                let rules = rules
                    .iter()
                    .map(|rule| {
                        Ok(match rule {
                            Rule::NonEmpty => CompiledRule::NonEmpty,
                            Rule::MaxChars { limit } => CompiledRule::MaxChars(*limit),
                            Rule::Contains { text } => CompiledRule::Contains(normalize(text)),
                            Rule::NotContains { text } => CompiledRule::NotContains(normalize(text)),
                            Rule::Matches { pattern } => CompiledRule::Matches(
                                Regex::new(pattern).map_err(|e| Error::invalid("verifier", e.to_string()))?,
                            ),
                            Rule::Constant { holds } => CompiledRule::Constant(*holds),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Compiled::Rules(rules)
            }
        };
        Ok(Verifier { compiled })
    }
}

#[derive(Debug, Clone)]
enum CompiledRule {
    NonEmpty,
    MaxChars(usize),
    Contains(String),
    NotContains(String),
    Matches(Regex),
    Constant(bool),
}

impl CompiledRule {
    fn holds(&self, normalized: &str) -> bool {
        match self {
            CompiledRule::NonEmpty => !normalized.is_empty(),
            CompiledRule::MaxChars(limit) => normalized.chars().count() <= *limit,
            CompiledRule::Contains(t) => normalized.contains(t.as_str()),
            CompiledRule::NotContains(t) => !normalized.contains(t.as_str()),
            CompiledRule::Matches(re) => re.is_match(normalized),
            CompiledRule::Constant(holds) => *holds,
        }
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Exact(Vec<String>),
    Contains(Vec<String>),
    Rules(Vec<CompiledRule>),
}

/// A validated, ready-to-run verifier. Stateless and `Sync`.
#[derive(Debug, Clone)]
pub struct Verifier {
    compiled: Compiled,
}

impl Verifier {
    pub fn verify(&self, payload: &str) -> ViolationVector {
        let text = normalize(payload);
        match &self.compiled {
            Compiled::Exact(refs) => ViolationVector::single(!refs.contains(&text)),
            Compiled::Contains(refs) => ViolationVector::single(!refs.iter().any(|r| text.contains(r.as_str()))),
            Compiled::Rules(rules) => ViolationVector::new(rules.iter().map(|r| !r.holds(&text)).collect()),
        }
    }
}

/// One-off verification; compiles `spec` on every call.
pub fn verify(payload: &str, spec: &VerifierSpec) -> Result<ViolationVector> {
    Ok(spec.compile()?.verify(payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize("  PARIS.  "), "paris");
        assert_eq!(normalize("New\t\nYork  City!?"), "new york city");
        assert_eq!(normalize("a . "), "a");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn exact_and_contains_modes() {
        let exact = VerifierSpec::exact_match(["paris"]);
        assert!(!verify(" PARIS. ", &exact).unwrap().any());
        assert!(verify("paris, france", &exact).unwrap().any());
        let contains = VerifierSpec::contains(["paris"]);
        assert!(!verify("paris, france", &contains).unwrap().any());
        assert!(verify("london", &contains).unwrap().any());
        assert!(!verify("paris", &VerifierSpec::exact_match(["Paris"])).unwrap().any());
    }

    #[test]
    fn empty_references_rejected() {
        assert!(VerifierSpec::exact_match(Vec::<String>::new()).compile().is_err());
        assert!(VerifierSpec::RuleList { rules: vec![] }.compile().is_err());
        let bad = VerifierSpec::RuleList {
            rules: vec![Rule::Matches { pattern: "(".into() }],
        };
        assert!(bad.compile().is_err());
    }

    #[test]
    fn rule_lists() {
        let never = VerifierSpec::RuleList {
            rules: vec![Rule::Constant { holds: false }],
        };
        for p in ["", "paris", "anything at all"] {
            assert_eq!(verify(p, &never).unwrap().flags(), &[true]);
        }
        let spec = VerifierSpec::RuleList {
            rules: vec![
                Rule::NonEmpty,
                Rule::MaxChars { limit: 10 },
                Rule::NotContains {
                    text: "I don't know".into(),
                },
                Rule::Matches {
                    pattern: r"^\d{4}$".into(),
                },
            ],
        };
        let v = spec.compile().unwrap();
        assert_eq!(v.verify("1969").flags(), &[false, false, false, false]);
        assert_eq!(v.verify("I don't know, sorry").flags(), &[false, true, true, true]);
        assert_eq!(v.verify("   ").flags(), &[true, false, false, true]);
        assert_eq!(spec.constraint_count(), 4);
    }

    #[test]
    fn verifier_is_deterministic_across_threads() {
        let v = VerifierSpec::contains(["armstrong"]).compile().unwrap();
        let here = v.verify("Neil Armstrong.");
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let v = v.clone();
                std::thread::spawn(move || v.verify("Neil Armstrong."))
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), here);
        }
        assert_eq!(v.verify("Neil Armstrong."), here);
    }
}

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::{CertifyConfig, Decision, Verdict};
use crate::confseq::ConfidenceState;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Verdict as recorded by the harness. `Aborted` marks a generator failure
/// and is kept apart from the statistical verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialVerdict {
    Feasible,
    Infeasible,
    Undecided,
    Aborted,
}

impl From<Verdict> for TrialVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Feasible => TrialVerdict::Feasible,
            Verdict::Infeasible => TrialVerdict::Infeasible,
            Verdict::Undecided => TrialVerdict::Undecided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub accepted: bool,
    /// Violation flag of the returned output; absent on rejection.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    /// Absent when the level was skipped.
    pub verdict: Option<Verdict>,
    pub stopping_time: u64,
    pub violations: u64,
    pub epsilon: f64,
    pub true_r: f64,
}

/// One line of the records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub trial_id: u64,
    pub tier: String,
    pub seed: u64,
    pub verdict: TrialVerdict,
    pub stopping_time: u64,
    pub violations: u64,
    pub empirical_rate: Option<f64>,
    pub true_r: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub returned_violation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub covered: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conf_sp: Option<BaselineOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sc_sp: Option<BaselineOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub levels: Option<Vec<LevelRecord>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub question_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_us: Option<u64>,
}

impl TrialRecord {
    pub(crate) fn new(trial_id: u64, tier: &str, seed: u64, config: &CertifyConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            trial_id,
            tier: tier.to_owned(),
            seed,
            verdict: TrialVerdict::Aborted,
            stopping_time: 0,
            violations: 0,
            empirical_rate: None,
            true_r: None,
            epsilon: config.epsilon,
            delta: config.delta,
            returned_violation: None,
            covered: None,
            conf_sp: None,
            sc_sp: None,
            levels: None,
            question_id: None,
            error: None,
            wall_time_us: None,
        }
    }

    pub(crate) fn set_state(&mut self, state: &ConfidenceState) {
        self.stopping_time = state.n();
        self.violations = state.violations();
        self.empirical_rate = state.empirical_rate().ok();
    }

    pub(crate) fn set_decision(&mut self, decision: &Decision) {
        self.verdict = decision.verdict.into();
        self.set_state(&decision.final_state);
        self.returned_violation = decision.returned_sample.as_ref().map(|s| s.violated());
    }

    /// Re-checks the verdict against the recorded counters. Aborted and
    /// hierarchy records are not checkable this way and return true.
    pub fn is_consistent(&self, n_max: u64) -> bool {
        let verdict = match self.verdict {
            TrialVerdict::Feasible => Verdict::Feasible,
            TrialVerdict::Infeasible => Verdict::Infeasible,
            TrialVerdict::Undecided => Verdict::Undecided,
            TrialVerdict::Aborted => return true,
        };
        if self.levels.is_some() {
            return true;
        }
        let (Ok(config), Ok(state)) = (
            CertifyConfig::new(self.epsilon, self.delta, n_max),
            ConfidenceState::from_counts(self.stopping_time, self.violations, self.delta),
        ) else {
            return false;
        };
        Decision {
            verdict,
            stopping_time: self.stopping_time,
            final_state: state,
            returned_sample: None,
        }
        .is_consistent(&config)
    }
}

/// Serialized appender for the records file. Each call writes whole lines
/// and flushes, so an interrupted run leaves at most one partial line.
pub struct RecordWriter {
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn append(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::options().append(true).create(true).open(path)?),
        })
    }

    pub fn write_all(&mut self, records: &[TrialRecord]) -> Result<()> {
        for r in records {
            serde_json::to_writer(&mut self.out, r)?;
            self.out.write_all(b"\n")?;
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a records file. With `tolerate_partial_tail`, an unparsable final
/// line (an interrupted write) is dropped instead of failing.
pub fn read_records(path: impl AsRef<Path>, tolerate_partial_tail: bool) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialRecord>(line) {
            Ok(r) => {
                if r.schema_version != SCHEMA_VERSION {
                    return Err(Error::Config(format!(
                        "{}:{}: unsupported schema_version {}",
                        path.display(),
                        i + 1,
                        r.schema_version
                    )));
                }
                out.push(r);
            }
            Err(_) if tolerate_partial_tail && i == last => {}
            Err(e) => return Err(Error::Config(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

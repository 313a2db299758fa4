use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{TrialRecord, TrialVerdict};
use crate::certify::Verdict;
use crate::{Error, Result};

/// Header of the summary CSV. Stable contract.
pub const SUMMARY_HEADER: [&str; 6] = ["tier", "feasible", "infeasible", "undecided", "aborted", "avg_samples"];

/// Acceptance rate and the violation rate among accepted outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub acceptance: f64,
    /// `None` when nothing was accepted.
    pub violation: Option<f64>,
}

impl fmt::Display for RatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violation {
            Some(v) => write!(f, "{:.2} / {:.2}", self.acceptance, v),
            None => write!(f, "{:.2} / -", self.acceptance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub tier: String,
    /// Non-aborted trials; the denominator of every fraction below.
    pub trials: u64,
    pub feasible: f64,
    pub infeasible: f64,
    pub undecided: f64,
    /// Count of aborted trials.
    pub aborted: u64,
    /// Mean stopping time, undecided trials counted at `n_max`.
    pub avg_samples: f64,
    pub median_samples: f64,
    pub true_r: Option<f64>,
    /// Fraction of trials whose certified verdict contradicts the known rate.
    pub error_rate: Option<f64>,
    pub coverage: Option<f64>,
    pub cci: Option<RatePair>,
    pub conf_sp: Option<RatePair>,
    pub sc_sp: Option<RatePair>,
    /// Per level: fraction of trials certified feasible at that level.
    pub level_feasible: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn median(sorted: &[u64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
    }
}

fn rate_pair<'a>(
    records: &'a [&'a TrialRecord],
    pick: impl Fn(&TrialRecord) -> Option<(bool, Option<bool>)>,
) -> Option<RatePair> {
    let picked: Vec<(bool, Option<bool>)> = records.iter().filter_map(|r| pick(r)).collect();
    if picked.is_empty() {
        return None;
    }
    let accepted: Vec<Option<bool>> = picked.iter().filter(|(a, _)| *a).map(|(_, v)| *v).collect();
    Some(RatePair {
        acceptance: accepted.len() as f64 / picked.len() as f64,
        violation: mean(accepted.iter().flatten().map(|&v| f64::from(u8::from(v)))),
    })
}

fn summarize_tier(tier: &str, records: &[&TrialRecord]) -> SummaryRow {
    let aborted = records.iter().filter(|r| r.verdict == TrialVerdict::Aborted).count() as u64;
    let live: Vec<&TrialRecord> = records
        .iter()
        .copied()
        .filter(|r| r.verdict != TrialVerdict::Aborted)
        .collect();
    let n = live.len() as u64;
    let frac = |v: TrialVerdict| {
        if n == 0 {
            0.0
        } else {
            live.iter().filter(|r| r.verdict == v).count() as f64 / n as f64
        }
    };
    let mut taus: Vec<u64> = live.iter().map(|r| r.stopping_time).collect();
    taus.sort_unstable();

    let true_r = live
        .first()
        .and_then(|r| r.true_r)
        .filter(|r0| live.iter().all(|r| r.true_r == Some(*r0)));
    let error_rate = true_r.filter(|_| live.iter().all(|r| r.levels.is_none())).map(|_| {
        let wrong = live
            .iter()
            .filter(|r| {
                let rate = r.true_r.unwrap_or(0.0);
                match r.verdict {
                    TrialVerdict::Feasible => rate > r.epsilon,
                    TrialVerdict::Infeasible => rate <= r.epsilon,
                    _ => false,
                }
            })
            .count();
        if n == 0 {
            0.0
        } else {
            wrong as f64 / n as f64
        }
    });
    let coverage = {
        let flags: Vec<bool> = live.iter().filter_map(|r| r.covered).collect();
        mean(flags.iter().map(|&c| f64::from(u8::from(c))))
    };
    let has_baselines = live.iter().any(|r| r.conf_sp.is_some() || r.sc_sp.is_some());
    let cci = has_baselines
        .then(|| {
            rate_pair(&live, |r| {
                Some((r.verdict == TrialVerdict::Feasible, r.returned_violation))
            })
        })
        .flatten();
    let level_feasible = live.first().and_then(|r| r.levels.as_ref()).map(|levels| {
        (0..levels.len())
            .map(|j| {
                let hits = live
                    .iter()
                    .filter(|r| {
                        r.levels
                            .as_ref()
                            .and_then(|l| l.get(j))
                            .is_some_and(|l| l.verdict == Some(Verdict::Feasible))
                    })
                    .count();
                hits as f64 / n.max(1) as f64
            })
            .collect()
    });

    SummaryRow {
        tier: tier.to_owned(),
        trials: n,
        feasible: frac(TrialVerdict::Feasible),
        infeasible: frac(TrialVerdict::Infeasible),
        undecided: frac(TrialVerdict::Undecided),
        aborted,
        avg_samples: mean(taus.iter().map(|&t| t as f64)).unwrap_or(0.0),
        median_samples: median(&taus),
        true_r,
        error_rate,
        coverage,
        cci,
        conf_sp: rate_pair(&live, |r| r.conf_sp.map(|b| (b.accepted, b.violated))),
        sc_sp: rate_pair(&live, |r| r.sc_sp.map(|b| (b.accepted, b.violated))),
        level_feasible,
    }
}

/// Aggregates records per tier. Records are ordered by `trial_id` first, so
/// the result does not depend on file order; tiers appear in order of their
/// lowest trial id.
pub fn summarize(records: &[TrialRecord]) -> Result<SummaryTable> {
    if records.is_empty() {
        return Err(Error::invalid("records", "nothing to summarize"));
    }
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial_id);
    let mut tiers: Vec<&str> = Vec::new();
    for r in &sorted {
        if !tiers.contains(&r.tier.as_str()) {
            tiers.push(&r.tier);
        }
    }
    let rows = tiers
        .iter()
        .map(|tier| {
            let subset: Vec<&TrialRecord> = sorted.iter().copied().filter(|r| r.tier == *tier).collect();
            summarize_tier(tier, &subset)
        })
        .collect();
    Ok(SummaryTable { rows })
}

impl SummaryTable {
    pub fn row(&self, tier: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.tier == tier)
    }

    /// Writes the `tier,feasible,infeasible,undecided,aborted,avg_samples`
    /// table.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.tier.clone(),
                r.feasible.to_string(),
                r.infeasible.to_string(),
                r.undecided.to_string(),
                r.aborted.to_string(),
                r.avg_samples.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Scenario-specific metrics in long form: `tier,metric,value`.
    pub fn write_metrics_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["tier", "metric", "value"]).map_err(csv_err)?;
        for (tier, metric, value) in self.metrics() {
            w.write_record([tier, metric, value.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metrics(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for r in &self.rows {
            let mut push = |name: &str, v: Option<f64>| {
                if let Some(v) = v {
                    out.push((r.tier.clone(), name.to_owned(), v));
                }
            };
            push("trials", Some(r.trials as f64));
            push("median_samples", Some(r.median_samples));
            push("true_r", r.true_r);
            push("error_rate", r.error_rate);
            push("coverage", r.coverage);
            for (name, pair) in [("cci", r.cci), ("conf_sp", r.conf_sp), ("sc_sp", r.sc_sp)] {
                if let Some(p) = pair {
                    push(&format!("{name}_acceptance"), Some(p.acceptance));
                    push(&format!("{name}_violation"), p.violation);
                }
            }
            if let Some(levels) = &r.level_feasible {
                for (j, f) in levels.iter().enumerate() {
                    push(&format!("level{}_feasible", j + 1), Some(*f));
                }
            }
        }
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.tier.len()).max().unwrap_or(4).max(10);
        writeln!(
            f,
            "{:<width$}  {:>8}  {:>10}  {:>9}  {:>12}",
            "Difficulty", "Feasible", "Infeasible", "Undecided", "Avg. Samples"
        )?;
        for r in &self.rows {
            write!(
                f,
                "{:<width$}  {:>8.2}  {:>10.2}  {:>9.2}  {:>12.1}",
                r.tier, r.feasible, r.infeasible, r.undecided, r.avg_samples
            )?;
            if r.aborted > 0 {
                write!(f, "  ({} aborted)", r.aborted)?;
            }
            writeln!(f)?;
        }
        if self.rows.iter().any(|r| r.cci.is_some()) {
            writeln!(f)?;
            writeln!(
                f,
                "{:<width$}  {:>13}  {:>13}  {:>13}   (acceptance / violation)",
                "Difficulty", "Conf-SP", "SC-SP", "CCI"
            )?;
            let cell = |p: Option<RatePair>| p.map_or("-".to_owned(), |p| p.to_string());
            for r in &self.rows {
                writeln!(
                    f,
                    "{:<width$}  {:>13}  {:>13}  {:>13}",
                    r.tier,
                    cell(r.conf_sp),
                    cell(r.sc_sp),
                    cell(r.cci)
                )?;
            }
        }
        let extras: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                let mut parts = Vec::new();
                if let Some(c) = r.coverage {
                    parts.push(format!("coverage {c:.4}"));
                }
                if let Some(e) = r.error_rate {
                    parts.push(format!("wrong-verdict rate {e:.4}"));
                }
                parts.push(format!("median samples {}", r.median_samples));
                if let Some(levels) = &r.level_feasible {
                    let l: Vec<String> = levels.iter().map(|x| format!("{x:.2}")).collect();
                    parts.push(format!("per-level feasible [{}]", l.join(", ")));
                }
                format!("{}: {}", r.tier, parts.join(", "))
            })
            .collect();
        if !extras.is_empty() {
            writeln!(f)?;
            for e in extras {
                writeln!(f, "{e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::CertifyConfig;

    fn rec(id: u64, tier: &str, verdict: TrialVerdict, tau: u64) -> TrialRecord {
        let cfg = CertifyConfig::new(0.4, 0.05, 40).unwrap();
        let mut r = TrialRecord::new(id, tier, id, &cfg);
        r.verdict = verdict;
        r.stopping_time = tau;
        r
    }

    #[test]
    fn single_feasible() {
        let t = summarize(&[rec(0, "a", TrialVerdict::Feasible, 17)]).unwrap();
        assert_eq!(t.rows[0].feasible, 1.0);
        assert_eq!(t.rows[0].avg_samples, 17.0);
    }

    #[test]
    fn counting_and_aborted_exclusion() {
        let records = vec![
            rec(0, "a", TrialVerdict::Feasible, 17),
            rec(1, "a", TrialVerdict::Feasible, 20),
            rec(2, "a", TrialVerdict::Infeasible, 7),
            rec(3, "a", TrialVerdict::Feasible, 18),
            rec(4, "a", TrialVerdict::Aborted, 3),
        ];
        let row = &summarize(&records).unwrap().rows[0];
        assert_eq!((row.feasible, row.infeasible, row.undecided), (0.75, 0.25, 0.0));
        assert_eq!(row.aborted, 1);
        assert_eq!(row.trials, 4);
        assert_eq!(row.avg_samples, 15.5);
        assert_eq!(row.median_samples, 17.5);
    }

    #[test]
    fn tiers_follow_trial_order() {
        let records = vec![
            rec(5, "b", TrialVerdict::Undecided, 40),
            rec(1, "a", TrialVerdict::Feasible, 17),
        ];
        let t = summarize(&records).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.tier.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn csv_header_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("summary.csv");
        summarize(&[rec(0, "easy", TrialVerdict::Feasible, 17)])
            .unwrap()
            .write_csv(&p)
            .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "tier,feasible,infeasible,undecided,aborted,avg_samples"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "easy,1,0,0,0,17");
    }
}

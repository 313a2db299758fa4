//! Seeded, resumable Monte Carlo experiments.
//!
//! Every trial gets its own generator seeded with
//! [`derive_seed`](crate::generators::derive_seed)`(base_seed, trial_id)`, so
//! trials are independent and a run is fully determined by its config.
//! Trials execute in parallel chunks; each chunk's records are appended in
//! trial order and flushed before the next chunk starts, and the finished
//! records file is rewritten in trial order. A run interrupted part-way can be
//! resumed with [`RunOptions::resume`], which skips trial ids already on disk.
//!
//! Output files in the run directory:
//!
//! * `records.jsonl`: one [`TrialRecord`] per line.
//! * `summary.csv`: `tier,feasible,infeasible,undecided,aborted,avg_samples`.
//! * `metrics.csv`: scenario-specific metrics as `tier,metric,value`.

mod config;
mod record;
mod summary;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{conf_sp, sc_sp, ConfSpConfig, ScSpConfig};
use crate::certify::{certify, certify_and_respond, CertifyConfig, Session, Verdict};
use crate::confseq::radius_unchecked;
use crate::constraints::certify_hierarchy;
use crate::generators::{
    derive_seed, load_questions, ChatClient, GeneratorError, GeneratorSample, LlmSource, Question, SampleSource,
    SyntheticSource, SyntheticSpec, SyntheticVectorSource, ViolationSource,
};
use crate::{Error, Result};

pub use config::{BaselineSettings, ExperimentConfig, GeneratorRef, HierarchySettings, MatchMode, Scenario, Tier};
pub use record::{read_records, BaselineOutcome, LevelRecord, RecordWriter, TrialRecord, TrialVerdict, SCHEMA_VERSION};
pub use summary::{summarize, RatePair, SummaryRow, SummaryTable, SUMMARY_HEADER};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's worker count. Defaults to available cores.
    pub workers: Option<usize>,
    /// Where to persist records and summaries. `None` keeps everything in
    /// memory.
    pub out_dir: Option<PathBuf>,
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summary: SummaryTable,
    /// Trials loaded from disk instead of executed.
    pub resumed: usize,
}

#[derive(Debug, Clone, Copy)]
struct TrialSlot {
    trial_id: u64,
    tier: usize,
    index_in_tier: u64,
}

/// Everything a trial needs that is shared across the run.
struct Context {
    config: ExperimentConfig,
    tiers: Vec<Tier>,
    radii: Vec<f64>,
    live: Option<LiveContext>,
}

struct LiveContext {
    client: ChatClient,
    questions_by_tier: Vec<Vec<Question>>,
    match_mode: MatchMode,
}

const CHUNK_PER_WORKER: usize = 16;

/// Runs `config` to completion and returns every record plus the summary.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let context = Context::new(config.clone())?;
    let workers = options
        .workers
        .or(config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);

    let slots: Vec<TrialSlot> = (0..context.tiers.len())
        .flat_map(|tier| {
            (0..config.trials).map(move |i| TrialSlot {
                trial_id: tier as u64 * config.trials + i,
                tier,
                index_in_tier: i,
            })
        })
        .collect();

    let records_path = options.out_dir.as_ref().map(|d| d.join(RECORDS_FILE));
    let mut done: BTreeMap<u64, TrialRecord> = BTreeMap::new();
    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    if let (true, Some(path)) = (options.resume, &records_path) {
        if path.exists() {
            for r in read_records(path, true)? {
                let expected = slots
                    .get(r.trial_id as usize)
                    .map(|s| (s.trial_id, &context.tiers[s.tier].label));
                if expected != Some((r.trial_id, &r.tier)) || r.seed != derive_seed(config.base_seed, r.trial_id) {
                    return Err(Error::Config(format!(
                        "{} holds trial {} that does not belong to this config",
                        path.display(),
                        r.trial_id
                    )));
                }
                done.insert(r.trial_id, r);
            }
        }
    }
    let resumed = done.len();
    let mut writer = match &records_path {
        Some(path) => {
            // Rewrite whatever survived so a torn tail line is dropped.
            let mut w = RecordWriter::create(path)?;
            w.write_all(&done.values().cloned().collect::<Vec<_>>())?;
            Some(w)
        }
        None => None,
    };

    let pending: Vec<TrialSlot> = slots
        .iter()
        .copied()
        .filter(|s| !done.contains_key(&s.trial_id))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    for chunk in pending.chunks(workers * CHUNK_PER_WORKER) {
        let batch: Vec<TrialRecord> = pool.install(|| chunk.par_iter().map(|slot| context.run_trial(*slot)).collect());
        if let Some(w) = writer.as_mut() {
            w.write_all(&batch)?;
        }
        done.extend(batch.into_iter().map(|r| (r.trial_id, r)));
    }
    drop(writer);

    let records: Vec<TrialRecord> = done.into_values().collect();
    let summary = summarize(&records)?;
    if let Some(dir) = &options.out_dir {
        RecordWriter::create(&dir.join(RECORDS_FILE))?.write_all(&records)?;
        summary.write_csv(&dir.join(SUMMARY_FILE))?;
        summary.write_metrics_csv(&dir.join(METRICS_FILE))?;
    }
    Ok(RunOutput {
        records,
        summary,
        resumed,
    })
}

/// Re-aggregates a records file written by [`run`].
pub fn report(records_path: &Path) -> Result<SummaryTable> {
    summarize(&read_records(records_path, false)?)
}

impl Context {
    fn new(config: ExperimentConfig) -> Result<Self> {
        let tiers = config.resolved_tiers();
        let radii = if config.scenario == Scenario::Coverage {
            (1..=config.horizon())
                .map(|n| radius_unchecked(n, config.certify.delta))
                .collect()
        } else {
            Vec::new()
        };
        let live = match &config.generator {
            GeneratorRef::Live {
                endpoint,
                questions,
                match_mode,
            } => {
                let all = load_questions(questions)?;
                let questions_by_tier = tiers
                    .iter()
                    .map(|t| {
                        let wanted = t.question_tier.as_deref().unwrap_or(&t.label);
                        let subset: Vec<Question> = if t.label == "default" && t.question_tier.is_none() {
                            all.clone()
                        } else {
                            all.iter().filter(|q| q.tier == wanted).cloned().collect()
                        };
                        if subset.is_empty() {
                            Err(Error::Config(format!("no questions for tier {}", t.label)))
                        } else {
                            Ok(subset)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(LiveContext {
                    client: ChatClient::new(endpoint.clone())?,
                    questions_by_tier,
                    match_mode: *match_mode,
                })
            }
            GeneratorRef::Synthetic { .. } => None,
        };
        Ok(Self {
            config,
            tiers,
            radii,
            live,
        })
    }

    fn synthetic_spec(&self, tier: &Tier, seed: u64) -> SyntheticSpec {
        let (confidence_model, distractors) = match &self.config.generator {
            GeneratorRef::Synthetic {
                confidence_model,
                distractors,
                ..
            } => (*confidence_model, *distractors),
            GeneratorRef::Live { .. } => unreachable!("synthetic spec requested for a live run"),
        };
        SyntheticSpec {
            true_r: tier.true_r.expect("validated tier rate"),
            confidence_model,
            seed,
            distractors,
        }
    }

    fn run_trial(&self, slot: TrialSlot) -> TrialRecord {
        let started = Instant::now();
        let tier = &self.tiers[slot.tier];
        let seed = derive_seed(self.config.base_seed, slot.trial_id);
        let mut record = TrialRecord::new(slot.trial_id, &tier.label, seed, &self.config.certify);
        record.true_r = tier.true_r;

        let outcome = match (&self.live, self.config.scenario) {
            (Some(live), scenario) => {
                record.true_r = None;
                let qs = &live.questions_by_tier[slot.tier];
                let q = &qs[(slot.index_in_tier % qs.len() as u64) as usize];
                record.question_id = Some(q.id.clone());
                match live.match_mode.verifier(&q.references).compile() {
                    Ok(verifier) => {
                        let mut source = LlmSource::new(live.client.clone(), q.question.clone(), verifier);
                        if scenario == Scenario::BaselineCompare {
                            self.baseline_trial(&mut source, &mut record)
                        } else {
                            self.certify_trial(&mut crate::generators::Indicator::aggregate(source), &mut record)
                        }
                    }
                    Err(e) => Err(e),
                }
            }
            (None, Scenario::Coverage) => self.coverage_trial(tier, seed, &mut record),
            (None, Scenario::DecisionError | Scenario::GapScaling | Scenario::TierTable) => {
                SyntheticSource::new(self.synthetic_spec(tier, seed))
                    .and_then(|mut s| self.certify_trial(&mut s, &mut record))
            }
            (None, Scenario::BaselineCompare) => SyntheticSource::new(self.synthetic_spec(tier, seed))
                .and_then(|mut s| self.baseline_trial(&mut s, &mut record)),
            (None, Scenario::Hierarchy) => self.hierarchy_trial(tier, seed, &mut record),
        };
        if let Err(e) = outcome {
            match e {
                Error::InferenceAborted { state, source } => {
                    record.verdict = TrialVerdict::Aborted;
                    record.set_state(&state);
                    record.error = Some(source.to_string());
                }
                Error::DeliveryFailed { decision, source } => {
                    record.set_decision(&decision);
                    record.error = Some(format!("response delivery failed: {source}"));
                }
                other => {
                    record.verdict = TrialVerdict::Aborted;
                    record.error = Some(other.to_string());
                }
            }
        }
        if self.config.record_wall_time {
            record.wall_time_us = Some(started.elapsed().as_micros() as u64);
        }
        record
    }

    fn certify_trial<S: ViolationSource>(&self, source: &mut S, record: &mut TrialRecord) -> Result<()> {
        let decision = certify(source, &self.config.certify)?;
        record.set_decision(&decision);
        Ok(())
    }

    /// Follows a full-horizon trajectory, checking `|R̂ₙ − R| ≤ rₙ` at every
    /// n, and records the verdict the stopping rule reaches on the same path.
    fn coverage_trial(&self, tier: &Tier, seed: u64, record: &mut TrialRecord) -> Result<()> {
        let true_r = tier.true_r.expect("validated tier rate");
        let mut source = SyntheticSource::new(self.synthetic_spec(tier, seed))?;
        let mut session = Session::new(self.config.certify)?;
        let mut violations = 0u64;
        let mut covered = true;
        for (i, &r) in self.radii.iter().enumerate() {
            let violated = source.next_violation().map_err(|e| Error::InferenceAborted {
                state: *session.state(),
                source: e,
            })?;
            violations += u64::from(violated);
            let rate = violations as f64 / (i + 1) as f64;
            if (rate - true_r).abs() > r {
                covered = false;
            }
            session.observe(violated);
        }
        let decision = session.decision().expect("horizon covers n_max");
        record.set_decision(&decision);
        record.covered = Some(covered);
        Ok(())
    }

    fn baseline_trial<S: SampleSource>(&self, source: &mut S, record: &mut TrialRecord) -> Result<()> {
        let settings = self.config.baseline_settings();
        let conf = ConfSpConfig::new(settings.conf_threshold)?;
        let sc = ScSpConfig::new(settings.sc_m, settings.sc_agreement)?;
        let mut tape = Tape::new(source);
        let decision = certify_and_respond(&mut tape, &self.config.certify)?;
        record.set_decision(&decision);
        tape.replay_from_start();
        let mut shared = Vec::with_capacity(sc.m);
        for _ in 0..sc.m {
            shared.push(tape.next_sample().map_err(Error::Generator)?);
        }
        if shared.iter().any(|s| s.confidence.is_some()) {
            let c = conf_sp(&shared[0], &conf)?;
            record.conf_sp = Some(BaselineOutcome {
                accepted: c.accepted,
                violated: c.accepted.then(|| shared[0].violated()),
            });
        }
        let s = sc_sp(&shared, &sc)?;
        record.sc_sp = Some(BaselineOutcome {
            accepted: s.accepted,
            violated: s.chosen.map(|i| shared[i].violated()),
        });
        Ok(())
    }

    fn hierarchy_trial(&self, tier: &Tier, seed: u64, record: &mut TrialRecord) -> Result<()> {
        let h = self.config.hierarchy.as_ref().expect("validated hierarchy settings");
        let probs = tier.constraint_probs.clone().expect("validated constraint probs");
        let levels = h.spec.levels.as_ref().expect("validated levels");
        let configs: Vec<CertifyConfig> = h
            .level_epsilons
            .iter()
            .map(|&eps| CertifyConfig::new(eps, self.config.certify.delta, self.config.certify.n_max))
            .collect::<Result<_>>()?;
        let mut source = SyntheticVectorSource::new(probs.clone(), seed)?;
        let decisions = certify_hierarchy(&mut source, &h.spec, &configs)?;

        let mut total_n = 0;
        let mut total_v = 0;
        let mut overall = Verdict::Feasible;
        let mut level_records = Vec::with_capacity(levels.len());
        for ((level, config), decision) in levels.iter().zip(&configs).zip(&decisions) {
            let level_r = 1.0 - level.iter().map(|&i| 1.0 - probs[i]).product::<f64>();
            if let Some(d) = decision {
                total_n += d.stopping_time;
                total_v += d.final_state.violations();
                if overall == Verdict::Feasible {
                    overall = d.verdict;
                }
            }
            level_records.push(LevelRecord {
                verdict: decision.as_ref().map(|d| d.verdict),
                stopping_time: decision.as_ref().map_or(0, |d| d.stopping_time),
                violations: decision.as_ref().map_or(0, |d| d.final_state.violations()),
                epsilon: config.epsilon,
                true_r: level_r,
            });
        }
        record.verdict = overall.into();
        record.stopping_time = total_n;
        record.violations = total_v;
        record.empirical_rate = (total_n > 0).then(|| total_v as f64 / total_n as f64);
        record.true_r = None;
        record.levels = Some(level_records);
        Ok(())
    }
}

/// Records every sample drawn so baselines can reuse the generations the
/// certification loop saw.
struct Tape<'a, S> {
    source: &'a mut S,
    seen: Vec<GeneratorSample>,
    cursor: Option<usize>,
}

impl<'a, S: SampleSource> Tape<'a, S> {
    fn new(source: &'a mut S) -> Self {
        Self {
            source,
            seen: Vec::new(),
            cursor: None,
        }
    }

    fn replay_from_start(&mut self) {
        self.cursor = Some(0);
    }
}

impl<S: SampleSource> SampleSource for Tape<'_, S> {
    fn next_sample(&mut self) -> std::result::Result<GeneratorSample, GeneratorError> {
        if let Some(i) = self.cursor {
            if let Some(s) = self.seen.get(i) {
                self.cursor = Some(i + 1);
                return Ok(s.clone());
            }
        }
        let s = self.source.next_sample()?;
        self.seen.push(s.clone());
        if let Some(i) = self.cursor.as_mut() {
            *i += 1;
        }
        Ok(s)
    }
}

/// Per-tier counts of verdicts straight from a records file, independent of
/// [`summarize`]. Used to cross-check summaries.
pub fn verdict_counts(records: &[TrialRecord]) -> HashMap<String, HashMap<TrialVerdict, u64>> {
    let mut out: HashMap<String, HashMap<TrialVerdict, u64>> = HashMap::new();
    for r in records {
        *out.entry(r.tier.clone()).or_default().entry(r.verdict).or_default() += 1;
    }
    out
}

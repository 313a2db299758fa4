//! The `cci` command line.
//!
//! | exit code | meaning    |
//! |-----------|------------|
//! | 0         | Feasible (or success for `simulate`, `report`, `plan`) |
//! | 1         | error      |
//! | 2         | Infeasible |
//! | 3         | Undecided  |

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::certify::{certify_and_respond_with, plan_samples, CertifyConfig, Decision, Verdict};
use crate::constraints::{certify_hierarchy, severity_event, ConstraintSpec};
use crate::generators::{
    load_questions, ChatClient, EndpointConfig, GeneratorSample, LlmSource, SampleSource, SyntheticSource,
    SyntheticSpec, SyntheticVectorSource, VerifierSpec,
};
use crate::harness::{self, ExperimentConfig, MatchMode, RunOptions};
use crate::{Error, Result};

pub const EXIT_FEASIBLE: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;

pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Feasible => EXIT_FEASIBLE,
        Verdict::Infeasible => EXIT_INFEASIBLE,
        Verdict::Undecided => EXIT_UNDECIDED,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cci",
    version,
    about = "Sequential chance-constrained certification of generator risk"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once per process
pub enum Command {
    /// Certify one input against a synthetic or live generator.
    Certify(CertifyArgs),
    /// Run a Monte Carlo experiment from a config file.
    Simulate(SimulateArgs),
    /// Re-summarize a records file.
    Report(ReportArgs),
    /// Samples needed to separate a given feasibility gap.
    Plan(PlanArgs),
}

#[derive(Debug, Args, Default)]
pub struct CertifyArgs {
    /// TOML or JSON file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub n_max: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Violation probability of a synthetic Bernoulli generator.
    #[arg(long)]
    pub synthetic_r: Option<f64>,
    /// Comma-separated per-constraint probabilities for a synthetic
    /// multi-constraint generator.
    #[arg(long, value_delimiter = ',')]
    pub synthetic_probs: Option<Vec<f64>>,
    /// Constraint spec file: weights, severity_threshold, optional levels and
    /// optional verifier.
    #[arg(long)]
    pub constraint_spec: Option<PathBuf>,
    #[arg(long)]
    pub endpoint_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub backoff_ms: Option<u64>,
    /// Name of the environment variable holding the bearer token.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub prompt: Option<String>,
    /// Acceptable answer; repeat for several.
    #[arg(long = "reference")]
    pub references: Vec<String>,
    #[arg(long, value_enum)]
    pub match_mode: Option<CliMatchMode>,
    #[arg(long)]
    pub questions: Option<PathBuf>,
    #[arg(long)]
    pub question_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CliMatchMode {
    Exact,
    Contains,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for records and summaries.
    #[arg(long, default_value = "cci-run")]
    pub out: PathBuf,
    /// Continue an interrupted run in the same output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Also write the summary CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gap: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

/// File form of [`CertifyArgs`]; flags win over file values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyFile {
    epsilon: Option<f64>,
    delta: Option<f64>,
    n_max: Option<u64>,
    seed: Option<u64>,
    synthetic_r: Option<f64>,
    synthetic_probs: Option<Vec<f64>>,
    constraint_spec: Option<PathBuf>,
    endpoint_url: Option<String>,
    model: Option<String>,
    temperature: Option<f64>,
    timeout_ms: Option<u64>,
    retries: Option<u32>,
    max_tokens: Option<u32>,
    backoff_ms: Option<u64>,
    api_key_env: Option<String>,
    prompt: Option<String>,
    references: Option<Vec<String>>,
    match_mode: Option<CliMatchMode>,
    questions: Option<PathBuf>,
    question_id: Option<String>,
}

fn read_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl CertifyArgs {
    fn merge_file(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let f: CertifyFile = read_structured(&path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        macro_rules! fill {
            ($($field:ident),*) => { $( if self.$field.is_none() { self.$field = f.$field; } )* };
        }
        fill!(
            epsilon,
            delta,
            n_max,
            seed,
            synthetic_r,
            synthetic_probs,
            endpoint_url,
            model,
            temperature,
            timeout_ms,
            retries,
            max_tokens,
            backoff_ms,
            api_key_env,
            prompt,
            match_mode,
            question_id
        );
        if self.constraint_spec.is_none() {
            self.constraint_spec = f.constraint_spec.map(rel);
        }
        if self.questions.is_none() {
            self.questions = f.questions.map(rel);
        }
        if self.references.is_empty() {
            self.references = f.references.unwrap_or_default();
        }
        Ok(self)
    }
}

fn flag_error(flag: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("invalid --{flag}: {reason}"))
}

/// Constraint spec file: a [`ConstraintSpec`] plus an optional verifier.
#[derive(Debug, Deserialize)]
struct ConstraintFile {
    #[serde(flatten)]
    spec: ConstraintSpec,
    #[serde(default)]
    verifier: Option<VerifierSpec>,
}

struct Prepared {
    config: CertifyConfig,
    source: Box<dyn SampleSource>,
    constraints: Option<ConstraintSpec>,
}

fn prepare(args: CertifyArgs) -> Result<Prepared> {
    let args = args.merge_file()?;
    let epsilon = args.epsilon.ok_or_else(|| flag_error("epsilon", "is required"))?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(flag_error("epsilon", format!("must lie in [0, 1], got {epsilon}")));
    }
    let delta = args.delta.unwrap_or(0.05);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(flag_error(
            "delta",
            format!("must lie strictly inside (0, 1), got {delta}"),
        ));
    }
    let n_max = args.n_max.unwrap_or(40);
    if n_max == 0 {
        return Err(flag_error("n-max", "must be at least 1"));
    }
    let config = CertifyConfig::new(epsilon, delta, n_max)?;
    let seed = args.seed.unwrap_or(0);

    let constraint_file: Option<ConstraintFile> = match &args.constraint_spec {
        Some(p) => {
            let f: ConstraintFile = read_structured(p)?;
            f.spec.validate().map_err(|e| flag_error("constraint-spec", e))?;
            Some(f)
        }
        None => None,
    };

    let live = args.endpoint_url.is_some();
    let synthetic = args.synthetic_r.is_some() || args.synthetic_probs.is_some();
    if live && synthetic {
        return Err(Error::Config(
            "choose either a synthetic generator or --endpoint-url, not both".into(),
        ));
    }
    let (source, k): (Box<dyn SampleSource>, usize) = if let Some(r) = args.synthetic_r {
        if args.synthetic_probs.is_some() {
            return Err(Error::Config(
                "--synthetic-r and --synthetic-probs are mutually exclusive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(flag_error("synthetic-r", format!("must lie in [0, 1], got {r}")));
        }
        (Box::new(SyntheticSource::new(SyntheticSpec::bernoulli(r, seed))?), 1)
    } else if let Some(probs) = args.synthetic_probs {
        let k = probs.len();
        let src = SyntheticVectorSource::new(probs, seed).map_err(|e| flag_error("synthetic-probs", e))?;
        (Box::new(src), k)
    } else if let Some(url) = args.endpoint_url {
        let model = args
            .model
            .ok_or_else(|| flag_error("model", "is required with --endpoint-url"))?;
        let temperature = args.temperature.unwrap_or(0.7);
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(flag_error("temperature", format!("must be > 0, got {temperature}")));
        }
        let mut endpoint = EndpointConfig::new(url, model, temperature);
        if let Some(v) = args.timeout_ms {
            endpoint.timeout_ms = v;
        }
        if let Some(v) = args.retries {
            endpoint.retries = v;
        }
        if let Some(v) = args.max_tokens {
            endpoint.max_tokens = v;
        }
        if let Some(v) = args.backoff_ms {
            endpoint.backoff_base_ms = v;
        }
        if let Some(v) = args.api_key_env {
            endpoint.api_key_env = v;
        }
        let (prompt, references) = match (&args.question_id, &args.prompt) {
            (Some(id), _) => {
                let path = args
                    .questions
                    .clone()
                    .ok_or_else(|| flag_error("questions", "is required with --question-id"))?;
                let q = load_questions(&path)?
                    .into_iter()
                    .find(|q| q.id == *id)
                    .ok_or_else(|| flag_error("question-id", format!("{id} not found in {}", path.display())))?;
                (q.question, q.references)
            }
            (None, Some(p)) => (p.clone(), args.references.clone()),
            (None, None) => {
                return Err(flag_error(
                    "prompt",
                    "live certification needs --prompt or --question-id",
                ))
            }
        };
        let verifier = match constraint_file.as_ref().and_then(|f| f.verifier.clone()) {
            Some(v) => v,
            None => {
                if references.is_empty() {
                    return Err(flag_error("reference", "at least one reference answer is required"));
                }
                match args.match_mode.unwrap_or(CliMatchMode::Contains) {
                    CliMatchMode::Exact => MatchMode::ExactMatch,
                    CliMatchMode::Contains => MatchMode::Contains,
                }
                .verifier(&references)
            }
        };
        let k = verifier.constraint_count();
        let client = ChatClient::new(endpoint)?;
        (Box::new(LlmSource::new(client, prompt, verifier.compile()?)), k)
    } else {
        return Err(Error::Config(
            "no generator: pass --synthetic-r, --synthetic-probs or --endpoint-url".into(),
        ));
    };

    let constraints = constraint_file.map(|f| f.spec);
    if let Some(spec) = &constraints {
        if spec.k() != k {
            return Err(flag_error(
                "constraint-spec",
                format!("has {} weights but the generator reports {k} constraints", spec.k()),
            ));
        }
    }
    Ok(Prepared {
        config,
        source,
        constraints,
    })
}

fn print_decision(out: &mut dyn Write, label: Option<&str>, d: &Decision) -> Result<()> {
    let prefix = label.map(|l| format!("[{l}] ")).unwrap_or_default();
    let interval = d.final_state.interval()?;
    writeln!(out, "{prefix}verdict: {}", d.verdict)?;
    writeln!(out, "{prefix}samples: {}", d.stopping_time)?;
    writeln!(out, "{prefix}violations: {}", d.final_state.violations())?;
    writeln!(out, "{prefix}empirical_rate: {:.6}", d.final_state.empirical_rate()?)?;
    writeln!(
        out,
        "{prefix}interval: [{:.6}, {:.6}] (radius {:.6})",
        interval.lower, interval.upper, interval.raw_radius
    )?;
    Ok(())
}

fn cmd_certify(args: CertifyArgs, out: &mut dyn Write) -> Result<i32> {
    let Prepared {
        config,
        mut source,
        constraints,
        ..
    } = prepare(args)?;

    if let Some(spec) = constraints.as_ref().filter(|s| s.levels.is_some()) {
        let n_levels = spec.levels.as_ref().map_or(0, Vec::len);
        let configs = vec![config; n_levels];
        let decisions = certify_hierarchy(&mut source, spec, &configs)?;
        let mut overall = Verdict::Feasible;
        for (j, d) in decisions.iter().enumerate() {
            let label = format!("level {}", j + 1);
            match d {
                Some(d) => {
                    print_decision(out, Some(&label), d)?;
                    if overall == Verdict::Feasible {
                        overall = d.verdict;
                    }
                }
                None => writeln!(out, "[{label}] verdict: Skipped")?,
            }
        }
        writeln!(out, "verdict: {overall}")?;
        if overall == Verdict::Feasible {
            let response = source.next_sample()?;
            writeln!(out, "response: {}", response.payload)?;
        }
        return Ok(exit_code(overall));
    }

    let decision = match &constraints {
        Some(spec) => certify_and_respond_with(&mut source, &config, |s: &GeneratorSample| {
            severity_event(&s.violation, spec).map(|e| e == 1).unwrap_or(true)
        })?,
        None => certify_and_respond_with(&mut source, &config, GeneratorSample::violated)?,
    };
    print_decision(out, None, &decision)?;
    if let Some(sample) = &decision.returned_sample {
        writeln!(out, "response: {}", sample.payload)?;
    }
    Ok(exit_code(decision.verdict))
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let config = ExperimentConfig::from_path(&args.config)?;
    let options = RunOptions {
        workers: args.workers,
        out_dir: Some(args.out.clone()),
        resume: args.resume,
    };
    let result = harness::run(&config, &options)?;
    write!(out, "{}", result.summary)?;
    writeln!(
        out,
        "\n{} trials ({} resumed); records and summary written to {}",
        result.records.len(),
        result.resumed,
        args.out.display()
    )?;
    Ok(0)
}

fn cmd_report(args: ReportArgs, out: &mut dyn Write) -> Result<i32> {
    let summary = harness::report(&args.records)?;
    write!(out, "{summary}")?;
    if let Some(csv) = &args.csv {
        summary.write_csv(csv)?;
    }
    Ok(0)
}

fn cmd_plan(args: PlanArgs, out: &mut dyn Write) -> Result<i32> {
    if args.gap == 0.0 {
        return Err(flag_error("gap", "no finite horizon for a zero gap"));
    }
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(flag_error(
            "delta",
            format!("must lie strictly inside (0, 1), got {}", args.delta),
        ));
    }
    writeln!(out, "{}", plan_samples(args.gap, args.delta)?)?;
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let rendered = e.render();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Certify(a) => cmd_certify(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Plan(a) => cmd_plan(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

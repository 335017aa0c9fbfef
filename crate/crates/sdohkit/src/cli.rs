//! The pipeline as subcommands behind one executable. Every run writes
//! its outputs atomically into the output directory together with a
//! manifest (command, seed, config snapshot, input digests). Concurrent
//! runs against the same output directory are rejected via a lock file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{ArgAction, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bias;
use crate::classify::{
    classify_remote, import_predictions, undersample_negatives, Backend, Exemplar,
    KeywordLexicon, LabeledSentence, ParseStatus, PredictionRecord, RemoteBackendConfig,
    RemoteClassifier, ResponseCache, SentenceClassifier, SentenceInput,
};
use crate::corpus::{filter_notes, load_notes, split_dataset, FilterPolicy, NoteFormat};
use crate::evalkit::{
    ablation_schedule, discrepancy_table, evaluate_labels, macro_f1, patient_aggregate,
    AblationRow, EvalLabel, Granularity, Metrics, UnitLabels,
};
use crate::report;
use crate::schema::{parse_label_token, project, Annotation, Task, ZCodeMap};
use crate::segment::{segment_note, AbbreviationLexicon, HeaderLexicon};
use crate::synthgen::{
    self, inject_demographics, parse_decisions_csv, record_validation, run_generation_round,
    DemoPair, SyntheticSentence,
};

/// Seed used when neither the flag nor the config provides one.
pub const DEFAULT_SEED: u64 = 17;

#[derive(Debug)]
enum CliError {
    /// Bad arguments, unreadable or inconsistent inputs: exit 1.
    Validation(String),
    /// Remote backend or transport failure: exit 2.
    Backend(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Backend(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Backend(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

impl From<crate::classify::ClassifyError> for CliError {
    fn from(e: crate::classify::ClassifyError) -> Self {
        match e {
            crate::classify::ClassifyError::Transport(m) => CliError::Backend(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<crate::synthgen::SynthError> for CliError {
    fn from(e: crate::synthgen::SynthError) -> Self {
        match e {
            crate::synthgen::SynthError::Backend(m) => CliError::Backend(m),
            crate::synthgen::SynthError::Classify(c) => c.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run: RunSection,
    pub paths: PathsSection,
    pub filter: FilterSection,
    pub remote: Option<RemoteSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub zcodes: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSection {
    pub min_tokens: usize,
    pub max_section_tokens: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        let policy = FilterPolicy::default();
        FilterSection {
            min_tokens: policy.min_tokens,
            max_section_tokens: policy.max_section_tokens,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteSection {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    pub timeout_ms: u64,
    pub backoff_ms: u64,
    pub api_key_env: String,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RemoteSection {
    fn default() -> Self {
        RemoteSection {
            base_url: String::new(),
            model_name: String::new(),
            temperature: 0.0,
            max_retries: 3,
            max_concurrency: 4,
            timeout_ms: 30_000,
            backoff_ms: 250,
            api_key_env: "SDOHKIT_API_KEY".to_string(),
            cache_dir: None,
        }
    }
}

impl RemoteSection {
    fn to_backend_config(&self) -> Result<RemoteBackendConfig, CliError> {
        if self.base_url.is_empty() || self.model_name.is_empty() {
            return Err(CliError::Validation(
                "remote backend requires base_url and model_name in the [remote] config section"
                    .to_string(),
            ));
        }
        let mut config = RemoteBackendConfig::new(self.base_url.clone(), self.model_name.clone());
        config.temperature = self.temperature;
        config.max_retries = self.max_retries;
        config.max_concurrency = self.max_concurrency;
        config.timeout = Duration::from_millis(self.timeout_ms);
        config.backoff = Duration::from_millis(self.backoff_ms);
        config.api_key_env = self.api_key_env.clone();
        config.validate().map_err(CliError::Validation)?;
        Ok(config)
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let raw = std::fs::read_to_string(p).map_err(|e| {
                CliError::Validation(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&raw)
                .map_err(|e| CliError::Validation(format!("bad config {}: {e}", p.display())))
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sdohkit",
    version,
    about = "SDoH extraction pipeline: filter, segment, classify, generate, evaluate",
    after_help = "CSV columns:\n  \
        rejections.csv          note_id,reason\n  \
        split.csv               patient_id,split\n  \
        metrics.csv             task,model,label,precision,recall,f1\n  \
        confusion.csv           task,model,label,granularity,tp,fp,fn,tn\n  \
        discrepancies.csv       task,ground_truth,model_prediction,count\n  \
        agreement.csv           task,label,alpha,kappa\n  \
        ablation.csv            task,percent_removed,variant,macro_f1,<7 class columns>\n  \
        bias_report.csv         group,task,model,mismatches,pairs,rate,test,statistic,p,significant\n  \
        zcodes.csv (input)      patient_id,code,date\n  \
        decisions.csv (input)   id,decision,corrected_labels"
)]
struct Cli {
    /// TOML config file ([run], [paths], [filter], [remote] sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a note collection, reporting malformed records.
    Ingest {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sectionize notes and split them into sentences.
    Segment {
        #[arg(long)]
        notes: PathBuf,
        /// Header lexicon CSV (alias,canonical) overriding the shipped one.
        #[arg(long)]
        header_lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the note inclusion rules.
    Filter {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        max_section_tokens: Option<usize>,
        #[arg(long)]
        header_lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign patients to train/dev/test splits.
    Split {
        #[arg(long)]
        notes: PathBuf,
        /// Comma-separated ratios, e.g. 0.6,0.2,0.2
        #[arg(long, default_value = "0.6,0.2,0.2")]
        ratios: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export task-projected training data with negative undersampling.
    ExportTrain {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Negatives kept per positive.
        #[arg(long, default_value_t = 3.0)]
        ratio: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce sentence predictions with one of the backends.
    Classify {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long, value_enum)]
        backend: BackendArg,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// predictions.jsonl to import (backend = import).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Exemplars JSONL ({"text", "labels"}) enabling few-shot prompts.
        #[arg(long)]
        exemplars: Option<PathBuf>,
        /// Add the NO_SDOH token to the remote label list (corpus runs).
        #[arg(long, action = ArgAction::Set, default_value_t = true)]
        include_negative: bool,
        /// Response cache directory (replayable offline runs).
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic SDoH sentences (two-round protocol).
    GenerateSynthetic {
        #[arg(long, default_value_t = 1)]
        round: u8,
        /// Sentences to keep per (category, adverse) target.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Round-1 synthetic.jsonl (required for round 2).
        #[arg(long)]
        round1: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite synthetic sentences with injected demographic descriptors.
    InjectDemographics {
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long, default_value_t = 10)]
        batch_size: usize,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply reviewer decisions to a synthetic dataset.
    ValidateSynthetic {
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold labels.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build ablation training exports and the report grid.
    Ablate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "10,25,40,50,70,75,90,100")]
        percents: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Synthetic pool to append for the augmented variants.
        #[arg(long)]
        synthetic: Option<PathBuf>,
        /// Labeled test set; the keyword baseline fills the report rows.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "any")]
        task: TaskArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify demographic-injected pairs and test mismatch rates.
    BiasEval {
        #[arg(long)]
        pairs: PathBuf,
        /// synthetic.jsonl holding the original sentences.
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long, value_enum)]
        backend: BackendArg,
        /// Optional second backend for the A-vs-B significance tests.
        #[arg(long, value_enum)]
        compare_backend: Option<BackendArg>,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Patient-level evaluation against gold labels and mapped Z-codes.
    PatientEval {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        zcodes: PathBuf,
        #[arg(long, value_enum, default_value = "adverse")]
        task: TaskArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render Markdown summaries and charts from result CSVs.
    Report {
        /// Directory containing metrics.csv / ablation.csv / bias_report.csv.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Materialize the shipped 50-note synthetic demo corpus.
    Demo {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum TaskArg {
    Any,
    Adverse,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Any => Task::Any,
            TaskArg::Adverse => Task::Adverse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum BackendArg {
    Lexicon,
    Remote,
    Import,
}

impl Command {
    fn out_dir(&self) -> &Path {
        match self {
            Command::Ingest { out, .. }
            | Command::Segment { out, .. }
            | Command::Filter { out, .. }
            | Command::Split { out, .. }
            | Command::ExportTrain { out, .. }
            | Command::Classify { out, .. }
            | Command::GenerateSynthetic { out, .. }
            | Command::InjectDemographics { out, .. }
            | Command::ValidateSynthetic { out, .. }
            | Command::Evaluate { out, .. }
            | Command::Ablate { out, .. }
            | Command::BiasEval { out, .. }
            | Command::PatientEval { out, .. }
            | Command::Report { out, .. }
            | Command::Demo { out, .. } => out,
        }
    }
}

struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn acquire_lock(dir: &Path) -> Result<LockGuard, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(".sdohkit.lock");
    match std::fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)
    {
        Ok(_) => Ok(LockGuard { path }),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Validation(
            format!(
                "output directory {} is locked by a concurrent run (remove {} if stale)",
                dir.display(),
                path.display()
            ),
        )),
        Err(e) => Err(CliError::Validation(format!(
            "cannot lock {}: {e}",
            dir.display()
        ))),
    }
}

/// What a subcommand touched, for the manifest.
#[derive(Default)]
struct RunTrace {
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    seed: Option<u64>,
}

impl RunTrace {
    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    fn write(&mut self, dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
        report::write_atomic(&dir.join(name), content)
            .map_err(|e| CliError::Validation(format!("cannot write {name}: {e}")))?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

fn sha256_file(path: &Path) -> Option<String> {
    let bytes = std::fs::read(path).ok()?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Some(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn write_manifest(
    dir: &Path,
    argv: &[String],
    config_path: Option<&Path>,
    config: &RunConfig,
    trace: &RunTrace,
) -> Result<(), CliError> {
    let mut inputs = serde_json::Map::new();
    for path in &trace.inputs {
        let digest = sha256_file(path).unwrap_or_else(|| "unreadable".to_string());
        inputs.insert(path.display().to_string(), serde_json::Value::String(digest));
    }
    let manifest = serde_json::json!({
        "tool": "sdohkit",
        "version": env!("CARGO_PKG_VERSION"),
        "command": argv,
        "seed": trace.seed,
        "config_path": config_path.map(|p| p.display().to_string()),
        "config": config,
        "inputs": inputs,
        "outputs": trace.outputs,
    });
    let pretty = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    report::write_atomic(&dir.join("manifest.json"), &pretty)
        .map_err(|e| CliError::Validation(format!("cannot write manifest: {e}")))
}

/// Entry point: parse argv (without the program name), run, and return
/// the exit code. 0 = success, 1 = validation error, 2 = backend failure.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let argv: Vec<String> = argv.into_iter().collect();
    let mut full = vec!["sdohkit".to_string()];
    full.extend(argv.iter().cloned());
    let cli = match Cli::try_parse_from(&full) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };

    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };

    let out_dir = cli.command.out_dir().to_path_buf();
    let _lock = match acquire_lock(&out_dir) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };

    let mut trace = RunTrace::default();
    match execute(&cli.command, &config, &mut trace) {
        Ok(()) => {
            if let Err(e) = write_manifest(&out_dir, &argv, cli.config.as_deref(), &config, &trace)
            {
                eprintln!("error: {}", e.message());
                return e.exit_code();
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> u64 {
    flag.or(config.run.seed).unwrap_or(DEFAULT_SEED)
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let raw = read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        out.push(item);
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

/// One line of sentences.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceLine {
    pub note_id: String,
    pub sentence_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_name: Option<String>,
    pub text: String,
}

impl SentenceLine {
    pub fn sentence_id(&self) -> String {
        format!("{}:{}", self.note_id, self.sentence_index)
    }
}

/// One line of predictions.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionLine {
    pub sentence_id: String,
    pub task: Task,
    pub labels: Vec<String>,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_status: Option<ParseStatus>,
}

impl PredictionLine {
    fn from_record(r: &PredictionRecord) -> Self {
        PredictionLine {
            sentence_id: r.sentence_id.clone(),
            task: r.task,
            labels: r
                .labels
                .iter()
                .map(|c| c.canonical_name().to_string())
                .collect(),
            model_id: r.model_id.clone(),
            parse_status: Some(r.parse_status),
        }
    }
}

fn load_header_lexicon(
    path: Option<&Path>,
    trace: &mut RunTrace,
) -> Result<HeaderLexicon, CliError> {
    match path {
        None => Ok(HeaderLexicon::shipped()),
        Some(p) => {
            trace.input(p);
            HeaderLexicon::from_csv(&read_to_string(p)?).map_err(validation)
        }
    }
}

fn load_gold_labels(path: &Path, task: Task) -> Result<UnitLabels, CliError> {
    let annotations: Vec<Annotation> = read_jsonl(path)?;
    Ok(annotations
        .iter()
        .map(|a| (a.sentence_id.clone(), project(a, task).labels))
        .collect())
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionLine>, CliError> {
    read_jsonl(path)
}

fn predictions_to_labels(lines: &[PredictionLine]) -> Result<UnitLabels, CliError> {
    let mut out = UnitLabels::new();
    for line in lines {
        let mut set = BTreeSet::new();
        for token in &line.labels {
            set.insert(parse_label_token(token).map_err(validation)?);
        }
        out.insert(line.sentence_id.clone(), set);
    }
    Ok(out)
}

fn open_cache(path: Option<&Path>, config: &RunConfig) -> Result<Option<ResponseCache>, CliError> {
    let dir = path
        .map(Path::to_path_buf)
        .or_else(|| config.remote.as_ref().and_then(|r| r.cache_dir.clone()));
    match dir {
        None => Ok(None),
        Some(d) => Ok(Some(ResponseCache::open(&d).map_err(validation)?)),
    }
}

fn execute(command: &Command, config: &RunConfig, trace: &mut RunTrace) -> Result<(), CliError> {
    match command {
        Command::Ingest { notes, format, out } => {
            trace.input(notes);
            let format = match format {
                FormatArg::Jsonl => NoteFormat::Jsonl,
                FormatArg::Csv => NoteFormat::Csv,
            };
            let loaded = load_notes(notes, format).map_err(validation)?;
            let all: Vec<_> = loaded.notes.iter().cloned().collect();
            trace.write(out, "notes_valid.jsonl", &to_jsonl(&all))?;
            let mut diag = String::from("line,message\n");
            for d in &loaded.diagnostics {
                diag.push_str(&format!("{},{:?}\n", d.line, d.message));
            }
            trace.write(out, "load_diagnostics.csv", &diag)?;
            println!(
                "ingest: {} notes valid, {} rejected",
                loaded.notes.len(),
                loaded.diagnostics.len()
            );
            Ok(())
        }

        Command::Segment {
            notes,
            header_lexicon,
            out,
        } => {
            trace.input(notes);
            let loaded = load_notes(notes, NoteFormat::Jsonl).map_err(validation)?;
            let lexicon = load_header_lexicon(header_lexicon.as_deref(), trace)?;
            let abbrevs = AbbreviationLexicon::shipped();
            let mut lines = Vec::new();
            for note in loaded.notes.iter() {
                let (_, spans) = segment_note(&note.text, &lexicon, &abbrevs);
                for span in spans {
                    lines.push(SentenceLine {
                        note_id: note.note_id.clone(),
                        sentence_index: span.sentence_index,
                        char_start: span.char_start,
                        char_end: span.char_end,
                        section_name: span.section_name,
                        text: span.text,
                    });
                }
            }
            trace.write(out, "sentences.jsonl", &to_jsonl(&lines))?;
            println!(
                "segment: {} sentences from {} notes",
                lines.len(),
                loaded.notes.len()
            );
            Ok(())
        }

        Command::Filter {
            notes,
            min_tokens,
            max_section_tokens,
            header_lexicon,
            out,
        } => {
            trace.input(notes);
            let loaded = load_notes(notes, NoteFormat::Jsonl).map_err(validation)?;
            let lexicon = load_header_lexicon(header_lexicon.as_deref(), trace)?;
            let policy = FilterPolicy {
                min_tokens: min_tokens.unwrap_or(config.filter.min_tokens),
                max_section_tokens: max_section_tokens.unwrap_or(config.filter.max_section_tokens),
                ..FilterPolicy::default()
            };
            policy.validate().map_err(CliError::Validation)?;
            let sections: BTreeMap<String, Vec<crate::segment::Section>> = loaded
                .notes
                .iter()
                .map(|n| {
                    (
                        n.note_id.clone(),
                        crate::segment::sectionize(&n.text, &lexicon),
                    )
                })
                .collect();
            let (kept, rejected) =
                filter_notes(&loaded.notes, &policy, &sections).map_err(validation)?;
            let kept_vec: Vec<_> = kept.iter().cloned().collect();
            trace.write(out, "kept.jsonl", &to_jsonl(&kept_vec))?;
            let mut rej = String::from("note_id,reason\n");
            for (id, reason) in &rejected {
                rej.push_str(&format!("{id},{reason}\n"));
            }
            trace.write(out, "rejections.csv", &rej)?;
            println!("filter: kept {}, rejected {}", kept.len(), rejected.len());
            Ok(())
        }

        Command::Split {
            notes,
            ratios,
            seed,
            out,
        } => {
            trace.input(notes);
            let loaded = load_notes(notes, NoteFormat::Jsonl).map_err(validation)?;
            let parts: Vec<f64> = ratios
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Validation(format!("bad --ratios: {e}")))?;
            if parts.len() != 3 {
                return Err(CliError::Validation(
                    "--ratios needs three values".to_string(),
                ));
            }
            let seed = resolve_seed(*seed, config);
            trace.seed = Some(seed);
            let assignment = split_dataset(&loaded.notes, [parts[0], parts[1], parts[2]], seed)
                .map_err(validation)?;
            let mut csv = String::from("patient_id,split\n");
            for (patient, split) in &assignment.by_patient {
                csv.push_str(&format!("{patient},{split}\n"));
            }
            trace.write(out, "split.csv", &csv)?;
            let counts = assignment.counts();
            println!(
                "split: train {}, dev {}, test {}",
                counts[&crate::corpus::Split::Train],
                counts[&crate::corpus::Split::Dev],
                counts[&crate::corpus::Split::Test]
            );
            Ok(())
        }

        Command::ExportTrain {
            sentences,
            annotations,
            task,
            ratio,
            seed,
            out,
        } => {
            trace.input(sentences);
            trace.input(annotations);
            let task: Task = (*task).into();
            let lines: Vec<SentenceLine> = read_jsonl(sentences)?;
            let gold = load_gold_labels(annotations, task)?;
            let labeled: Vec<LabeledSentence> = lines
                .iter()
                .map(|l| {
                    let id = l.sentence_id();
                    let labels = gold.get(&id).cloned().unwrap_or_default();
                    LabeledSentence {
                        id,
                        text: l.text.clone(),
                        labels,
                    }
                })
                .collect();
            let seed = resolve_seed(*seed, config);
            trace.seed = Some(seed);
            let sampled = undersample_negatives(&labeled, *ratio, seed)?;
            trace.write(out, "train.jsonl", &to_jsonl(&sampled))?;
            let positives = sampled.iter().filter(|s| !s.labels.is_empty()).count();
            println!(
                "export-train: {} sentences ({} positive, {} negative)",
                sampled.len(),
                positives,
                sampled.len() - positives
            );
            Ok(())
        }

        Command::Classify {
            sentences,
            backend,
            task,
            predictions,
            exemplars,
            include_negative,
            cache,
            out,
        } => {
            trace.input(sentences);
            let task: Task = (*task).into();
            let lines: Vec<SentenceLine> = read_jsonl(sentences)?;
            let inputs: Vec<SentenceInput> = lines
                .iter()
                .map(|l| SentenceInput {
                    id: l.sentence_id(),
                    text: l.text.clone(),
                })
                .collect();

            let records: Vec<PredictionRecord> = match backend {
                BackendArg::Lexicon => KeywordLexicon::shipped().classify_batch(&inputs, task),
                BackendArg::Remote => {
                    let remote = config
                        .remote
                        .as_ref()
                        .ok_or_else(|| {
                            CliError::Validation("[remote] config section required".to_string())
                        })?
                        .to_backend_config()?;
                    let cache = open_cache(cache.as_deref(), config)?;
                    let exemplars: Option<Vec<Exemplar>> = match exemplars {
                        None => None,
                        Some(p) => {
                            trace.input(p);
                            Some(read_jsonl(p)?)
                        }
                    };
                    classify_remote(
                        &remote,
                        &inputs,
                        &crate::schema::Category::ALL,
                        exemplars.as_deref(),
                        task,
                        *include_negative,
                        cache.as_ref(),
                    )?
                }
                BackendArg::Import => {
                    let path = predictions.as_ref().ok_or_else(|| {
                        CliError::Validation("--predictions required for import".to_string())
                    })?;
                    trace.input(path);
                    let known: BTreeSet<String> = lines.iter().map(|l| l.sentence_id()).collect();
                    let (records, diagnostics) = import_predictions(path, &known)?;
                    let mut diag = String::from("line,message\n");
                    for d in &diagnostics {
                        diag.push_str(&format!("{},{:?}\n", d.line, d.message));
                    }
                    trace.write(out, "import_diagnostics.csv", &diag)?;
                    records
                }
            };

            let pred_lines: Vec<PredictionLine> =
                records.iter().map(PredictionLine::from_record).collect();
            trace.write(out, "predictions.jsonl", &to_jsonl(&pred_lines))?;
            if records.iter().any(|r| r.backend == Backend::Remote) {
                #[derive(Serialize)]
                struct ResponseLine<'a> {
                    sentence_id: &'a str,
                    raw_response: Option<&'a str>,
                    retries: u32,
                    error: Option<&'a str>,
                }
                let responses: Vec<ResponseLine> = records
                    .iter()
                    .map(|r| ResponseLine {
                        sentence_id: &r.sentence_id,
                        raw_response: r.raw_response.as_deref(),
                        retries: r.retries,
                        error: r.error.as_deref(),
                    })
                    .collect();
                trace.write(out, "responses.jsonl", &to_jsonl(&responses))?;
            }
            let failed = records
                .iter()
                .filter(|r| r.parse_status == ParseStatus::Failed)
                .count();
            println!(
                "classify: {} predictions ({} failed parses)",
                records.len(),
                failed
            );
            Ok(())
        }

        Command::GenerateSynthetic {
            round,
            n,
            round1,
            seed,
            cache,
            out,
        } => {
            let remote = config
                .remote
                .as_ref()
                .ok_or_else(|| {
                    CliError::Validation("[remote] config section required".to_string())
                })?
                .to_backend_config()?;
            let cache = open_cache(cache.as_deref(), config)?;
            let seed = resolve_seed(*seed, config);
            trace.seed = Some(seed);
            let round_one: Option<Vec<SyntheticSentence>> = match round1 {
                None => None,
                Some(p) => {
                    trace.input(p);
                    Some(read_jsonl(p)?)
                }
            };
            if *round >= 2 && round_one.is_none() {
                return Err(CliError::Validation(
                    "--round1 synthetic.jsonl required for round 2".to_string(),
                ));
            }
            let targets = synthgen::shipped_generation_targets();
            let sentences = run_generation_round(
                &remote,
                &targets,
                *n,
                *round,
                round_one.as_deref(),
                5,
                seed,
                cache.as_ref(),
            )?;
            trace.write(out, "synthetic.jsonl", &to_jsonl(&sentences))?;
            println!("generate-synthetic: {} sentences", sentences.len());
            Ok(())
        }

        Command::InjectDemographics {
            synthetic,
            batch_size,
            cache,
            out,
        } => {
            trace.input(synthetic);
            let remote = config
                .remote
                .as_ref()
                .ok_or_else(|| {
                    CliError::Validation("[remote] config section required".to_string())
                })?
                .to_backend_config()?;
            let cache = open_cache(cache.as_deref(), config)?;
            let sentences: Vec<SyntheticSentence> = read_jsonl(synthetic)?;
            let (pairs, diagnostics) =
                inject_demographics(&remote, &sentences, *batch_size, cache.as_ref())?;
            trace.write(out, "demo_pairs.jsonl", &to_jsonl(&pairs))?;
            let mut diag = String::from("batch_index,message\n");
            for d in &diagnostics {
                diag.push_str(&format!("{},{:?}\n", d.batch_index, d.message));
            }
            trace.write(out, "injection_diagnostics.csv", &diag)?;
            println!(
                "inject-demographics: {} pairs, {} diagnostics",
                pairs.len(),
                diagnostics.len()
            );
            Ok(())
        }

        Command::ValidateSynthetic {
            synthetic,
            decisions,
            out,
        } => {
            trace.input(synthetic);
            trace.input(decisions);
            let mut sentences: Vec<SyntheticSentence> = read_jsonl(synthetic)?;
            let decisions = parse_decisions_csv(&read_to_string(decisions)?)?;
            let report = record_validation(&mut sentences, &decisions)?;
            trace.write(out, "synthetic.jsonl", &to_jsonl(&sentences))?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            trace.write(out, "validation_report.json", &json)?;
            println!(
                "validate-synthetic: {} confirmed, {} corrected, {} discarded ({} any / {} adverse retained)",
                report.confirmed,
                report.corrected,
                report.discarded,
                report.any_task_count,
                report.adverse_task_count
            );
            Ok(())
        }

        Command::Evaluate {
            gold,
            pred,
            task,
            out,
        } => {
            trace.input(gold);
            trace.input(pred);
            let task: Task = (*task).into();
            let gold_labels = load_gold_labels(gold, task)?;
            let pred_lines = load_predictions(pred)?;
            let model_id = pred_lines
                .first()
                .map(|l| l.model_id.clone())
                .unwrap_or_else(|| "unknown".to_string());
            let pred_labels = predictions_to_labels(&pred_lines)?;

            let aligned_gold = align_gold(&gold_labels, &pred_labels)?;
            write_evaluation(task, &model_id, &aligned_gold, &pred_labels, out, trace, "")?;

            // Strict variant: drop sentences whose prediction was salvaged.
            let salvaged: BTreeSet<String> = pred_lines
                .iter()
                .filter(|l| l.parse_status == Some(ParseStatus::Salvaged))
                .map(|l| l.sentence_id.clone())
                .collect();
            if !salvaged.is_empty() {
                let strict_preds: UnitLabels = pred_labels
                    .iter()
                    .filter(|(id, _)| !salvaged.contains(*id))
                    .map(|(id, l)| (id.clone(), l.clone()))
                    .collect();
                let strict_gold = align_gold(&aligned_gold, &strict_preds)?;
                write_evaluation(
                    task,
                    &model_id,
                    &strict_gold,
                    &strict_preds,
                    out,
                    trace,
                    "_strict",
                )?;
            }
            Ok(())
        }

        Command::Ablate {
            train,
            percents,
            seed,
            synthetic,
            test,
            task,
            out,
        } => {
            trace.input(train);
            let task: Task = (*task).into();
            let train_set: Vec<LabeledSentence> = read_jsonl(train)?;
            let percents: Vec<u8> = percents
                .split(',')
                .map(|s| s.trim().parse::<u8>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Validation(format!("bad --percents: {e}")))?;
            let seed = resolve_seed(*seed, config);
            trace.seed = Some(seed);
            let pool: Option<Vec<LabeledSentence>> = match synthetic {
                None => None,
                Some(p) => {
                    trace.input(p);
                    Some(read_jsonl(p)?)
                }
            };
            let exports = ablation_schedule(&train_set, &percents, seed, pool.as_deref())
                .map_err(validation)?;

            let test_set: Option<Vec<LabeledSentence>> = match test {
                None => None,
                Some(p) => {
                    trace.input(p);
                    Some(read_jsonl(p)?)
                }
            };

            let mut rows: Vec<AblationRow> = Vec::new();
            for export in &exports {
                let variant = if export.with_synthetic {
                    "synthetic"
                } else {
                    "gold"
                };
                let name = format!("train_p{:03}_{variant}.jsonl", export.percent_removed);
                trace.write(out, &name, &to_jsonl(&export.sentences))?;

                if let Some(test_set) = &test_set {
                    let row = if export.sentences.is_empty() && !export.with_synthetic {
                        // Empty training set: zero by convention.
                        AblationRow {
                            percent_removed: export.percent_removed,
                            with_synthetic: export.with_synthetic,
                            macro_f1: 0.0,
                            per_label_f1: EvalLabel::REPORT_ORDER
                                .iter()
                                .map(|l| (*l, 0.0))
                                .collect(),
                        }
                    } else {
                        lexicon_ablation_row(
                            export.percent_removed,
                            export.with_synthetic,
                            test_set,
                            task,
                        )
                        .map_err(validation)?
                    };
                    rows.push(row);
                }
            }
            if !rows.is_empty() {
                trace.write(out, "ablation.csv", &report::ablation_csv(task, &rows))?;
                trace.write(out, "ablation.md", &report::ablation_markdown(task, &rows))?;
            }
            println!(
                "ablate: {} exports{}",
                exports.len(),
                if rows.is_empty() {
                    " (no --test set, report skipped)"
                } else {
                    ""
                }
            );
            Ok(())
        }

        Command::BiasEval {
            pairs,
            synthetic,
            backend,
            compare_backend,
            task,
            cache,
            out,
        } => {
            trace.input(pairs);
            trace.input(synthetic);
            let task: Task = (*task).into();
            let pair_list: Vec<DemoPair> = read_jsonl(pairs)?;
            let originals: Vec<SyntheticSentence> = read_jsonl(synthetic)?;
            let cache = open_cache(cache.as_deref(), config)?;

            let run_backend = |arg: &BackendArg| -> Result<
                (String, Vec<bias::PairOutcome>, Vec<(String, String)>),
                CliError,
            > {
                match arg {
                    BackendArg::Lexicon => {
                        let lexicon = KeywordLexicon::shipped();
                        let (o, e) = bias::evaluate_pairs(&pair_list, &originals, &lexicon, task)
                            .map_err(validation)?;
                        Ok((lexicon.model_id(), o, e))
                    }
                    BackendArg::Remote => {
                        let remote = config
                            .remote
                            .as_ref()
                            .ok_or_else(|| {
                                CliError::Validation(
                                    "[remote] config section required".to_string(),
                                )
                            })?
                            .to_backend_config()?;
                        let classifier = RemoteClassifier {
                            config: &remote,
                            labels: crate::schema::Category::ALL.to_vec(),
                            exemplars: None,
                            include_negative: false,
                            cache: cache.as_ref(),
                        };
                        let (o, e) =
                            bias::evaluate_pairs(&pair_list, &originals, &classifier, task)
                                .map_err(validation)?;
                        Ok((classifier.model_id(), o, e))
                    }
                    BackendArg::Import => Err(CliError::Validation(
                        "bias-eval requires a live backend (lexicon or remote)".to_string(),
                    )),
                }
            };

            let (model_a, outcomes_a, excluded_a) = run_backend(backend)?;
            let summary_a =
                bias::summarize_model(&model_a, task, &outcomes_a).map_err(validation)?;

            let mut summaries = vec![summary_a.clone()];
            let mut excluded_all = excluded_a;
            let significance = match compare_backend {
                None => None,
                Some(cb) => {
                    let (model_b, outcomes_b, excluded_b) = run_backend(cb)?;
                    excluded_all.extend(excluded_b);
                    let summary_b =
                        bias::summarize_model(&model_b, task, &outcomes_b).map_err(validation)?;
                    let report = bias::significance_report(&summary_a, &summary_b, 0.05)
                        .map_err(validation)?;
                    summaries.push(summary_b);
                    Some(report)
                }
            };

            let refs: Vec<&bias::ModelBiasSummary> = summaries.iter().collect();
            trace.write(
                out,
                "bias_report.csv",
                &report::bias_report_csv(&refs, significance.as_ref()),
            )?;
            let mut excluded_csv = String::from("pair_id,error\n");
            for (id, err) in &excluded_all {
                excluded_csv.push_str(&format!("{id},{err:?}\n"));
            }
            trace.write(out, "excluded_pairs.csv", &excluded_csv)?;

            // Grouped mismatch-rate chart by race, one series per model.
            let race_groups: Vec<String> = summaries[0]
                .by_race
                .rates
                .iter()
                .map(|r| r.group.clone())
                .collect();
            let series_names: Vec<&str> =
                summaries.iter().map(|s| s.model_id.as_str()).collect();
            let groups: Vec<(String, Vec<f64>)> = race_groups
                .iter()
                .map(|g| {
                    let values = summaries
                        .iter()
                        .map(|s| s.by_race.get(g).map(|r| r.rate).unwrap_or(0.0))
                        .collect();
                    (g.clone(), values)
                })
                .collect();
            trace.write(
                out,
                "bias_chart.svg",
                &report::grouped_bar_chart_svg(
                    &format!("Mismatch rate by race/ethnicity ({task} task)"),
                    &series_names,
                    &groups,
                ),
            )?;
            println!(
                "bias-eval: {} pairs evaluated, {} excluded",
                outcomes_a.len(),
                excluded_all.len()
            );
            Ok(())
        }

        Command::PatientEval {
            notes,
            sentences,
            gold,
            pred,
            zcodes,
            task,
            out,
        } => {
            trace.input(notes);
            trace.input(sentences);
            trace.input(gold);
            trace.input(pred);
            trace.input(zcodes);
            let task: Task = (*task).into();

            let loaded = load_notes(notes, NoteFormat::Jsonl).map_err(validation)?;
            let sentence_lines: Vec<SentenceLine> = read_jsonl(sentences)?;
            let mut sentence_patients: BTreeMap<String, String> = BTreeMap::new();
            for line in &sentence_lines {
                let note = loaded.notes.get(&line.note_id).ok_or_else(|| {
                    CliError::Validation(format!(
                        "sentence references unknown note {}",
                        line.note_id
                    ))
                })?;
                sentence_patients.insert(line.sentence_id(), note.patient_id.clone());
            }

            let gold_sentence = load_gold_labels(gold, task)?;
            let gold_known: UnitLabels = gold_sentence
                .into_iter()
                .filter(|(id, _)| sentence_patients.contains_key(id))
                .collect();
            let pred_lines = load_predictions(pred)?;
            let pred_sentence = predictions_to_labels(&pred_lines)?;

            let gold_patients =
                patient_aggregate(&gold_known, &sentence_patients).map_err(validation)?;
            let model_patients =
                patient_aggregate(&pred_sentence, &sentence_patients).map_err(validation)?;

            let zcodes_raw = read_to_string(zcodes)?;
            let mut patient_zcodes: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for (idx, line) in zcodes_raw.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with("patient_id") {
                    continue;
                }
                let mut parts = line.split(',');
                let (patient, code) = match (parts.next(), parts.next()) {
                    (Some(p), Some(c)) => (p.trim().to_string(), c.trim().to_string()),
                    _ => {
                        return Err(CliError::Validation(format!(
                            "{}:{}: expected patient_id,code,date",
                            zcodes.display(),
                            idx + 1
                        )))
                    }
                };
                patient_zcodes.entry(patient).or_default().push(code);
            }
            // Z-codes for patients outside this corpus are dropped with a
            // note rather than failing the run.
            let known_patients: BTreeSet<&String> = gold_patients.keys().collect();
            let skipped: Vec<String> = patient_zcodes
                .keys()
                .filter(|p| !known_patients.contains(p))
                .cloned()
                .collect();
            patient_zcodes.retain(|p, _| known_patients.contains(p));

            let comparison = crate::evalkit::compare_zcodes(
                &gold_patients,
                &model_patients,
                &patient_zcodes,
                &ZCodeMap::shipped(),
            )
            .map_err(validation)?;

            let mut metrics_rows = String::from("task,source,label,precision,recall,f1\n");
            let mut confusion_rows = String::from("task,source,label,tp,fp,fn,tn\n");
            for (source, eval) in [
                ("model", &comparison.model_vs_gold),
                ("zcode", &comparison.zcode_vs_gold),
            ] {
                let (pc, pm) = &eval.presence;
                confusion_rows.push_str(&format!(
                    "{task},{source},{},{},{},{},{}\n",
                    pc.label.display_name(),
                    pc.true_positives,
                    pc.false_positives,
                    pc.false_negatives,
                    pc.true_negatives
                ));
                metrics_rows.push_str(&format!(
                    "{task},{source},{},{:.4},{:.4},{:.4}\n",
                    pc.label.display_name(),
                    pm.precision,
                    pm.recall,
                    pm.f1
                ));
                for (label, counts, m) in &eval.per_label {
                    confusion_rows.push_str(&format!(
                        "{task},{source},{},{},{},{},{}\n",
                        label.display_name(),
                        counts.true_positives,
                        counts.false_positives,
                        counts.false_negatives,
                        counts.true_negatives
                    ));
                    metrics_rows.push_str(&format!(
                        "{task},{source},{},{:.4},{:.4},{:.4}\n",
                        label.display_name(),
                        m.precision,
                        m.recall,
                        m.f1
                    ));
                }
                metrics_rows.push_str(&format!(
                    "{task},{source},Macro-F1,,,{:.4}\n",
                    eval.macro_f1
                ));
            }
            trace.write(out, "patient_metrics.csv", &metrics_rows)?;
            trace.write(out, "patient_confusion.csv", &confusion_rows)?;
            if !skipped.is_empty() {
                let mut s = String::from("patient_id\n");
                for p in &skipped {
                    s.push_str(p);
                    s.push('\n');
                }
                trace.write(out, "zcodes_skipped_patients.csv", &s)?;
            }
            trace.write(
                out,
                "patient_eval.md",
                &report::patient_eval_markdown(
                    task,
                    &comparison.model_vs_gold,
                    &comparison.zcode_vs_gold,
                ),
            )?;

            let groups: Vec<(String, Vec<f64>)> = comparison
                .model_vs_gold
                .per_label
                .iter()
                .map(|(label, _, m)| {
                    let z = comparison
                        .zcode_vs_gold
                        .per_label
                        .iter()
                        .find(|(l, _, _)| l == label)
                        .map(|(_, _, zm)| zm.f1)
                        .unwrap_or(0.0);
                    (label.display_name().to_string(), vec![m.f1, z])
                })
                .collect();
            trace.write(
                out,
                "patient_chart.svg",
                &report::grouped_bar_chart_svg(
                    &format!("Patient-level F1: model vs Z-codes ({task} task)"),
                    &["model", "zcodes"],
                    &groups,
                ),
            )?;
            println!(
                "patient-eval: model macro-F1 {:.3} vs zcode macro-F1 {:.3} over {} patients",
                comparison.model_vs_gold.macro_f1,
                comparison.zcode_vs_gold.macro_f1,
                gold_patients.len()
            );
            Ok(())
        }

        Command::Report { dir, out } => {
            let mut md = String::from("# Results\n\n");
            let mut wrote_chart = false;

            let metrics_path = dir.join("metrics.csv");
            if metrics_path.exists() {
                trace.input(&metrics_path);
                let (rows, task_model) = parse_metrics_csv(&read_to_string(&metrics_path)?)?;
                if !rows.is_empty() {
                    let keyed: Vec<(EvalLabel, Metrics)> = rows
                        .iter()
                        .filter_map(|(name, m)| label_from_display(name).map(|l| (l, *m)))
                        .collect();
                    let macro_value = macro_f1(&keyed, true).unwrap_or(0.0);
                    md.push_str(&report::metrics_markdown(
                        &format!("Sentence metrics ({task_model})"),
                        &keyed,
                        macro_value,
                    ));
                    md.push('\n');
                    let groups: Vec<(String, Vec<f64>)> = keyed
                        .iter()
                        .map(|(l, m)| (l.display_name().to_string(), vec![m.f1]))
                        .collect();
                    trace.write(
                        out,
                        "metrics_chart.svg",
                        &report::grouped_bar_chart_svg("Per-class F1", &["f1"], &groups),
                    )?;
                    wrote_chart = true;
                }
            }

            let ablation_path = dir.join("ablation.csv");
            if ablation_path.exists() {
                trace.input(&ablation_path);
                let raw = read_to_string(&ablation_path)?;
                md.push_str("## Ablation grid (CSV)\n\n```\n");
                md.push_str(&raw);
                md.push_str("```\n\n");
            }

            let bias_path = dir.join("bias_report.csv");
            if bias_path.exists() {
                trace.input(&bias_path);
                let raw = read_to_string(&bias_path)?;
                md.push_str("## Bias audit\n\n");
                md.push_str("| Group | Model | Mismatches | Pairs | Rate |\n|---|---|---|---|---|\n");
                let mut chart_groups: Vec<(String, Vec<f64>)> = Vec::new();
                for line in raw.lines().skip(1) {
                    let cells: Vec<&str> = line.split(',').collect();
                    if cells.len() >= 6 && !cells[3].is_empty() {
                        md.push_str(&format!(
                            "| {} | {} | {} | {} | {} |\n",
                            cells[0], cells[2], cells[3], cells[4], cells[5]
                        ));
                        if let Ok(rate) = cells[5].parse::<f64>() {
                            chart_groups
                                .push((format!("{} ({})", cells[0], cells[2]), vec![rate]));
                        }
                    }
                }
                md.push('\n');
                if !chart_groups.is_empty() {
                    trace.write(
                        out,
                        "bias_rates_chart.svg",
                        &report::grouped_bar_chart_svg("Mismatch rates", &["rate"], &chart_groups),
                    )?;
                    wrote_chart = true;
                }
            }

            let patient_path = dir.join("patient_eval.md");
            if patient_path.exists() {
                trace.input(&patient_path);
                md.push_str(&read_to_string(&patient_path)?);
                md.push('\n');
            }

            if !wrote_chart {
                // Keep the output shape stable even with nothing to plot.
                trace.write(
                    out,
                    "metrics_chart.svg",
                    &report::grouped_bar_chart_svg("No results", &[], &[]),
                )?;
            }
            trace.write(out, "report.md", &md)?;
            println!("report: wrote report.md");
            Ok(())
        }

        Command::Demo { seed, out } => {
            let seed = resolve_seed(*seed, config);
            trace.seed = Some(seed);
            let manifest = crate::demo::write_demo_corpus(out, seed).map_err(validation)?;
            for name in [
                "notes.jsonl",
                "annotations.jsonl",
                "zcodes.csv",
                "synthetic.jsonl",
                "demo_pairs.jsonl",
            ] {
                trace.outputs.push(name.to_string());
            }
            println!(
                "demo: {} notes, {} sentences ({} gold-positive), {} synthetic, {} pairs",
                manifest.notes,
                manifest.annotated_sentences,
                manifest.gold_positive_sentences,
                manifest.synthetic_sentences,
                manifest.demo_pairs
            );
            Ok(())
        }
    }
}

/// Restrict gold to prediction ids. Predictions without gold are an
/// error; gold without predictions (e.g. filtered notes) is dropped.
fn align_gold(gold: &UnitLabels, preds: &UnitLabels) -> Result<UnitLabels, CliError> {
    let mut out = UnitLabels::new();
    for id in preds.keys() {
        match gold.get(id) {
            Some(labels) => {
                out.insert(id.clone(), labels.clone());
            }
            None => {
                return Err(CliError::Validation(format!(
                    "prediction for {id:?} has no gold annotation"
                )))
            }
        }
    }
    Ok(out)
}

fn write_evaluation(
    task: Task,
    model_id: &str,
    gold: &UnitLabels,
    preds: &UnitLabels,
    out: &Path,
    trace: &mut RunTrace,
    suffix: &str,
) -> Result<(), CliError> {
    let per_label =
        evaluate_labels(gold, preds, Granularity::Sentence, true).map_err(validation)?;
    let keyed: Vec<(EvalLabel, Metrics)> = per_label.iter().map(|(l, _, m)| (*l, *m)).collect();
    let macro_value = macro_f1(&keyed, true).map_err(validation)?;
    let counts: Vec<_> = per_label.iter().map(|(_, c, _)| c.clone()).collect();
    let discrepancies = discrepancy_table(gold, preds).map_err(validation)?;

    trace.write(
        out,
        &format!("metrics{suffix}.csv"),
        &report::metrics_csv(task, model_id, &keyed),
    )?;
    trace.write(
        out,
        &format!("confusion{suffix}.csv"),
        &report::confusion_csv(task, model_id, &counts),
    )?;
    trace.write(
        out,
        &format!("discrepancies{suffix}.csv"),
        &report::discrepancies_csv(task, &discrepancies),
    )?;
    println!(
        "evaluate{}: macro-F1 {:.4} over {} sentences",
        suffix,
        macro_value,
        gold.len()
    );
    Ok(())
}

/// Score the keyword baseline on the test set for one ablation row. The
/// baseline does not train, so rows differ only through the 100%
/// gold-only zero convention applied by the caller.
fn lexicon_ablation_row(
    percent_removed: u8,
    with_synthetic: bool,
    test_set: &[LabeledSentence],
    task: Task,
) -> Result<AblationRow, crate::evalkit::EvalError> {
    let lexicon = KeywordLexicon::shipped();
    let gold: UnitLabels = test_set
        .iter()
        .map(|s| (s.id.clone(), s.labels.clone()))
        .collect();
    let preds: UnitLabels = test_set
        .iter()
        .map(|s| {
            let p = lexicon.classify(&s.text);
            (s.id.clone(), p.labels_for(task).clone())
        })
        .collect();
    let per_label = evaluate_labels(&gold, &preds, Granularity::Sentence, true)?;
    let keyed: Vec<(EvalLabel, Metrics)> = per_label.iter().map(|(l, _, m)| (*l, *m)).collect();
    let macro_value = macro_f1(&keyed, true)?;
    Ok(AblationRow {
        percent_removed,
        with_synthetic,
        macro_f1: macro_value,
        per_label_f1: keyed.iter().map(|(l, m)| (*l, m.f1)).collect(),
    })
}

fn parse_metrics_csv(raw: &str) -> Result<(Vec<(String, Metrics)>, String), CliError> {
    let mut rows = Vec::new();
    let mut task_model = String::new();
    for line in raw.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            continue;
        }
        if task_model.is_empty() {
            task_model = format!("{} / {}", cells[0], cells[1]);
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| CliError::Validation(e.to_string()))
        };
        rows.push((
            cells[2].to_string(),
            Metrics {
                precision: parse(cells[3])?,
                recall: parse(cells[4])?,
                f1: parse(cells[5])?,
            },
        ));
    }
    Ok((rows, task_model))
}

fn label_from_display(name: &str) -> Option<EvalLabel> {
    EvalLabel::REPORT_ORDER
        .iter()
        .copied()
        .find(|l| l.display_name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(args.iter().map(|s| s.to_string()))
    }

    #[test]
    fn unknown_subcommand_exits_one() {
        assert_eq!(run_args(&["frobnicate"]), 1);
        assert_eq!(run_args(&["evaluate", "--bogus-flag"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_args(&["--help"]), 0);
    }

    #[test]
    fn lock_file_rejects_concurrent_runs() {
        let dir = tempfile::tempdir().unwrap();
        let guard = acquire_lock(dir.path()).unwrap();
        assert!(acquire_lock(dir.path()).is_err());
        drop(guard);
        assert!(acquire_lock(dir.path()).is_ok());
    }

    #[test]
    fn demo_and_pipeline_subcommands() {
        let dir = tempfile::tempdir().unwrap();
        let demo_dir = dir.path().join("demo");
        let out = |name: &str| dir.path().join(name).display().to_string();

        assert_eq!(
            run_args(&["demo", "--seed", "17", "--out", &demo_dir.display().to_string()]),
            0
        );
        assert!(demo_dir.join("notes.jsonl").exists());
        assert!(demo_dir.join("manifest.json").exists());
        assert!(!demo_dir.join(".sdohkit.lock").exists(), "lock released");

        let notes = demo_dir.join("notes.jsonl").display().to_string();
        assert_eq!(
            run_args(&["filter", "--notes", &notes, "--out", &out("filtered")]),
            0
        );
        let kept = dir.path().join("filtered/kept.jsonl").display().to_string();
        assert_eq!(
            run_args(&["segment", "--notes", &kept, "--out", &out("segmented")]),
            0
        );
        let sentences = dir
            .path()
            .join("segmented/sentences.jsonl")
            .display()
            .to_string();
        assert_eq!(
            run_args(&[
                "classify",
                "--sentences",
                &sentences,
                "--backend",
                "lexicon",
                "--task",
                "any",
                "--out",
                &out("preds"),
            ]),
            0
        );
        let pred = dir.path().join("preds/predictions.jsonl").display().to_string();
        let gold = demo_dir.join("annotations.jsonl").display().to_string();
        assert_eq!(
            run_args(&[
                "evaluate", "--gold", &gold, "--pred", &pred, "--task", "any", "--out",
                &out("eval"),
            ]),
            0
        );
        assert!(dir.path().join("eval/metrics.csv").exists());
        assert!(dir.path().join("eval/confusion.csv").exists());
        assert!(dir.path().join("eval/discrepancies.csv").exists());

        // Determinism: run evaluate again into a second directory.
        assert_eq!(
            run_args(&[
                "evaluate", "--gold", &gold, "--pred", &pred, "--task", "any", "--out",
                &out("eval2"),
            ]),
            0
        );
        let a = std::fs::read_to_string(dir.path().join("eval/metrics.csv")).unwrap();
        let b = std::fs::read_to_string(dir.path().join("eval2/metrics.csv")).unwrap();
        assert_eq!(a, b);
    }
}

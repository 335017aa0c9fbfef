//! Prediction backends: prompt construction and response parsing for
//! chat-completion models, an offline keyword baseline, prediction-file
//! import, and training-data export with negative undersampling.

mod cache;
mod remote;

pub use cache::ResponseCache;
pub use remote::{
    classify_remote, complete_chat_batch, ChatMessage, RemoteBackendConfig, RemoteClassifier,
    RemoteOutcome,
};

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{parse_label_token, Category, Task};

const SHIPPED_LEXICON_RULES: &str = include_str!("../../data/lexicon_rules.csv");

/// Sentence text plus the id used to join predictions back to the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInput {
    pub id: String,
    pub text: String,
}

/// A sentence with gold labels for one task, as exported for training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: String,
    pub text: String,
    pub labels: BTreeSet<Category>,
}

/// A labeled exemplar rendered into few-shot prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub text: String,
    pub labels: BTreeSet<Category>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Lexicon,
    Remote,
    Imported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    /// The whole response was a single JSON object.
    Ok,
    /// A JSON object was extracted from surrounding prose, or some label
    /// tokens could not be mapped.
    Salvaged,
    /// No usable object or no mappable token; labels are empty.
    Failed,
}

/// One model's label set for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub task: Task,
    pub labels: BTreeSet<Category>,
    pub model_id: String,
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    pub parse_status: ParseStatus,
    #[serde(default)]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("label list is empty")]
    EmptyLabelList,
    #[error("few-shot prompt requires at least one exemplar")]
    NoExemplars,
    #[error("exemplar {0:?} has no labels")]
    ExemplarWithoutLabels(String),
    #[error("sentence text is empty")]
    EmptySentence,
    #[error("undersample ratio must be positive (got {0})")]
    BadRatio(f64),
    #[error("no positive sentences to anchor undersampling")]
    ZeroPositives,
    #[error("lexicon has no rules")]
    EmptyLexicon,
    #[error("malformed lexicon line {line}: {message}")]
    MalformedLexicon { line: usize, message: String },
    #[error("prediction file references unknown sentence ids: {0:?}")]
    UnknownSentenceIds(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("transport: {0}")]
    Transport(String),
}

/// A rendered prompt. `backticks_escaped` flags that the sentence
/// contained triple backticks, which were replaced by single backticks to
/// keep the delimiter unambiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRender {
    pub text: String,
    pub backticks_escaped: bool,
}

const PROMPT_HEADER: &str = "You will be provided with the following information:\n\
\n\
1. An arbitrary text sample. The sample is delimited with triple backticks.\n\
2. List of categories the text sample can be assigned to. The list is delimited with square brackets. The categories in the list are enclosed in the single quotes and comma separated.\n\
3. Examples of text samples and their assigned categories. The examples are delimited with triple backticks. The assigned categories are enclosed in a list-like structure. These examples are to be used as training data.\n\
\n\
Perform the following tasks:\n\
\n\
1. Identify to which category the provided text belongs to with the highest probability.\n\
2. Assign the provided text to that category.\n\
3. Provide your response in a JSON format containing a single key 'label' and a value corresponding to the assigned category. Do not provide any additional information except the JSON.\n";

fn render_label_list(tokens: &[String]) -> String {
    let quoted: Vec<String> = tokens.iter().map(|t| format!("'{t}'")).collect();
    format!("[{}]", quoted.join(", "))
}

fn escape_sentence(sentence: &str) -> (String, bool) {
    if sentence.contains("```") {
        (sentence.replace("```", "`"), true)
    } else {
        (sentence.to_string(), false)
    }
}

fn render_prompt(
    tokens: &[String],
    training_block: Option<&str>,
    sentence: &str,
) -> Result<PromptRender, ClassifyError> {
    if tokens.is_empty() {
        return Err(ClassifyError::EmptyLabelList);
    }
    if sentence.trim().is_empty() {
        return Err(ClassifyError::EmptySentence);
    }
    let (sentence, escaped) = escape_sentence(sentence);
    let mut text = String::new();
    text.push_str(PROMPT_HEADER);
    text.push('\n');
    text.push_str(&format!("List of categories: {}\n", render_label_list(tokens)));
    if let Some(block) = training_block {
        text.push('\n');
        text.push_str("Training data:\n");
        text.push_str(block);
        text.push('\n');
    }
    text.push('\n');
    text.push_str(&format!("Text sample: ```{sentence}```\n"));
    text.push('\n');
    text.push_str("Your JSON response:");
    Ok(PromptRender {
        text,
        backticks_escaped: escaped,
    })
}

/// Token list for a prompt: category names, optionally with the NO_SDOH
/// negative token appended for corpus runs.
pub fn label_vocabulary(labels: &[Category], include_negative: bool) -> Vec<String> {
    let mut tokens: Vec<String> = labels.iter().map(|c| c.canonical_name().to_string()).collect();
    if include_negative {
        tokens.push(NEGATIVE_TOKEN.to_string());
    }
    tokens
}

/// Render the zero-shot classification prompt: numbered instructions, the
/// quoted label list in square brackets, the sentence in triple backticks
/// and the closing `Your JSON response:` line.
pub fn build_zero_shot_prompt(
    labels: &[Category],
    sentence: &str,
) -> Result<PromptRender, ClassifyError> {
    build_zero_shot_prompt_with_vocab(&label_vocabulary(labels, false), sentence)
}

/// Zero-shot prompt over an explicit token vocabulary.
pub fn build_zero_shot_prompt_with_vocab(
    tokens: &[String],
    sentence: &str,
) -> Result<PromptRender, ClassifyError> {
    render_prompt(tokens, None, sentence)
}

/// Render the few-shot prompt: the zero-shot template plus a
/// `Training data:` block with one `Sample input:` / `Sample target:`
/// pair per exemplar, in the order given. Labels render as a
/// comma-separated list, e.g. `PARENT, RELATIONSHIP`.
pub fn build_few_shot_prompt(
    labels: &[Category],
    exemplars: &[Exemplar],
    sentence: &str,
) -> Result<PromptRender, ClassifyError> {
    build_few_shot_prompt_with_vocab(&label_vocabulary(labels, false), exemplars, sentence)
}

/// Few-shot prompt over an explicit token vocabulary.
pub fn build_few_shot_prompt_with_vocab(
    tokens: &[String],
    exemplars: &[Exemplar],
    sentence: &str,
) -> Result<PromptRender, ClassifyError> {
    if exemplars.is_empty() {
        return Err(ClassifyError::NoExemplars);
    }
    let mut lines = Vec::with_capacity(exemplars.len() * 2);
    for ex in exemplars {
        if ex.labels.is_empty() {
            return Err(ClassifyError::ExemplarWithoutLabels(ex.text.clone()));
        }
        let labels: Vec<&str> = ex.labels.iter().map(|c| c.canonical_name()).collect();
        lines.push(format!("Sample input: {}", ex.text));
        lines.push(format!("Sample target: {}", labels.join(", ")));
    }
    render_prompt(tokens, Some(&lines.join("\n")), sentence)
}

/// Tokens a model may use for "no label"; they parse as an empty label
/// set rather than a failure.
pub const NEGATIVE_TOKEN: &str = "NO_SDOH";
const NEGATIVE_ALIASES: [&str; 5] = ["NO_SDOH", "NO SDOH", "NOSDOH", "NONE", "NO_ADVERSE_SDOH"];

fn is_negative_token(token: &str) -> bool {
    let t = token.trim().to_ascii_uppercase();
    NEGATIVE_ALIASES.contains(&t.as_str())
}

/// Extract balanced `{...}` candidates, skipping brace characters inside
/// JSON strings.
fn json_object_candidates(raw: &str) -> Vec<&str> {
    let bytes = raw.as_bytes();
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut depth = 0usize;
            let mut in_string = false;
            let mut escaped = false;
            let mut end = None;
            for (off, &b) in bytes[i..].iter().enumerate() {
                if in_string {
                    if escaped {
                        escaped = false;
                    } else if b == b'\\' {
                        escaped = true;
                    } else if b == b'"' {
                        in_string = false;
                    }
                    continue;
                }
                match b {
                    b'"' => in_string = true,
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(i + off + 1);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            if let Some(end) = end {
                candidates.push(&raw[i..end]);
            }
        }
        i += 1;
    }
    candidates
}

/// Parse a model response into a label set. The first parsable JSON
/// object wins; the `label` key may hold a single token or a list.
/// Status is `ok` when the whole response is one JSON object, `salvaged`
/// when the object was embedded in prose or some tokens were unmappable,
/// and `failed` when nothing usable was found (labels then empty). Never
/// panics or errors.
pub fn parse_model_response(raw: &str) -> (BTreeSet<Category>, ParseStatus) {
    let trimmed = raw.trim();
    let (object, mut status) = match serde_json::from_str::<serde_json::Value>(trimmed) {
        Ok(v) if v.is_object() => (Some(v), ParseStatus::Ok),
        _ => {
            let found = json_object_candidates(trimmed)
                .into_iter()
                .find_map(|c| serde_json::from_str::<serde_json::Value>(c).ok());
            match found {
                Some(v) => (Some(v), ParseStatus::Salvaged),
                None => (None, ParseStatus::Failed),
            }
        }
    };

    let Some(object) = object else {
        return (BTreeSet::new(), ParseStatus::Failed);
    };
    let tokens: Vec<String> = match object.get("label") {
        Some(serde_json::Value::String(s)) => vec![s.clone()],
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .filter_map(|v| v.as_str().map(String::from))
            .collect(),
        _ => Vec::new(),
    };
    if tokens.is_empty() {
        // A missing label key is a failure; an explicit empty list is a
        // valid "no label" answer.
        let explicit_empty = matches!(object.get("label"), Some(serde_json::Value::Array(a)) if a.is_empty());
        return if explicit_empty {
            (BTreeSet::new(), status)
        } else {
            (BTreeSet::new(), ParseStatus::Failed)
        };
    }

    let mut labels = BTreeSet::new();
    let mut mapped = 0usize;
    let mut unmapped = 0usize;
    for token in &tokens {
        if is_negative_token(token) {
            mapped += 1;
            continue;
        }
        match parse_label_token(token) {
            Ok(cat) => {
                labels.insert(cat);
                mapped += 1;
            }
            Err(_) => unmapped += 1,
        }
    }
    if mapped == 0 {
        return (BTreeSet::new(), ParseStatus::Failed);
    }
    if unmapped > 0 {
        status = ParseStatus::Salvaged;
    }
    (labels, status)
}

/// One keyword rule of the offline baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconRule {
    pub pattern: String,
    pub category: Category,
    pub adverse: bool,
}

/// Case-insensitive substring keyword classifier. A deliberately simple,
/// fully offline baseline.
#[derive(Debug, Clone)]
pub struct KeywordLexicon {
    rules: Vec<LexiconRule>,
}

/// Labels matched by the lexicon under both tasks; the adverse set is a
/// subset of the any set by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconPrediction {
    pub any: BTreeSet<Category>,
    pub adverse: BTreeSet<Category>,
}

impl LexiconPrediction {
    pub fn labels_for(&self, task: Task) -> &BTreeSet<Category> {
        match task {
            Task::Any => &self.any,
            Task::Adverse => &self.adverse,
        }
    }
}

impl KeywordLexicon {
    pub fn shipped() -> Self {
        KeywordLexicon::from_csv(SHIPPED_LEXICON_RULES).expect("shipped lexicon parses")
    }

    /// Parse `pattern,category,adverse` CSV (header row optional).
    pub fn from_csv(text: &str) -> Result<Self, ClassifyError> {
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "pattern,category,adverse" {
                continue;
            }
            let parts: Vec<&str> = line.splitn(3, ',').collect();
            if parts.len() != 3 {
                return Err(ClassifyError::MalformedLexicon {
                    line: idx + 1,
                    message: "expected `pattern,category,adverse`".to_string(),
                });
            }
            let category =
                parse_label_token(parts[1]).map_err(|e| ClassifyError::MalformedLexicon {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            let adverse = match parts[2].trim() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(ClassifyError::MalformedLexicon {
                        line: idx + 1,
                        message: format!("adverse must be true/false, got {other:?}"),
                    })
                }
            };
            rules.push(LexiconRule {
                pattern: parts[0].trim().to_lowercase(),
                category,
                adverse,
            });
        }
        if rules.is_empty() {
            return Err(ClassifyError::EmptyLexicon);
        }
        Ok(KeywordLexicon { rules })
    }

    pub fn classify(&self, sentence: &str) -> LexiconPrediction {
        let lower = sentence.to_lowercase();
        let mut any = BTreeSet::new();
        let mut adverse = BTreeSet::new();
        for rule in &self.rules {
            if lower.contains(&rule.pattern) {
                any.insert(rule.category);
                if rule.adverse {
                    adverse.insert(rule.category);
                }
            }
        }
        LexiconPrediction { any, adverse }
    }

    /// Produce prediction records for a batch of sentences.
    pub fn classify_batch(&self, sentences: &[SentenceInput], task: Task) -> Vec<PredictionRecord> {
        sentences
            .iter()
            .map(|s| PredictionRecord {
                sentence_id: s.id.clone(),
                task,
                labels: self.classify(&s.text).labels_for(task).clone(),
                model_id: "keyword-lexicon".to_string(),
                backend: Backend::Lexicon,
                raw_response: None,
                parse_status: ParseStatus::Ok,
                retries: 0,
                error: None,
            })
            .collect()
    }
}

impl Default for KeywordLexicon {
    fn default() -> Self {
        KeywordLexicon::shipped()
    }
}

/// Classify the sentence with the shipped keyword lexicon.
pub fn classify_lexicon(lexicon: &KeywordLexicon, sentence: &str) -> LexiconPrediction {
    lexicon.classify(sentence)
}

/// Keep every positive sentence and sample negatives without replacement
/// down to `min(available, floor(ratio * positives))`. Output preserves
/// the original sentence order; deterministic for a fixed seed.
pub fn undersample_negatives(
    sentences: &[LabeledSentence],
    ratio: f64,
    seed: u64,
) -> Result<Vec<LabeledSentence>, ClassifyError> {
    if ratio <= 0.0 || ratio.is_nan() {
        return Err(ClassifyError::BadRatio(ratio));
    }
    let positives = sentences.iter().filter(|s| !s.labels.is_empty()).count();
    if positives == 0 {
        return Err(ClassifyError::ZeroPositives);
    }
    let negative_indices: Vec<usize> = (0..sentences.len())
        .filter(|i| sentences[*i].labels.is_empty())
        .collect();
    let keep_count = ((ratio * positives as f64).floor() as usize).min(negative_indices.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = negative_indices;
    shuffled.shuffle(&mut rng);
    let kept_negatives: BTreeSet<usize> = shuffled.into_iter().take(keep_count).collect();

    Ok(sentences
        .iter()
        .enumerate()
        .filter(|(i, s)| !s.labels.is_empty() || kept_negatives.contains(i))
        .map(|(_, s)| s.clone())
        .collect())
}

/// A parsed line of predictions.jsonl.
#[derive(Debug, Deserialize)]
struct ImportedLine {
    sentence_id: String,
    task: Task,
    labels: Vec<String>,
    model_id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportDiagnostic {
    pub line: usize,
    pub message: String,
}

/// Load externally produced predictions. Label tokens go through the
/// alias table; unmappable tokens are reported and the record keeps any
/// tokens that did map (status `salvaged`, or `failed` when none did).
/// Ids absent from `known_ids` abort the import.
pub fn import_predictions(
    path: &Path,
    known_ids: &BTreeSet<String>,
) -> Result<(Vec<PredictionRecord>, Vec<ImportDiagnostic>), ClassifyError> {
    let raw = std::fs::read_to_string(path).map_err(|source| ClassifyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut missing = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ImportedLine = match serde_json::from_str(line) {
            Ok(p) => p,
            Err(e) => {
                diagnostics.push(ImportDiagnostic {
                    line: lineno,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if !known_ids.contains(&parsed.sentence_id) {
            missing.push(parsed.sentence_id.clone());
            continue;
        }
        let mut labels = BTreeSet::new();
        let mut unmapped = 0usize;
        for token in &parsed.labels {
            if is_negative_token(token) {
                continue;
            }
            match parse_label_token(token) {
                Ok(cat) => {
                    labels.insert(cat);
                }
                Err(e) => {
                    unmapped += 1;
                    diagnostics.push(ImportDiagnostic {
                        line: lineno,
                        message: e.to_string(),
                    });
                }
            }
        }
        let parse_status = if unmapped == 0 {
            ParseStatus::Ok
        } else if labels.is_empty() {
            ParseStatus::Failed
        } else {
            ParseStatus::Salvaged
        };
        records.push(PredictionRecord {
            sentence_id: parsed.sentence_id,
            task: parsed.task,
            labels: if parse_status == ParseStatus::Failed {
                BTreeSet::new()
            } else {
                labels
            },
            model_id: parsed.model_id,
            backend: Backend::Imported,
            raw_response: None,
            parse_status,
            retries: 0,
            error: None,
        });
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(ClassifyError::UnknownSentenceIds(missing));
    }
    Ok((records, diagnostics))
}

/// A label source the bias audit can call on batches of sentences. Errors
/// are per-sentence so one transport failure only drops its pair.
pub trait SentenceClassifier {
    fn model_id(&self) -> String;
    fn classify(&self, sentences: &[SentenceInput], task: Task)
        -> Vec<Result<BTreeSet<Category>, String>>;
}

impl SentenceClassifier for KeywordLexicon {
    fn model_id(&self) -> String {
        "keyword-lexicon".to_string()
    }

    fn classify(
        &self,
        sentences: &[SentenceInput],
        task: Task,
    ) -> Vec<Result<BTreeSet<Category>, String>> {
        self.classify_batch(sentences, task)
            .into_iter()
            .map(|r| Ok(r.labels))
            .collect()
    }
}

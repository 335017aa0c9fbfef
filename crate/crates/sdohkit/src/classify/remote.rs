//! Blocking chat-completions client with bounded concurrency, retry with
//! exponential backoff, and deterministic output ordering.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    build_few_shot_prompt_with_vocab, build_zero_shot_prompt_with_vocab, label_vocabulary,
    parse_model_response, Backend, ClassifyError, Exemplar, ParseStatus, PredictionRecord,
    ResponseCache, SentenceClassifier, SentenceInput,
};
use crate::schema::{Category, Task};

/// Connection settings for any endpoint speaking the chat-completions
/// wire protocol: POST `{base_url}/chat/completions` with
/// `{model, temperature, messages}`, reading the first choice's message
/// content. The API key is read from the environment variable named in
/// `api_key_env` and sent as a bearer token when present.
#[derive(Debug, Clone)]
pub struct RemoteBackendConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    pub timeout: Duration,
    pub api_key_env: String,
    /// Initial retry backoff; doubles per retry.
    pub backoff: Duration,
}

impl RemoteBackendConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        RemoteBackendConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_retries: 3,
            max_concurrency: 4,
            timeout: Duration::from_secs(30),
            api_key_env: "SDOHKIT_API_KEY".to_string(),
            backoff: Duration::from_millis(250),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_concurrency < 1 {
            return Err("max_concurrency must be >= 1".to_string());
        }
        if self.temperature < 0.0 {
            return Err("temperature must be >= 0".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".to_string(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".to_string(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".to_string(),
            content: content.into(),
        }
    }
}

/// A completed request: the raw content plus how it was obtained.
#[derive(Debug, Clone)]
pub struct RemoteOutcome {
    pub content: String,
    pub retries: u32,
    pub from_cache: bool,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
}

fn attempt_request(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    request: &ChatRequest<'_>,
) -> Result<String, AttemptError> {
    let mut builder = client.post(url).json(request);
    if let Some(key) = api_key {
        builder = builder.bearer_auth(key);
    }
    let response = builder.send().map_err(|e| {
        // Connection and timeout problems are worth retrying.
        AttemptError::Retryable(format!("transport: {e}"))
    })?;
    let status = response.status();
    if status.as_u16() == 429 || status.is_server_error() {
        return Err(AttemptError::Retryable(format!("http status {status}")));
    }
    if !status.is_success() {
        return Err(AttemptError::Fatal(format!("http status {status}")));
    }
    let parsed: ChatResponse = response
        .json()
        .map_err(|e| AttemptError::Fatal(format!("malformed response body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| AttemptError::Fatal("response had no choices".to_string()))
}

fn complete_one(
    client: &reqwest::blocking::Client,
    config: &RemoteBackendConfig,
    api_key: Option<&str>,
    messages: &[ChatMessage],
    cache: Option<&ResponseCache>,
) -> Result<RemoteOutcome, String> {
    let payload = serde_json::to_string(messages).expect("messages serialize");
    let cache_key = ResponseCache::key(&config.model_name, &payload);
    if let Some(cache) = cache {
        if let Some(content) = cache.get(&cache_key) {
            return Ok(RemoteOutcome {
                content,
                retries: 0,
                from_cache: true,
            });
        }
    }

    let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
    let request = ChatRequest {
        model: &config.model_name,
        temperature: config.temperature,
        messages,
    };

    let mut retries = 0u32;
    loop {
        match attempt_request(client, &url, api_key, &request) {
            Ok(content) => {
                if let Some(cache) = cache {
                    // Cache write failures only cost replayability.
                    let _ = cache.put(&cache_key, &content);
                }
                return Ok(RemoteOutcome {
                    content,
                    retries,
                    from_cache: false,
                });
            }
            Err(AttemptError::Fatal(message)) => return Err(message),
            Err(AttemptError::Retryable(message)) => {
                if retries >= config.max_retries {
                    return Err(format!("{message} (after {retries} retries)"));
                }
                let delay = config.backoff.saturating_mul(2u32.saturating_pow(retries));
                std::thread::sleep(delay);
                retries += 1;
            }
        }
    }
}

/// Send every message batch, never holding more than
/// `config.max_concurrency` requests in flight, and return outcomes in
/// input order regardless of completion order.
pub fn complete_chat_batch(
    config: &RemoteBackendConfig,
    batches: &[Vec<ChatMessage>],
    cache: Option<&ResponseCache>,
) -> Result<Vec<Result<RemoteOutcome, String>>, ClassifyError> {
    config.validate().map_err(ClassifyError::Transport)?;
    let api_key = std::env::var(&config.api_key_env).ok();
    let client = reqwest::blocking::Client::builder()
        .timeout(config.timeout)
        .build()
        .map_err(|e| ClassifyError::Transport(e.to_string()))?;

    let jobs: Mutex<VecDeque<(usize, &Vec<ChatMessage>)>> =
        Mutex::new(batches.iter().enumerate().collect());
    let results: Mutex<Vec<Option<Result<RemoteOutcome, String>>>> =
        Mutex::new(vec![None; batches.len()]);

    let workers = config.max_concurrency.min(batches.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = jobs.lock().unwrap().pop_front();
                let Some((idx, messages)) = job else { break };
                let outcome =
                    complete_one(&client, config, api_key.as_deref(), messages, cache);
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    Ok(results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job completed"))
        .collect())
}

/// Classify sentences against a remote chat-completions endpoint using
/// the zero-shot prompt (or the few-shot prompt when exemplars are
/// given). Produces one record per sentence in input order; transport
/// failures after all retries yield a `failed` record with the error
/// noted rather than aborting the batch. `include_negative` appends the
/// NO_SDOH token to the rendered label list for corpus runs.
#[allow(clippy::too_many_arguments)]
pub fn classify_remote(
    config: &RemoteBackendConfig,
    sentences: &[SentenceInput],
    labels: &[Category],
    exemplars: Option<&[Exemplar]>,
    task: Task,
    include_negative: bool,
    cache: Option<&ResponseCache>,
) -> Result<Vec<PredictionRecord>, ClassifyError> {
    if labels.is_empty() {
        return Err(ClassifyError::EmptyLabelList);
    }
    let vocab = label_vocabulary(labels, include_negative);

    let mut batches = Vec::with_capacity(sentences.len());
    let mut render_errors: Vec<Option<String>> = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let render = match exemplars {
            Some(ex) if !ex.is_empty() => {
                build_few_shot_prompt_with_vocab(&vocab, ex, &sentence.text)
            }
            _ => build_zero_shot_prompt_with_vocab(&vocab, &sentence.text),
        };
        match render {
            Ok(r) => {
                batches.push(vec![ChatMessage::user(r.text)]);
                render_errors.push(None);
            }
            Err(e) => {
                // Keep slot alignment; the empty batch is skipped below.
                batches.push(Vec::new());
                render_errors.push(Some(e.to_string()));
            }
        }
    }

    let sendable: Vec<Vec<ChatMessage>> = batches.iter().filter(|b| !b.is_empty()).cloned().collect();
    let mut outcomes = complete_chat_batch(config, &sendable, cache)?.into_iter();

    let mut records = Vec::with_capacity(sentences.len());
    for (i, sentence) in sentences.iter().enumerate() {
        let record = if let Some(message) = &render_errors[i] {
            PredictionRecord {
                sentence_id: sentence.id.clone(),
                task,
                labels: Default::default(),
                model_id: config.model_name.clone(),
                backend: Backend::Remote,
                raw_response: None,
                parse_status: ParseStatus::Failed,
                retries: 0,
                error: Some(message.clone()),
            }
        } else {
            match outcomes.next().expect("outcome per sendable prompt") {
                Ok(outcome) => {
                    let (labels, parse_status) = parse_model_response(&outcome.content);
                    PredictionRecord {
                        sentence_id: sentence.id.clone(),
                        task,
                        labels,
                        model_id: config.model_name.clone(),
                        backend: Backend::Remote,
                        raw_response: Some(outcome.content),
                        parse_status,
                        retries: outcome.retries,
                        error: None,
                    }
                }
                Err(message) => PredictionRecord {
                    sentence_id: sentence.id.clone(),
                    task,
                    labels: Default::default(),
                    model_id: config.model_name.clone(),
                    backend: Backend::Remote,
                    raw_response: None,
                    parse_status: ParseStatus::Failed,
                    retries: config.max_retries,
                    error: Some(message),
                },
            }
        };
        records.push(record);
    }
    Ok(records)
}

/// Remote backend wrapper for the bias audit: zero-shot classification
/// with per-sentence errors on transport failure.
pub struct RemoteClassifier<'a> {
    pub config: &'a RemoteBackendConfig,
    pub labels: Vec<Category>,
    pub exemplars: Option<Vec<Exemplar>>,
    pub include_negative: bool,
    pub cache: Option<&'a ResponseCache>,
}

impl SentenceClassifier for RemoteClassifier<'_> {
    fn model_id(&self) -> String {
        self.config.model_name.clone()
    }

    fn classify(
        &self,
        sentences: &[SentenceInput],
        task: Task,
    ) -> Vec<Result<std::collections::BTreeSet<Category>, String>> {
        match classify_remote(
            self.config,
            sentences,
            &self.labels,
            self.exemplars.as_deref(),
            task,
            self.include_negative,
            self.cache,
        ) {
            Ok(records) => records
                .into_iter()
                .map(|r| match r.error {
                    Some(e) => Err(e),
                    // Parse failures still count as (empty) predictions.
                    None => Ok(r.labels),
                })
                .collect(),
            Err(e) => sentences.iter().map(|_| Err(e.to_string())).collect(),
        }
    }
}

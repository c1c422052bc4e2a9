//! HTTP client for probing chat-completion endpoints, with prompt
//! construction, first-token option-distribution extraction, and a
//! persistent content-addressed call cache.
//!
//! All probing is deterministic from the caller's side: temperature 0, a
//! single sample, and a cache key derived from (model, prompt, decoding
//! parameters), so repeating a survey replays records byte-identically
//! instead of touching the network.

mod cache;
mod extract;
mod prompt;
mod wire;

pub use cache::{cache_key, CallRecord, RecordLog};
pub use extract::{extract_option_distribution, ExtractedDistribution};
pub use prompt::{
    build_judge_prompt, build_mc_prompt, build_open_prompt, build_pvq_prompt, example_item,
    pvq_choices, pvq_instruction, LetterMap, LetterOption, JUDGE_QUESTION, OPEN_PROMPT_LEAD,
    VALUE_SENTENCE_PREFIX,
};

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Language, QuestionItem};
use crate::divergence::Distribution;

/// A chat-completion endpoint to survey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    /// Base URL up to but excluding `/chat/completions`,
    /// e.g. `http://127.0.0.1:8731/v1`.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding a bearer token, if the
    /// endpoint needs one.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    /// Upper bound on in-flight requests to this endpoint. Must be >= 1.
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    /// Whether the endpoint can return first-token top-k log probabilities
    /// (required for multiple-choice probing).
    #[serde(default = "default_true")]
    pub supports_logprobs: bool,
}

fn default_concurrency() -> usize {
    1
}

fn default_timeout() -> u64 {
    60
}

fn default_true() -> bool {
    true
}

impl ModelEndpoint {
    pub fn validate(&self) -> Result<()> {
        if self.base_url.is_empty() {
            return Err(ClientError::InvalidEndpoint("base_url is empty".into()));
        }
        if self.model_name.is_empty() {
            return Err(ClientError::InvalidEndpoint("model_name is empty".into()));
        }
        if self.max_concurrent < 1 {
            return Err(ClientError::InvalidEndpoint("max_concurrent must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a question is put to the agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    MultipleChoice,
    OpenEnded,
}

impl UseCase {
    pub fn name(self) -> &'static str {
        match self {
            UseCase::MultipleChoice => "multiple_choice",
            UseCase::OpenEnded => "open_ended",
        }
    }

    pub fn parse(s: &str) -> Option<UseCase> {
        match s {
            "multiple_choice" => Some(UseCase::MultipleChoice),
            "open_ended" => Some(UseCase::OpenEnded),
            _ => None,
        }
    }
}

/// Coordinates of a question item within a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemRef {
    pub topic_id: String,
    pub question_id: String,
}

impl ItemRef {
    pub fn of(item: &QuestionItem) -> ItemRef {
        ItemRef { topic_id: item.topic_id.clone(), question_id: item.question_id.clone() }
    }
}

/// Everything that determines a single probe: which wording of which item,
/// in which use case, under which conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub item: ItemRef,
    pub paraphrase_index: usize,
    pub use_case: UseCase,
    pub language: Language,
    pub abstain_enabled: bool,
    /// Sole source of randomness for answer-option letter order.
    pub order_seed: u64,
    /// Value name slotted into the steering sentence, when conditioning.
    #[serde(default)]
    pub value_condition: Option<String>,
    /// Extra context sentence slotted into open-ended prompts (used by the
    /// bias-context pipeline).
    #[serde(default)]
    pub context_statement: Option<String>,
    #[serde(default)]
    pub in_context_example: bool,
}

/// Decoding parameters pinned per request; part of the cache key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    /// Number of top-k first-token log probabilities to request; 0 skips
    /// logprobs entirely.
    pub top_logprobs: u32,
}

impl DecodingParams {
    pub fn multiple_choice() -> Self {
        DecodingParams { temperature: 0.0, max_tokens: 1, top_logprobs: 20 }
    }

    pub fn open_ended() -> Self {
        DecodingParams { temperature: 0.0, max_tokens: 512, top_logprobs: 0 }
    }
}

/// Outcome of one probe: either an option distribution (multiple choice)
/// or a generated passage (open-ended), never both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub model: String,
    pub probe: ProbeSpec,
    pub option_probs: Option<Distribution>,
    pub generation: Option<String>,
    /// Probability mass of returned tokens that matched no option letter.
    pub none_mass: f64,
    /// True when no option letter carried any mass and the distribution
    /// fell back to uniform; consumers decide whether to keep such records.
    pub degenerate: bool,
    pub raw_logprobs: Vec<(String, f64)>,
    pub timestamp: u64,
    pub cache_key: String,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("item has {got} answer options; only 26 letters are available")]
    TooManyOptions { got: usize },
    #[error("paraphrase index {index} out of range for item {item} ({len} paraphrases)")]
    ParaphraseOutOfRange { item: String, index: usize, len: usize },
    #[error("endpoint {0} does not support logprobs, required for multiple-choice probing")]
    LogprobsUnsupported(String),
    #[error("auth token environment variable {0} is not set")]
    AuthTokenMissing(String),
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Network { url: String, attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed endpoint reply: {0}")]
    MalformedReply(String),
    #[error("endpoint reply carried no top-k logprobs")]
    MissingLogprobs,
    #[error("cache log {path} line {line}: {message}")]
    CacheCorrupt { path: String, line: usize, message: String },
    #[error("cache log {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Divergence(#[from] crate::divergence::DivergenceError),
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// Seconds since the Unix epoch; the timestamp stamped on fresh calls.
pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Retry behaviour for transient network failures.
#[derive(Clone, Debug)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 200 }
    }
}

/// Cached, retrying chat-completion client.
///
/// Every network interaction flows through [`Client::call`], which consults
/// the append-only [`RecordLog`] first; a given (model, prompt, decoding
/// parameters) triple therefore costs at most one network request per log.
pub struct Client {
    http: reqwest::blocking::Client,
    log: RecordLog,
    retry: RetryPolicy,
}

impl Client {
    /// Open a client over the record log at `path` (created if absent).
    pub fn open(path: impl Into<std::path::PathBuf>) -> Result<Self> {
        Ok(Client {
            http: reqwest::blocking::Client::new(),
            log: RecordLog::open(path)?,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn log(&self) -> &RecordLog {
        &self.log
    }

    /// Fetch (or replay) the raw call for `prompt` against `endpoint`.
    pub fn call(
        &self,
        endpoint: &ModelEndpoint,
        prompt: &str,
        params: &DecodingParams,
    ) -> Result<CallRecord> {
        endpoint.validate()?;
        let key = cache_key(&endpoint.model_name, prompt, params);
        if let Some(hit) = self.log.get(&key) {
            return Ok(hit);
        }
        let reply = wire::chat_completion(&self.http, endpoint, prompt, params, &self.retry)?;
        if params.top_logprobs > 0 && reply.top_logprobs.is_empty() {
            return Err(ClientError::MissingLogprobs);
        }
        let record = CallRecord {
            cache_key: key,
            model: endpoint.model_name.clone(),
            prompt: prompt.to_string(),
            params: params.clone(),
            content: reply.content,
            top_logprobs: reply.top_logprobs,
            timestamp: now_unix(),
        };
        self.log.append(&record)?;
        Ok(record)
    }

    /// Probe one item wording. Multiple-choice probes return an option
    /// distribution extracted from first-token logprobs; open-ended probes
    /// return the generated passage.
    pub fn probe(
        &self,
        endpoint: &ModelEndpoint,
        spec: &ProbeSpec,
        item: &QuestionItem,
    ) -> Result<ResponseRecord> {
        match spec.use_case {
            UseCase::MultipleChoice => {
                if !endpoint.supports_logprobs {
                    return Err(ClientError::LogprobsUnsupported(endpoint.model_name.clone()));
                }
                let (prompt, letter_map) = build_mc_prompt(spec, item)?;
                let params = DecodingParams::multiple_choice();
                let call = self.call(endpoint, &prompt, &params)?;
                let extracted = extract_option_distribution(&call.top_logprobs, &letter_map)?;
                Ok(ResponseRecord {
                    model: endpoint.model_name.clone(),
                    probe: spec.clone(),
                    option_probs: Some(extracted.option_probs),
                    generation: None,
                    none_mass: extracted.none_mass,
                    degenerate: extracted.degenerate,
                    raw_logprobs: call.top_logprobs.clone(),
                    timestamp: call.timestamp,
                    cache_key: call.cache_key,
                })
            }
            UseCase::OpenEnded => {
                let prompt = build_open_prompt(spec, item)?;
                let params = DecodingParams::open_ended();
                let call = self.call(endpoint, &prompt, &params)?;
                let generation = call
                    .content
                    .clone()
                    .ok_or_else(|| ClientError::MalformedReply("no message content".into()))?;
                Ok(ResponseRecord {
                    model: endpoint.model_name.clone(),
                    probe: spec.clone(),
                    option_probs: None,
                    generation: Some(generation),
                    none_mass: 0.0,
                    degenerate: false,
                    raw_logprobs: Vec::new(),
                    timestamp: call.timestamp,
                    cache_key: call.cache_key,
                })
            }
        }
    }

    /// Probe many (spec, item) pairs, fanning out over up to
    /// `endpoint.max_concurrent` worker threads. Results come back in
    /// input order.
    pub fn probe_many(
        &self,
        endpoint: &ModelEndpoint,
        work: &[(ProbeSpec, &QuestionItem)],
    ) -> Vec<Result<ResponseRecord>> {
        endpoint.validate().ok();
        let workers = endpoint.max_concurrent.max(1).min(work.len().max(1));
        if workers <= 1 {
            return work.iter().map(|(spec, item)| self.probe(endpoint, spec, item)).collect();
        }
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<std::sync::Mutex<Option<Result<ResponseRecord>>>> =
            work.iter().map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= work.len() {
                        break;
                    }
                    let (spec, item) = &work[i];
                    let out = self.probe(endpoint, spec, item);
                    *results[i].lock().expect("result slot") = Some(out);
                });
            }
        });
        results
            .into_iter()
            .map(|slot| slot.into_inner().expect("result slot").expect("worker filled slot"))
            .collect()
    }
}

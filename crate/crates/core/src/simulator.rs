//! Synthetic respondents with controllable noise, served over a local
//! chat-completions endpoint.
//!
//! A [`SyntheticRespondent`] holds a base support level per topic and
//! adds deterministic noise along four independent axes — paraphrasing,
//! question identity, language, and use case. Each axis is keyed only by
//! its own coordinate (and paraphrase noise is centered within each
//! question's sibling set), so turning exactly one axis on elevates
//! exactly the matching consistency measure while the others stay at the
//! numerical floor. That separation is what makes the simulator a useful
//! ground truth for validating the measurement pipeline end to end.
//!
//! [`serve_respondent`] exposes a respondent as an HTTP endpoint speaking
//! the same wire format as a real model server: it answers
//! multiple-choice prompts with letter logprobs, open-ended prompts with
//! a passage carrying a machine-readable support marker, judge prompts by
//! reading that marker back, and portrait-item prompts from a per-value
//! affinity profile. [`serve_scripted`] serves arbitrary canned replies
//! for driving the generation pipeline in tests.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    pvq_choices, pvq_instruction, ModelEndpoint, UseCase, JUDGE_QUESTION, OPEN_PROMPT_LEAD,
    VALUE_SENTENCE_PREFIX,
};
use crate::dataset::{
    abstain_text, Choice, Corpus, CorpusError, Country, Language, Provenance, QuestionItem, Stance,
    TopicInfo,
};
use crate::steering::pvq_items;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("respondent has no stance for topic {0}")]
    UnknownTopic(String),
    #[error("paraphrase index {index} out of range ({count} paraphrases)")]
    ParaphraseOutOfRange { index: usize, count: usize },
    #[error("could not make sense of the prompt: {0}")]
    BadPrompt(String),
    #[error("two corpus items share the wording {0:?}")]
    AmbiguousWording(String),
    #[error("failed to bind a local port: {0}")]
    Bind(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, SimulatorError>;

/// Deterministic uniform draw in [-0.5, 0.5], keyed by (seed, axis, key).
fn axis_draw(seed: u64, axis: &str, key: &str) -> f64 {
    use sha2::{Digest as _, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(axis.as_bytes());
    hasher.update([0x1f]);
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut eight = [0u8; 8];
    eight.copy_from_slice(&digest[..8]);
    // 53 uniform mantissa bits -> [0, 1), then center.
    (u64::from_le_bytes(eight) >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5
}

/// Everything that determines one synthetic answer.
#[derive(Clone, Debug)]
pub struct AnswerCoordinates<'a> {
    pub topic_id: &'a str,
    pub question_id: &'a str,
    pub paraphrase_index: usize,
    pub paraphrase_count: usize,
    pub language: Language,
    pub use_case: UseCase,
    pub value_condition: Option<&'a str>,
}

/// A parameterized synthetic answerer.
///
/// The support probability for a question starts at the topic's base
/// stance and accumulates independent noise terms, each a deterministic
/// uniform draw in [-0.5, 0.5] scaled by the axis amplitude:
///
/// - question noise is keyed by (topic, question) only;
/// - paraphrase noise is keyed by (topic, question, index) and centered
///   across the question's paraphrases, so paraphrase marginals are
///   exact;
/// - language noise is keyed by the language alone;
/// - use-case noise is keyed by the use case alone.
///
/// Conditioning on the respondent's relevant value reflects the support
/// toward the opposite stance by `value_sensitivity` (1 = full flip);
/// all other value conditions leave answers untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRespondent {
    pub seed: u64,
    /// Base support level per topic, each in [0, 1].
    pub topic_stances: BTreeMap<String, f64>,
    #[serde(default)]
    pub paraphrase_noise: f64,
    #[serde(default)]
    pub question_noise: f64,
    #[serde(default)]
    pub language_noise: f64,
    #[serde(default)]
    pub usecase_noise: f64,
    /// The one value whose conditioning moves this respondent.
    #[serde(default)]
    pub relevant_value: Option<String>,
    #[serde(default)]
    pub value_sensitivity: f64,
    /// Mass put on the abstain option when a prompt offers one.
    #[serde(default)]
    pub abstain_mass: f64,
}

impl SyntheticRespondent {
    /// A noise-free respondent over the given topic stances.
    pub fn noiseless(seed: u64, topic_stances: BTreeMap<String, f64>) -> SyntheticRespondent {
        SyntheticRespondent {
            seed,
            topic_stances,
            paraphrase_noise: 0.0,
            question_noise: 0.0,
            language_noise: 0.0,
            usecase_noise: 0.0,
            relevant_value: None,
            value_sensitivity: 0.0,
            abstain_mass: 0.0,
        }
    }

    fn draw(&self, axis: &str, key: &str) -> f64 {
        axis_draw(self.seed, axis, key)
    }

    fn centered_paraphrase_draw(&self, c: &AnswerCoordinates) -> Result<f64> {
        if c.paraphrase_index >= c.paraphrase_count {
            return Err(SimulatorError::ParaphraseOutOfRange {
                index: c.paraphrase_index,
                count: c.paraphrase_count,
            });
        }
        let draws: Vec<f64> = (0..c.paraphrase_count)
            .map(|r| self.draw("paraphrase", &format!("{}\x1f{}\x1f{r}", c.topic_id, c.question_id)))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        Ok(draws[c.paraphrase_index] - mean)
    }

    /// Probability of answering in support, in [0, 1].
    pub fn support_probability(&self, c: &AnswerCoordinates) -> Result<f64> {
        let theta = *self
            .topic_stances
            .get(c.topic_id)
            .ok_or_else(|| SimulatorError::UnknownTopic(c.topic_id.to_string()))?;
        let mut support = theta
            + self.question_noise
                * self.draw("question", &format!("{}\x1f{}", c.topic_id, c.question_id))
            + self.paraphrase_noise * self.centered_paraphrase_draw(c)?
            + self.language_noise * self.draw("language", c.language.code())
            + self.usecase_noise * self.draw("usecase", c.use_case.name());
        if let (Some(condition), Some(relevant)) = (c.value_condition, &self.relevant_value) {
            if condition == relevant {
                support += self.value_sensitivity * (1.0 - 2.0 * support);
            }
        }
        Ok(support.clamp(0.0, 1.0))
    }

    /// Probability of calling a portrait statement "like me", from a
    /// stable per-value affinity plus the conditioning boost.
    ///
    /// The boost fires only when the statement portrays the respondent's
    /// one relevant value and the prompt conditions on that same value —
    /// the respondent is sensitive to a single value, not to value
    /// language in general.
    pub fn pvq_like_probability(&self, statement_value: &str, value_condition: Option<&str>) -> f64 {
        let mut like = 0.5 + 0.2 * self.draw("pvq", statement_value);
        if value_condition == Some(statement_value)
            && self.relevant_value.as_deref() == Some(statement_value)
        {
            like += self.value_sensitivity * 0.4;
        }
        like.clamp(0.0, 1.0)
    }
}

/// Noise amplitudes for building respondent populations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub paraphrase: f64,
    pub question: f64,
    pub language: f64,
    pub usecase: f64,
}

/// Build `count` respondents with per-topic base stances drawn uniformly
/// from [0.25, 0.75] (clamping-safe under moderate noise), deterministic
/// in `seed`.
pub fn synthetic_population(
    seed: u64,
    count: usize,
    topic_ids: &[String],
    noise: &NoiseProfile,
) -> Vec<SyntheticRespondent> {
    (0..count)
        .map(|i| {
            let topic_stances = topic_ids
                .iter()
                .map(|t| {
                    let unit = axis_draw(seed, "theta", &format!("{i}\x1f{t}")) + 0.5;
                    (t.clone(), 0.25 + 0.5 * unit)
                })
                .collect();
            SyntheticRespondent {
                seed: seed.wrapping_add(i as u64),
                topic_stances,
                paraphrase_noise: noise.paraphrase,
                question_noise: noise.question,
                language_noise: noise.language,
                usecase_noise: noise.usecase,
                relevant_value: None,
                value_sensitivity: 0.0,
                abstain_mass: 0.0,
            }
        })
        .collect()
}

fn yes_no(language: Language) -> (&'static str, &'static str) {
    match language {
        Language::Eng => ("yes", "no"),
        Language::Chi => ("是", "否"),
        Language::Ger => ("Ja", "Nein"),
        Language::Jpn => ("はい", "いいえ"),
    }
}

fn country_of(language: Language) -> Country {
    match language {
        Language::Eng => Country::US,
        Language::Chi => Country::China,
        Language::Ger => Country::Germany,
        Language::Jpn => Country::Japan,
    }
}

/// Build a synthetic corpus: `n_topics` x `n_questions` question items
/// with `n_paraphrases` wordings each, replicated across `languages`
/// with index-aligned paraphrases. Wordings are unique per coordinate.
pub fn synthetic_corpus(
    n_topics: usize,
    n_questions: usize,
    n_paraphrases: usize,
    languages: &[Language],
) -> Result<Corpus> {
    let mut topics = BTreeMap::new();
    let mut items = Vec::new();
    for t in 0..n_topics {
        let topic_id = format!("t{t}");
        topics.insert(
            topic_id.clone(),
            TopicInfo {
                name: format!("synthetic topic {t}"),
                description: format!("synthetic policy area {t}"),
            },
        );
        for q in 0..n_questions {
            let question_id = format!("q{q}");
            for &language in languages {
                let (yes, no) = yes_no(language);
                let wording = |r: usize| {
                    if r == 0 {
                        format!("Should synthetic policy {t}-{q} be adopted? [{}]", language.code())
                    } else {
                        format!(
                            "Should synthetic policy {t}-{q} be adopted? (wording {r}) [{}]",
                            language.code()
                        )
                    }
                };
                let paraphrases: Vec<String> = (0..n_paraphrases.max(1)).map(wording).collect();
                items.push(QuestionItem {
                    topic_id: topic_id.clone(),
                    question_id: question_id.clone(),
                    canonical_text: paraphrases[0].clone(),
                    paraphrases,
                    choices: vec![
                        Choice { text: yes.to_string(), stance: Stance::Supports },
                        Choice { text: no.to_string(), stance: Stance::Opposes },
                    ],
                    language,
                    country: country_of(language),
                    controversial: false,
                    translated: language != Language::Eng,
                });
            }
        }
    }
    let provenance = Provenance {
        generator_model: "synthetic".into(),
        generated_at: 0,
        prompt_versions: BTreeMap::new(),
    };
    Ok(Corpus::new(provenance, topics, items)?)
}

/// What a mock endpoint sends back for one prompt.
pub enum MockReply {
    /// Plain message content, no logprobs.
    Text(String),
    /// Message content plus first-token top logprobs.
    Letters { content: String, logprobs: Vec<(String, f64)> },
}

/// A scripted reply: either message content or an HTTP failure, for
/// exercising error paths.
pub enum ScriptedReply {
    Text(String),
    Failure { status: u16, body: String },
}

/// A local chat-completions server; shuts down when dropped.
pub struct MockServer {
    server: Arc<tiny_http::Server>,
    handle: Option<std::thread::JoinHandle<()>>,
    base_url: String,
}

impl MockServer {
    fn spawn<F>(handler: F) -> Result<MockServer>
    where
        F: Fn(&str, u32) -> std::result::Result<MockReply, (u16, String)> + Send + 'static,
    {
        let server = Arc::new(
            tiny_http::Server::http("127.0.0.1:0").map_err(|e| SimulatorError::Bind(e.to_string()))?,
        );
        let port = match server.server_addr() {
            tiny_http::ListenAddr::IP(addr) => addr.port(),
            _ => unreachable!("tcp listener"),
        };
        let worker = server.clone();
        let handle = std::thread::spawn(move || {
            for mut request in worker.incoming_requests() {
                let mut body = String::new();
                let _ = request.as_reader().read_to_string(&mut body);
                let (status, reply_body) = match parse_request(&body) {
                    Ok((prompt, top_logprobs)) => match handler(&prompt, top_logprobs) {
                        Ok(reply) => (200u16, reply_json(&reply).to_string()),
                        Err((status, body)) => (status, body),
                    },
                    Err(message) => (400, serde_json::json!({ "error": message }).to_string()),
                };
                let response = tiny_http::Response::from_string(reply_body)
                    .with_status_code(status)
                    .with_header(
                        "Content-Type: application/json".parse::<tiny_http::Header>().unwrap(),
                    );
                let _ = request.respond(response);
            }
        });
        Ok(MockServer {
            server,
            handle: Some(handle),
            base_url: format!("http://127.0.0.1:{port}/v1"),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// A ready-to-use endpoint pointing at this server.
    pub fn endpoint(&self, model_name: &str) -> ModelEndpoint {
        ModelEndpoint {
            base_url: self.base_url.clone(),
            model_name: model_name.to_string(),
            auth_token_env: None,
            max_concurrent: 4,
            request_timeout_secs: 10,
            supports_logprobs: true,
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn parse_request(body: &str) -> std::result::Result<(String, u32), String> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| format!("request is not JSON: {e}"))?;
    let prompt = value["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .ok_or("request carries no message content")?
        .to_string();
    let top_logprobs = value["top_logprobs"].as_u64().unwrap_or(0) as u32;
    Ok((prompt, top_logprobs))
}

fn reply_json(reply: &MockReply) -> serde_json::Value {
    match reply {
        MockReply::Text(content) => serde_json::json!({
            "choices": [{ "message": { "role": "assistant", "content": content } }]
        }),
        MockReply::Letters { content, logprobs } => {
            let top: Vec<serde_json::Value> = logprobs
                .iter()
                .map(|(token, logprob)| serde_json::json!({ "token": token, "logprob": logprob }))
                .collect();
            serde_json::json!({
                "choices": [{
                    "message": { "role": "assistant", "content": content },
                    "logprobs": { "content": [{
                        "token": logprobs.first().map(|(t, _)| t.clone()).unwrap_or_default(),
                        "logprob": logprobs.first().map(|(_, l)| *l).unwrap_or(0.0),
                        "top_logprobs": top
                    }] }
                }]
            })
        }
    }
}

/// Serve `respondent`'s answers to `corpus` as a chat-completions
/// endpoint.
pub fn serve_respondent(corpus: Corpus, respondent: SyntheticRespondent) -> Result<MockServer> {
    let brain = RespondentBrain::new(corpus, respondent)?;
    MockServer::spawn(move |prompt, top_logprobs| {
        brain.reply(prompt, top_logprobs).map_err(|message| {
            (400, serde_json::json!({ "error": message }).to_string())
        })
    })
}

/// Serve canned replies computed from the prompt text; useful for
/// scripting generation-pipeline behaviour in tests.
pub fn serve_scripted<F>(handler: F) -> Result<MockServer>
where
    F: Fn(&str) -> ScriptedReply + Send + 'static,
{
    MockServer::spawn(move |prompt, _top_logprobs| match handler(prompt) {
        ScriptedReply::Text(content) => Ok(MockReply::Text(content)),
        ScriptedReply::Failure { status, body } => Err((status, body)),
    })
}

/// Prompt-understanding and answering logic behind [`serve_respondent`].
struct RespondentBrain {
    corpus: Corpus,
    respondent: SyntheticRespondent,
    /// Any question wording -> (item index, paraphrase index).
    wording_index: HashMap<String, (usize, usize)>,
    /// Portrait statement -> (language, value).
    statement_index: HashMap<&'static str, (Language, &'static str)>,
}

impl RespondentBrain {
    fn new(corpus: Corpus, respondent: SyntheticRespondent) -> Result<RespondentBrain> {
        let mut wording_index = HashMap::new();
        for (item_index, item) in corpus.items.iter().enumerate() {
            for (paraphrase_index, wording) in item.paraphrases.iter().enumerate() {
                if wording_index.insert(wording.clone(), (item_index, paraphrase_index)).is_some() {
                    return Err(SimulatorError::AmbiguousWording(wording.clone()));
                }
            }
        }
        let mut statement_index = HashMap::new();
        for language in [Language::Eng, Language::Chi, Language::Ger, Language::Jpn] {
            if let Some(items) = pvq_items(language) {
                for item in items {
                    statement_index.insert(item.statement, (language, item.value));
                }
            }
        }
        Ok(RespondentBrain { corpus, respondent, wording_index, statement_index })
    }

    fn reply(&self, prompt: &str, top_logprobs: u32) -> std::result::Result<MockReply, String> {
        let route = if prompt.contains(JUDGE_QUESTION) {
            self.judge_reply(prompt)
        } else if [Language::Eng, Language::Chi, Language::Ger, Language::Jpn]
            .iter()
            .any(|&l| prompt.starts_with(pvq_instruction(l)))
        {
            self.pvq_reply(prompt)
        } else if prompt.starts_with(OPEN_PROMPT_LEAD) {
            self.open_reply(prompt)
        } else {
            self.mc_reply(prompt)
        };
        match route {
            Ok(MockReply::Letters { .. }) if top_logprobs == 0 => {
                Err("letter reply to a request without logprobs".into())
            }
            other => other.map_err(|e| e.to_string()),
        }
    }

    fn item_for_wording(&self, wording: &str) -> Result<(&QuestionItem, usize)> {
        let &(item_index, paraphrase_index) = self
            .wording_index
            .get(wording)
            .ok_or_else(|| SimulatorError::BadPrompt(format!("unknown question {wording:?}")))?;
        Ok((&self.corpus.items[item_index], paraphrase_index))
    }

    /// Letter logprobs realizing `support` over the prompt's options.
    fn letters_for(
        &self,
        options: &[(char, String)],
        item: &QuestionItem,
        support: f64,
    ) -> Result<MockReply> {
        let mut stances = Vec::with_capacity(options.len());
        for (_, text) in options {
            let stance = match item.choice_stance(text) {
                Some(stance) => Some(stance),
                None if text == abstain_text(item.language) => None,
                None => {
                    return Err(SimulatorError::BadPrompt(format!(
                        "option {text:?} is not an answer to {}",
                        item.coordinate()
                    )))
                }
            };
            stances.push(stance);
        }
        let has_abstain = stances.iter().any(|s| s.is_none());
        let abstain_mass = if has_abstain { self.respondent.abstain_mass } else { 0.0 };
        let scale = 1.0 - abstain_mass;
        let count_of = |target: Stance| {
            stances.iter().filter(|s| **s == Some(target)).count().max(1) as f64
        };
        let abstain_count = stances.iter().filter(|s| s.is_none()).count().max(1) as f64;
        let logprobs: Vec<(String, f64)> = options
            .iter()
            .zip(&stances)
            .map(|((letter, _), stance)| {
                let p = match stance {
                    Some(Stance::Supports) => support * scale / count_of(Stance::Supports),
                    Some(Stance::Opposes) => (1.0 - support) * scale / count_of(Stance::Opposes),
                    Some(Stance::Neutral) => 0.0,
                    None => abstain_mass / abstain_count,
                };
                (format!(" {letter}"), p.max(1e-12).ln())
            })
            .collect();
        let top = logprobs
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t.trim().to_string())
            .unwrap_or_default();
        Ok(MockReply::Letters { content: top, logprobs })
    }

    fn mc_reply(&self, prompt: &str) -> Result<MockReply> {
        let lines: Vec<&str> = prompt.lines().collect();
        let (start, end) = last_option_block(&lines)
            .ok_or_else(|| SimulatorError::BadPrompt("no option lines".into()))?;
        if start == 0 {
            return Err(SimulatorError::BadPrompt("options without a question".into()));
        }
        let options = parse_option_lines(&lines[start..end])?;
        let (item, paraphrase_index) = self.item_for_wording(lines[start - 1])?;
        let value_condition = parse_value_condition(prompt);
        let support = self.respondent.support_probability(&AnswerCoordinates {
            topic_id: &item.topic_id,
            question_id: &item.question_id,
            paraphrase_index,
            paraphrase_count: item.paraphrases.len(),
            language: item.language,
            use_case: UseCase::MultipleChoice,
            value_condition: value_condition.as_deref(),
        })?;
        self.letters_for(&options, item, support)
    }

    fn open_reply(&self, prompt: &str) -> Result<MockReply> {
        let wording = parse_quoted_question(prompt)
            .ok_or_else(|| SimulatorError::BadPrompt("no quoted question".into()))?;
        let (item, paraphrase_index) = self.item_for_wording(wording)?;
        let value_condition = parse_value_condition(prompt);
        let support = self.respondent.support_probability(&AnswerCoordinates {
            topic_id: &item.topic_id,
            question_id: &item.question_id,
            paraphrase_index,
            paraphrase_count: item.paraphrases.len(),
            language: item.language,
            use_case: UseCase::OpenEnded,
            value_condition: value_condition.as_deref(),
        })?;
        // The shortest-roundtrip float format makes the marker lossless.
        Ok(MockReply::Text(format!(
            "Weighing the considerations this question raises, the overall case \
             leans one way on balance. <<support={support}>>"
        )))
    }

    fn judge_reply(&self, prompt: &str) -> Result<MockReply> {
        let support = parse_support_marker(prompt)
            .ok_or_else(|| SimulatorError::BadPrompt("passage carries no support marker".into()))?;
        let wording = parse_quoted_question(prompt)
            .ok_or_else(|| SimulatorError::BadPrompt("no quoted question".into()))?;
        let (item, _) = self.item_for_wording(wording)?;
        let lines: Vec<&str> = prompt.lines().collect();
        let (start, end) = last_option_block(&lines)
            .ok_or_else(|| SimulatorError::BadPrompt("no option lines".into()))?;
        let options = parse_option_lines(&lines[start..end])?;
        self.letters_for(&options, item, support)
    }

    fn pvq_reply(&self, prompt: &str) -> Result<MockReply> {
        let segments: Vec<&str> = prompt.split("\n\n").collect();
        if segments.len() < 3 {
            return Err(SimulatorError::BadPrompt("malformed portrait prompt".into()));
        }
        let statement = segments[1];
        let &(language, value) = self
            .statement_index
            .get(statement)
            .ok_or_else(|| SimulatorError::BadPrompt(format!("unknown statement {statement:?}")))?;
        let value_condition = parse_value_condition(prompt);
        let like = self.respondent.pvq_like_probability(value, value_condition.as_deref());
        let lines: Vec<&str> = prompt.lines().collect();
        let (start, end) = last_option_block(&lines)
            .ok_or_else(|| SimulatorError::BadPrompt("no option lines".into()))?;
        let options = parse_option_lines(&lines[start..end])?;
        let (like_text, _) = pvq_choices(language);
        let logprobs: Vec<(String, f64)> = options
            .iter()
            .map(|(letter, text)| {
                let p = if text == like_text { like } else { 1.0 - like };
                (format!(" {letter}"), p.max(1e-12).ln())
            })
            .collect();
        let top = logprobs
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t.trim().to_string())
            .unwrap_or_default();
        Ok(MockReply::Letters { content: top, logprobs })
    }
}

/// Bounds of the last contiguous run of `- (X) ...` lines.
fn last_option_block(lines: &[&str]) -> Option<(usize, usize)> {
    let mut block = None;
    let mut run_start = None;
    for (i, line) in lines.iter().enumerate() {
        if line.starts_with("- (") {
            run_start.get_or_insert(i);
        } else if let Some(start) = run_start.take() {
            block = Some((start, i));
        }
    }
    if let Some(start) = run_start {
        block = Some((start, lines.len()));
    }
    block
}

fn parse_option_lines(lines: &[&str]) -> Result<Vec<(char, String)>> {
    lines
        .iter()
        .map(|line| {
            let rest = line
                .strip_prefix("- (")
                .ok_or_else(|| SimulatorError::BadPrompt(format!("not an option line: {line:?}")))?;
            let letter = rest
                .chars()
                .next()
                .filter(char::is_ascii_uppercase)
                .ok_or_else(|| SimulatorError::BadPrompt(format!("no letter in {line:?}")))?;
            let text = rest
                .get(1..)
                .and_then(|r| r.strip_prefix(") "))
                .ok_or_else(|| SimulatorError::BadPrompt(format!("malformed option {line:?}")))?;
            Ok((letter, text.to_string()))
        })
        .collect()
}

/// The value name in a steering sentence, if the prompt carries one.
fn parse_value_condition(prompt: &str) -> Option<String> {
    let start = prompt.find(VALUE_SENTENCE_PREFIX)? + VALUE_SENTENCE_PREFIX.len();
    let rest = &prompt[start..];
    let end = rest.find('.')?;
    Some(rest[..end].to_string())
}

/// The last `Question: "..."` in the prompt.
fn parse_quoted_question(prompt: &str) -> Option<&str> {
    let marker = "Question: \"";
    let start = prompt.rfind(marker)? + marker.len();
    let rest = &prompt[start..];
    let end = rest.find('"')?;
    Some(&rest[..end])
}

/// The support level embedded in a synthetic open-ended passage.
fn parse_support_marker(text: &str) -> Option<f64> {
    let start = text.find("<<support=")? + "<<support=".len();
    let rest = &text[start..];
    let end = rest.find(">>")?;
    rest[..end].parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn respondent() -> SyntheticRespondent {
        let mut stances = BTreeMap::new();
        stances.insert("t0".to_string(), 0.62);
        stances.insert("t1".to_string(), 0.38);
        SyntheticRespondent::noiseless(9, stances)
    }

    fn coords<'a>(
        topic: &'a str,
        question: &'a str,
        index: usize,
        language: Language,
        use_case: UseCase,
    ) -> AnswerCoordinates<'a> {
        AnswerCoordinates {
            topic_id: topic,
            question_id: question,
            paraphrase_index: index,
            paraphrase_count: 3,
            language,
            use_case,
            value_condition: None,
        }
    }

    #[test]
    fn zero_noise_reproduces_the_topic_stance_exactly() {
        let r = respondent();
        for (index, language, use_case) in [
            (0, Language::Eng, UseCase::MultipleChoice),
            (2, Language::Chi, UseCase::OpenEnded),
        ] {
            let s = r.support_probability(&coords("t0", "q0", index, language, use_case)).unwrap();
            assert_eq!(s, 0.62);
        }
        assert!(matches!(
            r.support_probability(&coords("tx", "q0", 0, Language::Eng, UseCase::MultipleChoice)),
            Err(SimulatorError::UnknownTopic(_))
        ));
    }

    #[test]
    fn paraphrase_noise_is_centered_within_a_question() {
        let mut r = respondent();
        r.paraphrase_noise = 0.2;
        let supports: Vec<f64> = (0..3)
            .map(|index| {
                r.support_probability(&coords("t0", "q0", index, Language::Eng, UseCase::MultipleChoice))
                    .unwrap()
            })
            .collect();
        let mean = supports.iter().sum::<f64>() / 3.0;
        assert!((mean - 0.62).abs() < 1e-12, "marginal must equal the base stance, got {mean}");
        assert!(supports.iter().any(|&s| (s - 0.62).abs() > 1e-3), "noise must actually move answers");
    }

    #[test]
    fn each_noise_axis_is_keyed_only_by_its_own_coordinate() {
        let mut r = respondent();
        r.question_noise = 0.2;
        r.language_noise = 0.2;
        r.usecase_noise = 0.2;

        // Question noise: same draw for all paraphrases/languages/usecases
        // of one question, different across questions.
        let base = r.support_probability(&coords("t0", "q0", 0, Language::Eng, UseCase::MultipleChoice)).unwrap();
        let other_question =
            r.support_probability(&coords("t0", "q1", 0, Language::Eng, UseCase::MultipleChoice)).unwrap();
        assert_ne!(base, other_question);

        // Language noise: shifts every question of a language equally.
        let ger_q0 = r.support_probability(&coords("t0", "q0", 0, Language::Ger, UseCase::MultipleChoice)).unwrap();
        let ger_q1 = r.support_probability(&coords("t0", "q1", 0, Language::Ger, UseCase::MultipleChoice)).unwrap();
        assert!(((ger_q0 - base) - (ger_q1 - other_question)).abs() < 1e-12);

        // Use-case noise: same shift regardless of question.
        let oe_q0 = r.support_probability(&coords("t0", "q0", 0, Language::Eng, UseCase::OpenEnded)).unwrap();
        let oe_q1 = r.support_probability(&coords("t0", "q1", 0, Language::Eng, UseCase::OpenEnded)).unwrap();
        assert!(((oe_q0 - base) - (oe_q1 - other_question)).abs() < 1e-12);
    }

    #[test]
    fn only_the_relevant_value_moves_answers() {
        let mut r = respondent();
        r.relevant_value = Some("security".into());
        r.value_sensitivity = 0.5;
        let mut c = coords("t0", "q0", 0, Language::Eng, UseCase::MultipleChoice);
        let baseline = r.support_probability(&c).unwrap();
        assert_eq!(baseline, 0.62);

        c.value_condition = Some("security");
        let steered = r.support_probability(&c).unwrap();
        // s + 0.5 * (1 - 2s) at s = 0.62 gives 0.5.
        assert!((steered - 0.5).abs() < 1e-12);

        c.value_condition = Some("hedonism");
        assert_eq!(r.support_probability(&c).unwrap(), baseline);
    }

    #[test]
    fn population_stances_stay_in_the_clamp_safe_band() {
        let topics = vec!["t0".to_string(), "t1".to_string()];
        let noise = NoiseProfile { paraphrase: 0.1, ..Default::default() };
        let population = synthetic_population(3, 20, &topics, &noise);
        assert_eq!(population.len(), 20);
        for respondent in &population {
            assert_eq!(respondent.paraphrase_noise, 0.1);
            for &theta in respondent.topic_stances.values() {
                assert!((0.25..=0.75).contains(&theta), "theta = {theta}");
            }
        }
        // Deterministic in the seed.
        let again = synthetic_population(3, 20, &topics, &noise);
        assert_eq!(population, again);
        let different = synthetic_population(4, 20, &topics, &noise);
        assert_ne!(population, different);
    }

    #[test]
    fn synthetic_corpus_validates_and_aligns_paraphrases() {
        let corpus =
            synthetic_corpus(2, 3, 4, &[Language::Eng, Language::Ger]).unwrap();
        assert_eq!(corpus.topics.len(), 2);
        assert_eq!(corpus.items.len(), 2 * 3 * 2);
        for item in &corpus.items {
            assert_eq!(item.paraphrases.len(), 4);
            assert_eq!(item.canonical_text, item.paraphrases[0]);
        }
        let eng = corpus.find_item("t0", "q0", Language::Eng).unwrap();
        let ger = corpus.find_item("t0", "q0", Language::Ger).unwrap();
        assert_ne!(eng.paraphrases[1], ger.paraphrases[1]);
        assert_eq!(ger.choices[0].text, "Ja");
    }

    #[test]
    fn prompt_parsers_recover_structure() {
        let lines = vec!["header", "- (A) yes", "- (B) no", "Answer:"];
        assert_eq!(last_option_block(&lines), Some((1, 3)));
        let options = parse_option_lines(&lines[1..3]).unwrap();
        assert_eq!(options, vec![('A', "yes".to_string()), ('B', "no".to_string())]);

        // With an in-context example, only the last block counts.
        let lines = vec!["ex?", "- (A) yes", "- (B) no", "Answer: (A)", "", "real?", "- (A) no", "- (B) yes"];
        assert_eq!(last_option_block(&lines), Some((6, 8)));

        assert_eq!(
            parse_value_condition("Answer according to the value of security.\n\nQ"),
            Some("security".to_string())
        );
        assert_eq!(parse_value_condition("no condition here"), None);
        assert_eq!(parse_quoted_question("x\n\nQuestion: \"A question?\""), Some("A question?"));
        let support = 0.123456789012345_f64;
        let marker = format!("blah <<support={support}>> blah");
        assert_eq!(parse_support_marker(&marker), Some(support));
    }
}

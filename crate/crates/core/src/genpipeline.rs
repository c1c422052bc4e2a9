//! Corpus regeneration: ask a generator model for topics, questions,
//! stance-coded answers, paraphrases, and translations, with mechanical
//! filters between the stages.
//!
//! Every generator call goes through the caching [`Client`], so rerunning
//! a job against an unchanged generator replays from the record log and
//! produces a byte-identical corpus. Malformed structured replies are
//! retried up to [`RETRY_ATTEMPTS`] times with a reminder appended to the
//! prompt (a changed prompt gets its own cache entry, keeping retries
//! replayable too).
//!
//! Nothing is dropped silently: each stage accounts for every requested
//! unit, and [`DropReport::reconciles`] checks that requested minus
//! emitted equals the recorded drop events, stage by stage. Items that
//! pass the mechanical filters but look degraded (for example a
//! paraphrase shortfall) are flagged for human review rather than
//! discarded.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{CallRecord, Client, ClientError, DecodingParams, ModelEndpoint};
use crate::dataset::{
    Choice, Corpus, CorpusError, Country, Language, Provenance, QuestionItem, Stance, TopicInfo,
};

/// How many times a malformed structured reply is re-asked before the
/// pipeline gives up on the call.
pub const RETRY_ATTEMPTS: u32 = 3;

/// Version stamped into `provenance.prompt_versions` for every template
/// in this module; bump when any template text changes.
pub const PROMPT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation job: {0}")]
    InvalidJob(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(
        "generator returned malformed {what} output {attempts} time(s); last reply: {raw:?}"
    )]
    MalformedReply { what: &'static str, attempts: u32, raw: String },
    #[error("generator returned an empty {what} list")]
    EmptyReply { what: &'static str },
    #[error("answer {answer:?} is labeled {stance:?}, which is not a stance")]
    UnknownStance { answer: String, stance: String },
    #[error("translation of {subject} returned {got} string(s), expected {expected}")]
    TranslationShape { subject: String, expected: usize, got: usize },
    #[error("generator returned an empty context statement")]
    EmptyContext,
}

pub type Result<T> = std::result::Result<T, GenError>;

/// Everything a regeneration run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub country: Country,
    pub language: Language,
    /// Ask for contested topics (true) or uncontroversial ones (false).
    pub controversial: bool,
    pub n_topics: usize,
    pub n_questions_per_topic: usize,
    /// Extra wordings requested per question, beyond the canonical one.
    pub n_paraphrases: usize,
    pub generator: ModelEndpoint,
    #[serde(default)]
    pub target_translation_languages: Vec<Language>,
}

impl GenerationJob {
    pub fn validate(&self) -> Result<()> {
        for (count, what) in [
            (self.n_topics, "n_topics"),
            (self.n_questions_per_topic, "n_questions_per_topic"),
            (self.n_paraphrases, "n_paraphrases"),
        ] {
            if count < 1 {
                return Err(GenError::InvalidJob(format!("{what} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// A generated topic before it is assigned an id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub description: String,
}

/// Why a requested unit was not emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    /// Fewer usable topics than requested (duplicates or a short reply).
    TopicShortfall,
    /// Fewer usable questions than requested for a topic.
    QuestionShortfall,
    /// The filter judged the question not recognizably about its topic.
    TopicMismatch,
    /// The filter reply never parsed as true/false; dropped conservatively.
    FilterUnparseable,
    /// The generator declared the question unanswerable by a closed set.
    OpenEndedQuestion,
    /// The answer set lacked a supporting or an opposing choice.
    OneSidedAnswers,
    /// Fewer usable paraphrases than requested for a question.
    ParaphraseShortfall,
}

impl DropReason {
    pub fn as_label(self) -> &'static str {
        match self {
            DropReason::TopicShortfall => "topic_shortfall",
            DropReason::QuestionShortfall => "question_shortfall",
            DropReason::TopicMismatch => "topic_mismatch",
            DropReason::FilterUnparseable => "filter_unparseable",
            DropReason::OpenEndedQuestion => "open_ended_question",
            DropReason::OneSidedAnswers => "one_sided_answers",
            DropReason::ParaphraseShortfall => "paraphrase_shortfall",
        }
    }

    /// Which requested unit one event of this reason accounts for.
    pub fn unit(self) -> &'static str {
        match self {
            DropReason::TopicShortfall => "topic",
            DropReason::ParaphraseShortfall => "paraphrase",
            _ => "question",
        }
    }
}

/// One requested-but-not-emitted unit, with enough detail to audit why.
#[derive(Clone, Debug, PartialEq)]
pub struct DropEvent {
    pub reason: DropReason,
    /// The topic name or question the event is about.
    pub subject: String,
    pub detail: String,
}

/// Where every requested unit of a run went.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DropReport {
    pub requested_topics: usize,
    pub emitted_topics: usize,
    pub requested_questions: usize,
    pub emitted_questions: usize,
    pub requested_paraphrases: usize,
    pub emitted_paraphrases: usize,
    pub events: Vec<DropEvent>,
    /// Human-review export: items kept despite looking degraded.
    pub flagged: Vec<String>,
}

impl DropReport {
    pub fn count(&self, reason: DropReason) -> usize {
        self.events.iter().filter(|e| e.reason == reason).count()
    }

    fn unit_drops(&self, unit: &str) -> usize {
        self.events.iter().filter(|e| e.reason.unit() == unit).count()
    }

    /// True when requested − emitted equals the recorded drops for every
    /// stage; the pipeline's bookkeeping invariant.
    pub fn reconciles(&self) -> bool {
        self.requested_topics - self.emitted_topics == self.unit_drops("topic")
            && self.requested_questions - self.emitted_questions == self.unit_drops("question")
            && self.requested_paraphrases - self.emitted_paraphrases
                == self.unit_drops("paraphrase")
    }

    /// Write the report as CSV: one row per drop event, then one row per
    /// flagged item.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "reason", "unit", "subject", "detail"])?;
        for event in &self.events {
            w.write_record([
                "drop",
                event.reason.as_label(),
                event.reason.unit(),
                &event.subject,
                &event.detail,
            ])?;
        }
        for flag in &self.flagged {
            w.write_record(["flag", "needs_review", "item", flag, ""])?;
        }
        w.flush()
    }
}

/// A validated corpus plus the accounting of everything that was asked
/// for and did not make it in.
#[derive(Clone, Debug)]
pub struct GenerationOutcome {
    pub corpus: Corpus,
    pub report: DropReport,
}

/// Outcome of asking for a question's answer set.
#[derive(Clone, Debug, PartialEq)]
pub enum AnswerOutcome {
    Choices(Vec<Choice>),
    /// The generator declared the question open-ended.
    OpenEnded,
    /// Parsed fine but had no supporting or no opposing answer.
    OneSided(Vec<Choice>),
}

/// Outcome of the topic-match filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterVerdict {
    Keep,
    Drop,
    /// Never parsed as true/false; treated as a drop, flagged as such.
    Unparseable,
}

fn debate_kind(controversial: bool) -> &'static str {
    if controversial {
        "contested"
    } else {
        "uncontested"
    }
}

/// Prompt asking for the job's topic list as a JSON array.
pub fn topics_prompt(job: &GenerationJob) -> String {
    format!(
        "Name {n} {kind} topics of public debate in the {country}. Write in {language}. \
         Reply with only a JSON array of objects of the form \
         {{\"name\": \"...\", \"description\": \"...\"}}, one per topic, \
         where the description is a single sentence.",
        n = job.n_topics,
        kind = debate_kind(job.controversial),
        country = job.country.name(),
        language = job.language.english_name(),
    )
}

/// Prompt asking for yes-or-no questions about one topic.
pub fn questions_prompt(topic: &TopicSpec, job: &GenerationJob) -> String {
    format!(
        "Write {n} distinct yes-or-no questions about the topic \"{name}\" ({description}). \
         Each question must make clear on its own which topic it is about. \
         Write in {language}. Reply with only a JSON array of strings.",
        n = job.n_questions_per_topic,
        name = topic.name,
        description = topic.description,
        language = job.language.english_name(),
    )
}

/// Prompt asking for a question's answer set, labeled by stance.
pub fn answers_prompt(topic: &TopicSpec, question: &str) -> String {
    format!(
        "Consider this question about {name}: \"{question}\" \
         List the short answers someone could give, and label each answer \
         \"supports\", \"opposes\", or \"neutral\" according to its stance toward {name}. \
         Reply with only a JSON object mapping each answer to its label. \
         If the question has no small closed set of answers, reply with exactly the \
         word open-ended instead.",
        name = topic.name,
        question = question,
    )
}

/// Prompt asking for alternative wordings of a question.
pub fn paraphrases_prompt(question: &str, n: usize, job: &GenerationJob) -> String {
    format!(
        "Rewrite this question in {n} different ways that keep exactly the same meaning \
         and the same possible answers: \"{question}\" \
         Write in {language}. Reply with only a JSON array of strings.",
        n = n,
        question = question,
        language = job.language.english_name(),
    )
}

/// Prompt asking whether a question is recognizably about its topic.
pub fn topic_filter_prompt(topic: &TopicSpec, question: &str) -> String {
    format!(
        "Here is a question: \"{question}\" \
         Would someone who reads only this question know that it is about \"{name}\"? \
         Reply with exactly true or false.",
        question = question,
        name = topic.name,
    )
}

/// Prompt asking for a faithful translation of a batch of strings.
pub fn translation_prompt(texts: &[String], target: Language) -> String {
    format!(
        "Translate every string in this JSON array into {language}, keeping the order \
         and the number of entries. Reply with only the translated JSON array.\n{json}",
        language = target.english_name(),
        json = serde_json::to_string(texts).expect("strings serialize"),
    )
}

/// Prompt asking for one sentence of context that would push the answer.
pub fn bias_context_prompt(question: &str, answer: &str) -> String {
    format!(
        "Name one additional fact or circumstance that would lead a reasonable person \
         to answer \"{answer}\" to this question: \"{question}\" \
         Reply with a single sentence.",
    )
}

/// The prompt actually sent on the `attempt`-th try (1-based): retries
/// append a parse reminder, which also gives each retry its own cache
/// entry.
pub fn with_attempt(base: &str, attempt: u32) -> String {
    if attempt <= 1 {
        base.to_string()
    } else {
        format!(
            "{base}\n\nYour previous reply could not be parsed. \
             Reply with only the requested JSON. (attempt {attempt})"
        )
    }
}

/// The first well-formed JSON value of type `T` found in `text`, however
/// much prose surrounds it.
fn first_json_value<T: serde::de::DeserializeOwned>(text: &str) -> Option<T> {
    for (index, ch) in text.char_indices() {
        if ch != '[' && ch != '{' {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&text[index..]);
        if let Ok(value) = T::deserialize(&mut de) {
            return Some(value);
        }
    }
    None
}

/// Dedupe key for topic names: case, surrounding space, internal runs of
/// whitespace, and trailing punctuation are not distinctions.
fn normalize_name(s: &str) -> String {
    s.trim()
        .trim_end_matches(['.', '!', '?'])
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Dedupe key for question texts: like [`normalize_name`] but keeps the
/// trailing question mark meaningful.
fn normalize_question(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// True/false token with lenient surface normalization and strict
/// semantics: only the two words count.
fn parse_bool_token(s: &str) -> Option<bool> {
    match s.trim().trim_end_matches(['.', '!']).to_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// True when a reply is the open-ended sentinel, allowing quotes and a
/// trailing period around it.
fn is_open_ended_sentinel(s: &str) -> bool {
    s.trim().trim_matches(['"', '\'']).trim_end_matches('.').trim().eq_ignore_ascii_case("open-ended")
}

/// `text` up to its first sentence terminator, and whether that cut
/// anything off.
pub fn first_sentence(text: &str) -> (String, bool) {
    let trimmed = text.trim();
    if let Some(position) = trimmed.find(['.', '!', '?', '\n']) {
        let end = position + trimmed[position..].chars().next().map_or(1, char::len_utf8);
        let cut = trimmed[end..].trim();
        (trimmed[..end].trim_end().to_string(), !cut.is_empty())
    } else {
        (trimmed.to_string(), false)
    }
}

/// Runs one generation job's calls through a caching client, tracking the
/// newest generator interaction for provenance.
pub struct Generator<'a> {
    client: &'a Client,
    job: &'a GenerationJob,
    latest_timestamp: u64,
    /// Odd-but-kept events worth surfacing (truncations, conservative
    /// filter decisions), in occurrence order.
    pub notes: Vec<String>,
}

impl<'a> Generator<'a> {
    pub fn new(client: &'a Client, job: &'a GenerationJob) -> Result<Self> {
        job.validate()?;
        Ok(Generator { client, job, latest_timestamp: 0, notes: Vec::new() })
    }

    /// Unix timestamp of the newest generator call used so far (cache
    /// hits keep their original stamp, so reruns do not move this).
    pub fn latest_timestamp(&self) -> u64 {
        self.latest_timestamp
    }

    fn ask(&mut self, prompt: &str) -> Result<CallRecord> {
        let record = self.client.call(&self.job.generator, prompt, &DecodingParams::open_ended())?;
        self.latest_timestamp = self.latest_timestamp.max(record.timestamp);
        Ok(record)
    }

    /// Ask for structured output, retrying on malformed replies.
    fn ask_structured<T: serde::de::DeserializeOwned>(
        &mut self,
        what: &'static str,
        base_prompt: &str,
    ) -> Result<T> {
        let mut last_raw = String::new();
        for attempt in 1..=RETRY_ATTEMPTS {
            let record = self.ask(&with_attempt(base_prompt, attempt))?;
            let content = record.content.unwrap_or_default();
            if let Some(value) = first_json_value::<T>(&content) {
                return Ok(value);
            }
            last_raw = content;
        }
        Err(GenError::MalformedReply { what, attempts: RETRY_ATTEMPTS, raw: last_raw })
    }

    /// Ask for the job's topics. Returns at most `n_topics` deduplicated
    /// topics plus one shortfall event per missing slot.
    pub fn generate_topics(&mut self) -> Result<(Vec<TopicSpec>, Vec<DropEvent>)> {
        let prompt = topics_prompt(self.job);
        let parsed: Vec<TopicSpec> = self.ask_structured("topic list", &prompt)?;
        if parsed.is_empty() {
            return Err(GenError::EmptyReply { what: "topic" });
        }
        let total = parsed.len();
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        let mut duplicates = 0usize;
        for topic in parsed {
            if !seen.insert(normalize_name(&topic.name)) {
                duplicates += 1;
            } else if kept.len() < self.job.n_topics {
                kept.push(topic);
            }
        }
        let events = shortfall_events(
            DropReason::TopicShortfall,
            "topic list",
            self.job.n_topics,
            kept.len(),
            total,
            duplicates,
        );
        Ok((kept, events))
    }

    /// Ask for one topic's questions, deduplicated the same way.
    pub fn generate_questions(&mut self, topic: &TopicSpec) -> Result<(Vec<String>, Vec<DropEvent>)> {
        let prompt = questions_prompt(topic, self.job);
        let parsed: Vec<String> = self.ask_structured("question list", &prompt)?;
        if parsed.is_empty() {
            return Err(GenError::EmptyReply { what: "question" });
        }
        let total = parsed.len();
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        let mut duplicates = 0usize;
        for question in parsed {
            if !seen.insert(normalize_question(&question)) {
                duplicates += 1;
            } else if kept.len() < self.job.n_questions_per_topic {
                kept.push(question);
            }
        }
        let events = shortfall_events(
            DropReason::QuestionShortfall,
            &topic.name,
            self.job.n_questions_per_topic,
            kept.len(),
            total,
            duplicates,
        );
        Ok((kept, events))
    }

    /// Ask for a question's answers and their stance labels.
    pub fn generate_answers(&mut self, topic: &TopicSpec, question: &str) -> Result<AnswerOutcome> {
        let base_prompt = answers_prompt(topic, question);
        let mut last_raw = String::new();
        for attempt in 1..=RETRY_ATTEMPTS {
            let record = self.ask(&with_attempt(&base_prompt, attempt))?;
            let content = record.content.unwrap_or_default();
            if is_open_ended_sentinel(&content) {
                return Ok(AnswerOutcome::OpenEnded);
            }
            if let Some(map) = first_json_value::<BTreeMap<String, String>>(&content) {
                let mut choices = Vec::with_capacity(map.len());
                for (answer, label) in map {
                    let stance = Stance::parse(label.trim().to_lowercase().as_str()).ok_or(
                        GenError::UnknownStance { answer: answer.clone(), stance: label },
                    )?;
                    choices.push(Choice { text: answer, stance });
                }
                let has = |s: Stance| choices.iter().any(|c| c.stance == s);
                return Ok(if has(Stance::Supports) && has(Stance::Opposes) {
                    AnswerOutcome::Choices(choices)
                } else {
                    AnswerOutcome::OneSided(choices)
                });
            }
            last_raw = content;
        }
        Err(GenError::MalformedReply { what: "answer map", attempts: RETRY_ATTEMPTS, raw: last_raw })
    }

    /// Ask for `n_paraphrases` rewordings of a question. Exact duplicates
    /// — of the canonical wording or of an earlier paraphrase — are
    /// dropped; anything subtler (changed capitalization, punctuation) is
    /// kept.
    pub fn generate_paraphrases(&mut self, question: &str) -> Result<(Vec<String>, Vec<DropEvent>)> {
        let n = self.job.n_paraphrases;
        let prompt = paraphrases_prompt(question, n, self.job);
        let parsed: Vec<String> = self.ask_structured("paraphrase list", &prompt)?;
        let total = parsed.len();
        let mut kept: Vec<String> = Vec::new();
        let mut duplicates = 0usize;
        for paraphrase in parsed {
            if paraphrase == question || kept.contains(&paraphrase) {
                duplicates += 1;
            } else if kept.len() < n {
                kept.push(paraphrase);
            }
        }
        let events =
            shortfall_events(DropReason::ParaphraseShortfall, question, n, kept.len(), total, duplicates);
        Ok((kept, events))
    }

    /// Ask whether a question is recognizably about its topic. A reply
    /// that never parses as true/false is conservatively a drop.
    pub fn topic_match_filter(&mut self, topic: &TopicSpec, question: &str) -> Result<FilterVerdict> {
        let base_prompt = topic_filter_prompt(topic, question);
        for attempt in 1..=RETRY_ATTEMPTS {
            let record = self.ask(&with_attempt(&base_prompt, attempt))?;
            match record.content.as_deref().and_then(parse_bool_token) {
                Some(true) => return Ok(FilterVerdict::Keep),
                Some(false) => return Ok(FilterVerdict::Drop),
                None => continue,
            }
        }
        self.notes.push(format!(
            "topic filter never parsed for {question:?}; dropped conservatively"
        ));
        Ok(FilterVerdict::Unparseable)
    }

    /// Translate every text of every item into `target`, preserving ids,
    /// stance codes, and flags other than `language`/`translated`.
    pub fn translate_corpus(&mut self, corpus: &Corpus, target: Language) -> Result<Corpus> {
        let mut items = Vec::with_capacity(corpus.items.len());
        for item in &corpus.items {
            let mut texts: Vec<String> = item.paraphrases.clone();
            texts.extend(item.choices.iter().map(|c| c.text.clone()));
            let translated: Vec<String> =
                self.ask_structured("translation", &translation_prompt(&texts, target))?;
            if translated.len() != texts.len() {
                return Err(GenError::TranslationShape {
                    subject: item.coordinate(),
                    expected: texts.len(),
                    got: translated.len(),
                });
            }
            let (wordings, choice_texts) = translated.split_at(item.paraphrases.len());
            items.push(QuestionItem {
                topic_id: item.topic_id.clone(),
                question_id: item.question_id.clone(),
                canonical_text: wordings[0].clone(),
                paraphrases: wordings.to_vec(),
                choices: item
                    .choices
                    .iter()
                    .zip(choice_texts)
                    .map(|(choice, text)| Choice { text: text.clone(), stance: choice.stance })
                    .collect(),
                language: target,
                country: item.country,
                controversial: item.controversial,
                translated: true,
            });
        }
        let mut provenance = corpus.provenance.clone();
        provenance.generated_at = provenance.generated_at.max(self.latest_timestamp);
        Ok(Corpus::new(provenance, corpus.topics.clone(), items)?)
    }

    /// Ask for one sentence of context that would bias a reader toward
    /// `answer`; longer replies are cut at the first sentence end.
    pub fn generate_bias_context(&mut self, question: &str, answer: &str) -> Result<String> {
        let record = self.ask(&bias_context_prompt(question, answer))?;
        let content = record.content.unwrap_or_default();
        let (sentence, truncated) = first_sentence(&content);
        if sentence.is_empty() {
            return Err(GenError::EmptyContext);
        }
        if truncated {
            self.notes.push(format!(
                "context for {question:?} ran past one sentence; truncated"
            ));
        }
        Ok(sentence)
    }
}

/// One event per missing slot, all carrying the same audit detail.
fn shortfall_events(
    reason: DropReason,
    subject: &str,
    requested: usize,
    kept: usize,
    parsed: usize,
    duplicates: usize,
) -> Vec<DropEvent> {
    (kept..requested)
        .map(|_| DropEvent {
            reason,
            subject: subject.to_string(),
            detail: format!(
                "requested {requested}, usable {kept} (reply listed {parsed}, {duplicates} duplicate(s))"
            ),
        })
        .collect()
}

/// Run a whole generation job: topics, questions, filters, answers,
/// paraphrases, assembly, and translations, all through the cache.
pub fn run_generation(client: &Client, job: &GenerationJob) -> Result<GenerationOutcome> {
    let mut gen = Generator::new(client, job)?;
    let mut report = DropReport { requested_topics: job.n_topics, ..DropReport::default() };

    let (topics, topic_events) = gen.generate_topics()?;
    report.events.extend(topic_events);
    report.emitted_topics = topics.len();

    let mut topic_table = BTreeMap::new();
    let mut items = Vec::new();
    for (topic_index, topic) in topics.iter().enumerate() {
        let topic_id = format!("t{topic_index}");
        topic_table.insert(
            topic_id.clone(),
            TopicInfo { name: topic.name.clone(), description: topic.description.clone() },
        );

        let (questions, question_events) = gen.generate_questions(topic)?;
        report.requested_questions += job.n_questions_per_topic;
        report.events.extend(question_events);

        let mut emitted_in_topic = 0usize;
        for question in questions {
            let drop = |reason: DropReason, detail: String| DropEvent {
                reason,
                subject: question.clone(),
                detail,
            };
            match gen.topic_match_filter(topic, &question)? {
                FilterVerdict::Keep => {}
                FilterVerdict::Drop => {
                    report.events.push(drop(
                        DropReason::TopicMismatch,
                        format!("not recognizably about {:?}", topic.name),
                    ));
                    continue;
                }
                FilterVerdict::Unparseable => {
                    report.events.push(drop(
                        DropReason::FilterUnparseable,
                        format!("filter reply unusable {RETRY_ATTEMPTS} time(s)"),
                    ));
                    continue;
                }
            }
            let choices = match gen.generate_answers(topic, &question)? {
                AnswerOutcome::Choices(choices) => choices,
                AnswerOutcome::OpenEnded => {
                    report.events.push(drop(
                        DropReason::OpenEndedQuestion,
                        "generator declared the question open-ended".into(),
                    ));
                    continue;
                }
                AnswerOutcome::OneSided(choices) => {
                    let labels: Vec<&str> =
                        choices.iter().map(|c| c.stance.as_label()).collect();
                    report.events.push(drop(
                        DropReason::OneSidedAnswers,
                        format!("answer stances were [{}]", labels.join(", ")),
                    ));
                    continue;
                }
            };

            let (paraphrases, paraphrase_events) = gen.generate_paraphrases(&question)?;
            report.requested_paraphrases += job.n_paraphrases;
            report.emitted_paraphrases += paraphrases.len();
            if paraphrases.len() < job.n_paraphrases {
                report.flagged.push(format!(
                    "{}/q{} ({question:?}): only {} of {} paraphrases",
                    topic_id,
                    emitted_in_topic,
                    paraphrases.len(),
                    job.n_paraphrases,
                ));
            }
            report.events.extend(paraphrase_events);

            let mut wordings = Vec::with_capacity(1 + paraphrases.len());
            wordings.push(question.clone());
            wordings.extend(paraphrases);
            items.push(QuestionItem {
                topic_id: topic_id.clone(),
                question_id: format!("q{emitted_in_topic}"),
                canonical_text: question.clone(),
                paraphrases: wordings,
                choices,
                language: job.language,
                country: job.country,
                controversial: job.controversial,
                translated: false,
            });
            emitted_in_topic += 1;
            report.emitted_questions += 1;
        }
    }

    let provenance = Provenance {
        generator_model: job.generator.model_name.clone(),
        generated_at: gen.latest_timestamp(),
        prompt_versions: ["topics", "questions", "answers", "paraphrases", "topic_filter", "translation"]
            .into_iter()
            .map(|name| (name.to_string(), PROMPT_VERSION.to_string()))
            .collect(),
    };
    let base = Corpus::new(provenance, topic_table, items)?;

    let mut all_items = base.items.clone();
    let targets: BTreeSet<Language> = job
        .target_translation_languages
        .iter()
        .copied()
        .filter(|&l| l != job.language)
        .collect();
    for target in targets {
        let translated = gen.translate_corpus(&base, target)?;
        all_items.extend(translated.items);
    }
    let mut provenance = base.provenance.clone();
    provenance.generated_at = gen.latest_timestamp();
    let corpus = Corpus::new(provenance, base.topics.clone(), all_items)?;
    Ok(GenerationOutcome { corpus, report })
}

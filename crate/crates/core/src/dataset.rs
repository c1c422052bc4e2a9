//! Corpus schema and validation: topics, questions, paraphrases, and coded
//! answer choices, plus the projection from answer-option distributions
//! into stance space.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::Distribution;

/// Version stamped into every corpus document this library writes.
pub const CORPUS_SCHEMA_VERSION: u32 = 1;

/// How an answer choice relates to the question's underlying topic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Supports,
    Opposes,
    Neutral,
}

impl Stance {
    pub fn as_label(self) -> &'static str {
        match self {
            Stance::Supports => "supports",
            Stance::Opposes => "opposes",
            Stance::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Stance> {
        match s {
            "supports" => Some(Stance::Supports),
            "opposes" => Some(Stance::Opposes),
            "neutral" => Some(Stance::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Eng,
    Chi,
    Ger,
    Jpn,
}

impl Language {
    pub const ALL: [Language; 4] = [Language::Eng, Language::Chi, Language::Ger, Language::Jpn];

    pub fn code(self) -> &'static str {
        match self {
            Language::Eng => "eng",
            Language::Chi => "chi",
            Language::Ger => "ger",
            Language::Jpn => "jpn",
        }
    }

    pub fn parse(s: &str) -> Option<Language> {
        Language::ALL.iter().copied().find(|l| l.code() == s)
    }

    /// English name of the language, used when prompting a generator to
    /// write in it.
    pub fn english_name(self) -> &'static str {
        match self {
            Language::Eng => "English",
            Language::Chi => "Chinese",
            Language::Ger => "German",
            Language::Jpn => "Japanese",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Country {
    US,
    China,
    Germany,
    Japan,
}

impl Country {
    pub const ALL: [Country; 4] = [Country::US, Country::China, Country::Germany, Country::Japan];

    pub fn name(self) -> &'static str {
        match self {
            Country::US => "US",
            Country::China => "China",
            Country::Germany => "Germany",
            Country::Japan => "Japan",
        }
    }

    pub fn parse(s: &str) -> Option<Country> {
        Country::ALL.iter().copied().find(|c| c.name() == s)
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One selectable answer with its stance code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub text: String,
    pub stance: Stance,
}

/// A question about a topic, together with its paraphrases and coded
/// answer choices. `paraphrases[0]` is always the canonical wording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub topic_id: String,
    pub question_id: String,
    pub canonical_text: String,
    pub paraphrases: Vec<String>,
    pub choices: Vec<Choice>,
    pub language: Language,
    pub country: Country,
    pub controversial: bool,
    pub translated: bool,
}

impl QuestionItem {
    /// Human-readable coordinate used in validation messages.
    pub fn coordinate(&self) -> String {
        format!("{}/{}/{}", self.topic_id, self.question_id, self.language)
    }

    pub fn choice_stance(&self, text: &str) -> Option<Stance> {
        self.choices.iter().find(|c| c.text == text).map(|c| c.stance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub name: String,
    pub description: String,
}

/// Where a corpus came from: enough to replicate the generation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator_model: String,
    /// Unix timestamp (seconds) of the last generator interaction that
    /// contributed to this corpus. Deterministic under cache replay.
    pub generated_at: u64,
    /// Name -> version for each prompt template used during generation.
    pub prompt_versions: BTreeMap<String, String>,
}

/// A full question corpus: items, the topic table they reference, and
/// provenance metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub topics: BTreeMap<String, TopicInfo>,
    pub items: Vec<QuestionItem>,
}

/// A single validation failure, anchored to an item coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub coordinate: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.coordinate, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported corpus schema version {found} (expected {CORPUS_SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("corpus failed validation with {} violation(s):\n{}", .0.len(),
            .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("choice text {text:?} is not an option of item {item}")]
    UnknownChoice { item: String, text: String },
    #[error("all answer mass fell on neutral choices of item {item} with abstention disabled")]
    AllMassNeutral { item: String },
    #[error(transparent)]
    Divergence(#[from] crate::divergence::DivergenceError),
}

type Result<T> = std::result::Result<T, CorpusError>;

impl Corpus {
    pub fn new(
        provenance: Provenance,
        topics: BTreeMap<String, TopicInfo>,
        items: Vec<QuestionItem>,
    ) -> Result<Self> {
        let corpus = Corpus { schema_version: CORPUS_SCHEMA_VERSION, provenance, topics, items };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Check every corpus invariant, collecting all violations rather than
    /// stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.schema_version != CORPUS_SCHEMA_VERSION {
            return Err(CorpusError::SchemaVersion { found: self.schema_version });
        }
        let mut seen_keys = HashSet::new();
        for item in &self.items {
            let at = item.coordinate();
            if item.paraphrases.is_empty() {
                violations.push(Violation { coordinate: at.clone(), message: "item has no paraphrases".into() });
            } else if item.paraphrases[0] != item.canonical_text {
                violations.push(Violation {
                    coordinate: at.clone(),
                    message: "paraphrases[0] does not match canonical_text".into(),
                });
            }
            if item.choices.len() < 2 {
                violations.push(Violation {
                    coordinate: at.clone(),
                    message: format!("item has {} choice(s), need at least 2", item.choices.len()),
                });
            }
            if !item.choices.iter().any(|c| c.stance == Stance::Supports) {
                violations.push(Violation { coordinate: at.clone(), message: "no supporting choice".into() });
            }
            if !item.choices.iter().any(|c| c.stance == Stance::Opposes) {
                violations.push(Violation { coordinate: at.clone(), message: "no opposing choice".into() });
            }
            let mut texts = HashSet::new();
            for c in &item.choices {
                if !texts.insert(c.text.as_str()) {
                    violations.push(Violation {
                        coordinate: at.clone(),
                        message: format!("duplicate choice text {:?}", c.text),
                    });
                }
            }
            if !self.topics.contains_key(&item.topic_id) {
                violations.push(Violation {
                    coordinate: at.clone(),
                    message: format!("topic id {:?} is not in the topic table", item.topic_id),
                });
            }
            if !seen_keys.insert((item.topic_id.clone(), item.question_id.clone(), item.language)) {
                violations.push(Violation {
                    coordinate: at.clone(),
                    message: "duplicate (topic_id, question_id, language) key".into(),
                });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CorpusError::Invalid(violations))
        }
    }

    pub fn find_item(&self, topic_id: &str, question_id: &str, language: Language) -> Option<&QuestionItem> {
        self.items
            .iter()
            .find(|i| i.topic_id == topic_id && i.question_id == question_id && i.language == language)
    }

    pub fn topic_name(&self, topic_id: &str) -> Option<&str> {
        self.topics.get(topic_id).map(|t| t.name.as_str())
    }
}

/// Load and validate a corpus document from disk.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_corpus(&text)
}

/// Parse and validate a corpus document from a JSON string.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let corpus: Corpus = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    corpus.validate()?;
    Ok(corpus)
}

/// Write a corpus as pretty-printed JSON. The output round-trips through
/// [`load_corpus`] unchanged.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(corpus).expect("corpus serializes");
    std::fs::write(path, json)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
}

/// Stance-space labels, in the canonical order used by every stance
/// distribution in this library.
pub fn stance_space(abstain_enabled: bool) -> Vec<String> {
    let mut labels = vec!["supports".to_string(), "opposes".to_string()];
    if abstain_enabled {
        labels.push("neutral".to_string());
    }
    labels
}

/// Text of the abstain option shown to agents, per language.
pub fn abstain_text(language: Language) -> &'static str {
    match language {
        Language::Eng => "I have no answer",
        Language::Chi => "我没有答案",
        Language::Ger => "Ich habe keine Antwort",
        Language::Jpn => "答えはありません",
    }
}

/// Project a distribution over an item's choice texts into stance space.
///
/// Each label must be one of the item's choice texts or the language's
/// abstain text (which counts as neutral). With `abstain_enabled = false`
/// neutral mass is dropped and the remainder renormalized; with it enabled
/// the output keeps a neutral coordinate.
pub fn stance_projection(
    choice_dist: &Distribution,
    item: &QuestionItem,
    abstain_enabled: bool,
) -> Result<Distribution> {
    let mut supports = 0.0;
    let mut opposes = 0.0;
    let mut neutral = 0.0;
    for (label, &p) in choice_dist.labels().iter().zip(choice_dist.probs()) {
        let stance = match item.choice_stance(label) {
            Some(s) => s,
            None if label == abstain_text(item.language) => Stance::Neutral,
            None => {
                return Err(CorpusError::UnknownChoice { item: item.coordinate(), text: label.clone() })
            }
        };
        match stance {
            Stance::Supports => supports += p,
            Stance::Opposes => opposes += p,
            Stance::Neutral => neutral += p,
        }
    }
    let labels = stance_space(abstain_enabled);
    let probs = if abstain_enabled {
        let total = supports + opposes + neutral;
        vec![supports / total, opposes / total, neutral / total]
    } else {
        let total = supports + opposes;
        if total <= 0.0 {
            return Err(CorpusError::AllMassNeutral { item: item.coordinate() });
        }
        vec![supports / total, opposes / total]
    };
    Ok(Distribution::new(labels, probs)?)
}

/// One row of the corpus summary, covering every item that shares a
/// (controversial, translated, language, country) combination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsRow {
    pub controversial: bool,
    pub translated: bool,
    pub language: Language,
    pub country: Country,
    pub topics: usize,
    pub questions: usize,
    pub mean_questions_per_topic: f64,
    pub mean_paraphrases_per_question: f64,
    /// Among items offering a yes-like choice, the fraction where that
    /// choice codes as support. None when no item in the group has one.
    pub yes_codes_support: Option<f64>,
    /// Question-times-paraphrase count: the number of distinct prompts the
    /// group contributes to a survey.
    pub total_questions: usize,
}

fn yes_equivalent(language: Language) -> &'static str {
    match language {
        Language::Eng => "yes",
        Language::Chi => "是",
        Language::Ger => "ja",
        Language::Jpn => "はい",
    }
}

/// Summarize a corpus per (controversial, translated, language, country)
/// group, in deterministic key order.
pub fn corpus_stats(corpus: &Corpus) -> Vec<StatsRow> {
    let mut groups: BTreeMap<(bool, bool, Language, Country), Vec<&QuestionItem>> = BTreeMap::new();
    for item in &corpus.items {
        groups
            .entry((item.controversial, item.translated, item.language, item.country))
            .or_default()
            .push(item);
    }
    groups
        .into_iter()
        .map(|((controversial, translated, language, country), items)| {
            let topics: BTreeSet<&str> = items.iter().map(|i| i.topic_id.as_str()).collect();
            let questions = items.len();
            let total_questions: usize = items.iter().map(|i| i.paraphrases.len()).sum();
            let yes = yes_equivalent(language);
            let with_yes: Vec<&&QuestionItem> = items
                .iter()
                .filter(|i| i.choices.iter().any(|c| c.text.to_lowercase() == yes))
                .collect();
            let yes_codes_support = if with_yes.is_empty() {
                None
            } else {
                let supporting = with_yes
                    .iter()
                    .filter(|i| {
                        i.choices
                            .iter()
                            .any(|c| c.text.to_lowercase() == yes && c.stance == Stance::Supports)
                    })
                    .count();
                Some(supporting as f64 / with_yes.len() as f64)
            };
            StatsRow {
                controversial,
                translated,
                language,
                country,
                topics: topics.len(),
                questions,
                mean_questions_per_topic: questions as f64 / topics.len() as f64,
                mean_paraphrases_per_question: total_questions as f64 / questions as f64,
                yes_codes_support,
                total_questions,
            }
        })
        .collect()
}

/// Render summary rows as CSV.
pub fn stats_to_csv(rows: &[StatsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "controversial",
        "translated",
        "language",
        "country",
        "topics",
        "questions",
        "mean_questions_per_topic",
        "mean_paraphrases_per_question",
        "yes_codes_support",
        "total_questions",
    ])
    .expect("csv header");
    for r in rows {
        w.write_record([
            r.controversial.to_string(),
            r.translated.to_string(),
            r.language.to_string(),
            r.country.to_string(),
            r.topics.to_string(),
            r.questions.to_string(),
            format!("{:.3}", r.mean_questions_per_topic),
            format!("{:.3}", r.mean_paraphrases_per_question),
            r.yes_codes_support.map(|v| format!("{v:.3}")).unwrap_or_default(),
            r.total_questions.to_string(),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
}

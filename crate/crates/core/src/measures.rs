//! Consistency measures over collections of stance distributions.
//!
//! A surveyed agent yields one stance distribution per (topic, question,
//! paraphrase, language, use case) coordinate; a [`ResponseSet`] holds
//! them. Each inconsistency measure picks a group of coordinates that
//! should, for a perfectly consistent agent, carry the same distribution
//! — the paraphrases of one question, the questions of one topic, the two
//! use cases, or the translations of one question — and scores the spread
//! of the group around its generalized Jensen-Shannon centroid. Scores are
//! 0 for identical distributions and grow toward the polarized-answer
//! ceiling for the label-space size.
//!
//! Uncertainty is quantified by a percentile bootstrap over the group's
//! members; tiny groups are enumerated exhaustively instead of sampled.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::UseCase;
use crate::dataset::{abstain_text, stance_space, Corpus, CorpusError, Language, Stance};
use crate::divergence::{dd_divergence, Distribution, DivergenceConfig, DivergenceError};

#[derive(Debug, Error)]
pub enum MeasuresError {
    #[error("duplicate record at {coordinate}")]
    DuplicateRecord { coordinate: String },
    #[error("{coordinate} has {got} paraphrase response(s); need at least 2")]
    NotEnoughParaphrases { coordinate: String, got: usize },
    #[error("topic {topic} has {got} answered question(s); need at least 2")]
    NotEnoughQuestions { topic: String, got: usize },
    #[error("{coordinate} has no {use_case} responses")]
    MissingUseCase { coordinate: String, use_case: String },
    #[error("{coordinate} is answered in {got} language(s); need at least 2")]
    NotEnoughLanguages { coordinate: String, got: usize },
    #[error("{coordinate}: no paraphrase index is answered in every requested language")]
    NoSharedParaphrases { coordinate: String },
    #[error("no records to measure")]
    EmptyInput,
    #[error("invalid bootstrap configuration: {0}")]
    InvalidBootstrap(String),
    #[error("human responses row {row}: {message}")]
    HumanRow { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

pub type Result<T> = std::result::Result<T, MeasuresError>;

/// One stance distribution at one survey coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StanceRecord {
    pub topic_id: String,
    pub question_id: String,
    pub paraphrase_index: usize,
    pub language: Language,
    pub use_case: UseCase,
    pub stance_probs: Distribution,
}

impl StanceRecord {
    pub fn coordinate(&self) -> String {
        format!(
            "{}/{}/r{} {} {}",
            self.topic_id,
            self.question_id,
            self.paraphrase_index,
            self.language.code(),
            self.use_case.name()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct RecordKey {
    topic_id: String,
    question_id: String,
    language: Language,
    use_case: UseCase,
    paraphrase_index: usize,
}

impl RecordKey {
    fn of(record: &StanceRecord) -> RecordKey {
        RecordKey {
            topic_id: record.topic_id.clone(),
            question_id: record.question_id.clone(),
            language: record.language,
            use_case: record.use_case,
            paraphrase_index: record.paraphrase_index,
        }
    }
}

/// All stance records collected from one respondent under one condition.
///
/// Keys are full coordinates, so iteration order — and therefore every
/// score produced from a set — is independent of insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResponseSet {
    records: BTreeMap<RecordKey, StanceRecord>,
}

impl ResponseSet {
    pub fn new() -> ResponseSet {
        ResponseSet::default()
    }

    pub fn insert(&mut self, record: StanceRecord) -> Result<()> {
        let key = RecordKey::of(&record);
        if self.records.contains_key(&key) {
            return Err(MeasuresError::DuplicateRecord { coordinate: record.coordinate() });
        }
        self.records.insert(key, record);
        Ok(())
    }

    pub fn from_records(records: impl IntoIterator<Item = StanceRecord>) -> Result<ResponseSet> {
        let mut set = ResponseSet::new();
        for record in records {
            set.insert(record)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &StanceRecord> {
        self.records.values()
    }

    /// The responses to every paraphrase of one question, ordered by
    /// paraphrase index.
    pub fn paraphrase_group(
        &self,
        topic_id: &str,
        question_id: &str,
        language: Language,
        use_case: UseCase,
    ) -> Vec<&StanceRecord> {
        self.records
            .values()
            .filter(|r| {
                r.topic_id == topic_id
                    && r.question_id == question_id
                    && r.language == language
                    && r.use_case == use_case
            })
            .collect()
    }

    pub fn topics(&self) -> BTreeSet<&str> {
        self.records.values().map(|r| r.topic_id.as_str()).collect()
    }

    pub fn questions(&self, topic_id: &str, language: Language, use_case: UseCase) -> BTreeSet<&str> {
        self.records
            .values()
            .filter(|r| r.topic_id == topic_id && r.language == language && r.use_case == use_case)
            .map(|r| r.question_id.as_str())
            .collect()
    }

    pub fn languages(&self) -> BTreeSet<Language> {
        self.records.values().map(|r| r.language).collect()
    }
}

/// Arithmetic mean of stance distributions sharing one label space.
pub fn mean_distribution(dists: &[&Distribution]) -> Result<Distribution> {
    let Some(first) = dists.first() else {
        return Err(MeasuresError::EmptyInput);
    };
    let labels: Vec<String> = first.labels().to_vec();
    let mut sums = vec![0.0; labels.len()];
    for dist in dists {
        for (sum, label) in sums.iter_mut().zip(&labels) {
            *sum += dist.prob_of(label)?;
        }
    }
    let n = dists.len() as f64;
    for sum in &mut sums {
        *sum /= n;
    }
    Ok(Distribution::new(labels, sums)?)
}

/// A question's stance distribution with paraphrasing marginalized out:
/// the mean over its paraphrase responses.
pub fn marginalize_paraphrases(
    set: &ResponseSet,
    topic_id: &str,
    question_id: &str,
    language: Language,
    use_case: UseCase,
) -> Result<Distribution> {
    let group = set.paraphrase_group(topic_id, question_id, language, use_case);
    if group.is_empty() {
        return Err(MeasuresError::MissingUseCase {
            coordinate: format!("{topic_id}/{question_id} {}", language.code()),
            use_case: use_case.name().to_string(),
        });
    }
    let dists: Vec<&Distribution> = group.iter().map(|r| &r.stance_probs).collect();
    mean_distribution(&dists)
}

/// How much one question's answer moves across its paraphrases.
pub fn paraphrase_inconsistency(
    set: &ResponseSet,
    topic_id: &str,
    question_id: &str,
    language: Language,
    use_case: UseCase,
    cfg: &DivergenceConfig,
) -> Result<f64> {
    let group = set.paraphrase_group(topic_id, question_id, language, use_case);
    if group.len() < 2 {
        return Err(MeasuresError::NotEnoughParaphrases {
            coordinate: format!("{topic_id}/{question_id} {}", language.code()),
            got: group.len(),
        });
    }
    let dists: Vec<Distribution> = group.iter().map(|r| r.stance_probs.clone()).collect();
    Ok(dd_divergence(&dists, cfg)?)
}

/// How much an agent's stance moves across the questions of one topic,
/// after marginalizing out paraphrasing.
pub fn topic_inconsistency(
    set: &ResponseSet,
    topic_id: &str,
    language: Language,
    use_case: UseCase,
    cfg: &DivergenceConfig,
) -> Result<f64> {
    let questions = set.questions(topic_id, language, use_case);
    if questions.len() < 2 {
        return Err(MeasuresError::NotEnoughQuestions { topic: topic_id.into(), got: questions.len() });
    }
    let mut marginals = Vec::with_capacity(questions.len());
    for question_id in questions {
        marginals.push(marginalize_paraphrases(set, topic_id, question_id, language, use_case)?);
    }
    Ok(dd_divergence(&marginals, cfg)?)
}

/// How much one question's answer moves between the multiple-choice and
/// open-ended use cases (both marginalized over paraphrases).
pub fn usecase_inconsistency(
    set: &ResponseSet,
    topic_id: &str,
    question_id: &str,
    language: Language,
    cfg: &DivergenceConfig,
) -> Result<f64> {
    let mc = marginalize_paraphrases(set, topic_id, question_id, language, UseCase::MultipleChoice)?;
    let oe = marginalize_paraphrases(set, topic_id, question_id, language, UseCase::OpenEnded)?;
    Ok(dd_divergence(&[mc, oe], cfg)?)
}

/// Per-language stance distributions of one question at each paraphrase
/// index answered in every requested language (multiple choice only).
fn language_columns(
    set: &ResponseSet,
    topic_id: &str,
    question_id: &str,
    languages: &[Language],
) -> Result<Vec<Vec<Distribution>>> {
    let coordinate = format!("{topic_id}/{question_id}");
    if languages.len() < 2 {
        return Err(MeasuresError::NotEnoughLanguages { coordinate, got: languages.len() });
    }
    let per_language: Vec<BTreeMap<usize, &Distribution>> = languages
        .iter()
        .map(|&language| {
            set.paraphrase_group(topic_id, question_id, language, UseCase::MultipleChoice)
                .into_iter()
                .map(|r| (r.paraphrase_index, &r.stance_probs))
                .collect()
        })
        .collect();
    let mut shared: BTreeSet<usize> = per_language[0].keys().copied().collect();
    for map in &per_language[1..] {
        shared = shared.intersection(&map.keys().copied().collect()).copied().collect();
    }
    if shared.is_empty() {
        return Err(MeasuresError::NoSharedParaphrases { coordinate });
    }
    Ok(per_language
        .iter()
        .map(|map| shared.iter().map(|r| map[r].clone()).collect())
        .collect())
}

/// How much one question's answer moves across languages: the spread over
/// translations is scored at each shared paraphrase index and averaged.
pub fn multilingual_inconsistency(
    set: &ResponseSet,
    topic_id: &str,
    question_id: &str,
    languages: &[Language],
    cfg: &DivergenceConfig,
) -> Result<f64> {
    let columns = language_columns(set, topic_id, question_id, languages)?;
    multilingual_stat(&columns, cfg)
}

/// Mean over paraphrase positions of the cross-language spread; `columns`
/// holds one index-aligned distribution list per language.
fn multilingual_stat(columns: &[Vec<Distribution>], cfg: &DivergenceConfig) -> Result<f64> {
    let positions = columns[0].len();
    let mut total = 0.0;
    for position in 0..positions {
        let at_position: Vec<Distribution> =
            columns.iter().map(|column| column[position].clone()).collect();
        total += dd_divergence(&at_position, cfg)?;
    }
    Ok(total / positions as f64)
}

/// Mean probability mass the agent puts on supporting a topic, across the
/// topic's questions (each marginalized over paraphrases).
pub fn topicwise_support(
    set: &ResponseSet,
    topic_id: &str,
    language: Language,
    use_case: UseCase,
) -> Result<f64> {
    let questions = set.questions(topic_id, language, use_case);
    if questions.is_empty() {
        return Err(MeasuresError::NotEnoughQuestions { topic: topic_id.into(), got: 0 });
    }
    let mut total = 0.0;
    for question_id in &questions {
        let marginal = marginalize_paraphrases(set, topic_id, question_id, language, use_case)?;
        total += marginal.prob_of(Stance::Supports.as_label())?;
    }
    Ok(total / questions.len() as f64)
}

/// Percentile-bootstrap settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    /// Central coverage of the interval, e.g. 0.95.
    pub confidence: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { n_resamples: 1000, seed: 17, confidence: 0.95 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Percentile bootstrap of `stat` under resampling of `items` with
/// replacement.
///
/// When the number of distinct ordered resamples, `len^len`, is no larger
/// than `n_resamples`, every resample is enumerated exactly once instead
/// of sampling — small groups get deterministic, exhaustive intervals.
/// Otherwise resamples are drawn with a seeded generator, so intervals
/// are reproducible for a fixed configuration.
pub fn bootstrap_ci<T, F>(items: &[T], stat: F, cfg: &BootstrapConfig) -> Result<Interval>
where
    T: Clone,
    F: Fn(&[T]) -> Result<f64>,
{
    use rand::{Rng as _, SeedableRng as _};

    if items.is_empty() {
        return Err(MeasuresError::EmptyInput);
    }
    if cfg.n_resamples == 0 {
        return Err(MeasuresError::InvalidBootstrap("n_resamples must be positive".into()));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(MeasuresError::InvalidBootstrap(format!(
            "confidence must lie strictly between 0 and 1, got {}",
            cfg.confidence
        )));
    }

    let n = items.len();
    let exhaustive_count = (n as u128)
        .checked_pow(n as u32)
        .filter(|&count| count <= cfg.n_resamples as u128)
        .map(|count| count as usize);

    let mut stats = Vec::new();
    let mut resample = Vec::with_capacity(n);
    if let Some(count) = exhaustive_count {
        for mut code in 0..count {
            resample.clear();
            for _ in 0..n {
                resample.push(items[code % n].clone());
                code /= n;
            }
            stats.push(stat(&resample)?);
        }
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.n_resamples {
            resample.clear();
            for _ in 0..n {
                resample.push(items[rng.gen_range(0..n)].clone());
            }
            stats.push(stat(&resample)?);
        }
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - cfg.confidence) / 2.0;
    Ok(Interval { low: quantile(&stats, alpha), high: quantile(&stats, 1.0 - alpha) })
}

/// Linear-interpolation quantile of an ascending-sorted non-empty slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let index = position.floor() as usize;
    let fraction = position - index as f64;
    if index + 1 < sorted.len() {
        sorted[index] * (1.0 - fraction) + sorted[index + 1] * fraction
    } else {
        sorted[index]
    }
}

/// Which spread a score quantifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Paraphrase,
    Topic,
    UseCase,
    Multilingual,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Paraphrase => "paraphrase_inconsistency",
            Measure::Topic => "topic_inconsistency",
            Measure::UseCase => "usecase_inconsistency",
            Measure::Multilingual => "multilingual_inconsistency",
        }
    }
}

/// One scored group: a measure, the coordinates it covers, the point
/// value, and a bootstrap interval when one was requested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScore {
    pub measure: Measure,
    pub topic_id: String,
    /// Present for question-scoped measures, absent for topic-scoped ones.
    pub question_id: Option<String>,
    /// Absent when the measure spans languages.
    pub language: Option<Language>,
    /// Absent when the measure spans use cases.
    pub use_case: Option<UseCase>,
    pub value: f64,
    pub ci: Option<Interval>,
    /// Number of members whose spread the value summarizes.
    pub n_components: usize,
}

fn dd_interval(
    dists: &[Distribution],
    cfg: &DivergenceConfig,
    boot: Option<&BootstrapConfig>,
) -> Result<Option<Interval>> {
    match boot {
        Some(boot) => {
            let interval =
                bootstrap_ci(dists, |sample| Ok(dd_divergence(sample, cfg)?), boot)?;
            Ok(Some(interval))
        }
        None => Ok(None),
    }
}

/// Paraphrase-inconsistency scores for every question group with at least
/// two responses, in coordinate order.
pub fn paraphrase_scores(
    set: &ResponseSet,
    cfg: &DivergenceConfig,
    boot: Option<&BootstrapConfig>,
) -> Result<Vec<ConsistencyScore>> {
    let mut seen = BTreeSet::new();
    let mut scores = Vec::new();
    for record in set.records() {
        let scope =
            (record.topic_id.clone(), record.question_id.clone(), record.language, record.use_case);
        if !seen.insert(scope) {
            continue;
        }
        let group =
            set.paraphrase_group(&record.topic_id, &record.question_id, record.language, record.use_case);
        if group.len() < 2 {
            continue;
        }
        let dists: Vec<Distribution> = group.iter().map(|r| r.stance_probs.clone()).collect();
        scores.push(ConsistencyScore {
            measure: Measure::Paraphrase,
            topic_id: record.topic_id.clone(),
            question_id: Some(record.question_id.clone()),
            language: Some(record.language),
            use_case: Some(record.use_case),
            value: dd_divergence(&dists, cfg)?,
            ci: dd_interval(&dists, cfg, boot)?,
            n_components: dists.len(),
        });
    }
    Ok(scores)
}

/// Topic-inconsistency scores for every topic with at least two answered
/// questions, in coordinate order.
pub fn topic_scores(
    set: &ResponseSet,
    cfg: &DivergenceConfig,
    boot: Option<&BootstrapConfig>,
) -> Result<Vec<ConsistencyScore>> {
    let mut seen = BTreeSet::new();
    let mut scores = Vec::new();
    for record in set.records() {
        let scope = (record.topic_id.clone(), record.language, record.use_case);
        if !seen.insert(scope) {
            continue;
        }
        let questions = set.questions(&record.topic_id, record.language, record.use_case);
        if questions.len() < 2 {
            continue;
        }
        let mut marginals = Vec::with_capacity(questions.len());
        for question_id in &questions {
            marginals.push(marginalize_paraphrases(
                set,
                &record.topic_id,
                question_id,
                record.language,
                record.use_case,
            )?);
        }
        scores.push(ConsistencyScore {
            measure: Measure::Topic,
            topic_id: record.topic_id.clone(),
            question_id: None,
            language: Some(record.language),
            use_case: Some(record.use_case),
            value: dd_divergence(&marginals, cfg)?,
            ci: dd_interval(&marginals, cfg, boot)?,
            n_components: marginals.len(),
        });
    }
    Ok(scores)
}

/// Use-case inconsistency scores for every question answered in both use
/// cases, in coordinate order.
pub fn usecase_scores(
    set: &ResponseSet,
    cfg: &DivergenceConfig,
    boot: Option<&BootstrapConfig>,
) -> Result<Vec<ConsistencyScore>> {
    let mut seen = BTreeSet::new();
    let mut scores = Vec::new();
    for record in set.records() {
        let scope = (record.topic_id.clone(), record.question_id.clone(), record.language);
        if !seen.insert(scope) {
            continue;
        }
        let mc = marginalize_paraphrases(
            set,
            &record.topic_id,
            &record.question_id,
            record.language,
            UseCase::MultipleChoice,
        );
        let oe = marginalize_paraphrases(
            set,
            &record.topic_id,
            &record.question_id,
            record.language,
            UseCase::OpenEnded,
        );
        let (Ok(mc), Ok(oe)) = (mc, oe) else {
            continue;
        };
        let pair = vec![mc, oe];
        scores.push(ConsistencyScore {
            measure: Measure::UseCase,
            topic_id: record.topic_id.clone(),
            question_id: Some(record.question_id.clone()),
            language: Some(record.language),
            use_case: None,
            value: dd_divergence(&pair, cfg)?,
            ci: dd_interval(&pair, cfg, boot)?,
            n_components: pair.len(),
        });
    }
    Ok(scores)
}

/// Multilingual-inconsistency scores for every question answered (choice
/// use case) in at least two of the set's languages, in coordinate order.
pub fn multilingual_scores(
    set: &ResponseSet,
    cfg: &DivergenceConfig,
    boot: Option<&BootstrapConfig>,
) -> Result<Vec<ConsistencyScore>> {
    let all_languages: Vec<Language> = set.languages().into_iter().collect();
    let mut seen = BTreeSet::new();
    let mut scores = Vec::new();
    for record in set.records() {
        if record.use_case != UseCase::MultipleChoice {
            continue;
        }
        let scope = (record.topic_id.clone(), record.question_id.clone());
        if !seen.insert(scope) {
            continue;
        }
        let answered: Vec<Language> = all_languages
            .iter()
            .copied()
            .filter(|&language| {
                !set.paraphrase_group(
                    &record.topic_id,
                    &record.question_id,
                    language,
                    UseCase::MultipleChoice,
                )
                .is_empty()
            })
            .collect();
        if answered.len() < 2 {
            continue;
        }
        let columns = language_columns(set, &record.topic_id, &record.question_id, &answered)?;
        let ci = match boot {
            Some(boot) => Some(bootstrap_ci(
                &columns,
                |sample| multilingual_stat(sample, cfg),
                boot,
            )?),
            None => None,
        };
        scores.push(ConsistencyScore {
            measure: Measure::Multilingual,
            topic_id: record.topic_id.clone(),
            question_id: Some(record.question_id.clone()),
            language: None,
            use_case: Some(UseCase::MultipleChoice),
            value: multilingual_stat(&columns, cfg)?,
            ci,
            n_components: answered.len(),
        });
    }
    Ok(scores)
}

/// One row of the human-responses table.
#[derive(Debug, Deserialize)]
struct HumanRow {
    participant: String,
    topic_id: String,
    question_id: String,
    language: String,
    paraphrase_index: usize,
    choice: String,
}

/// Read human survey answers from CSV into one [`ResponseSet`] per
/// participant.
///
/// Expected header: `participant,topic_id,question_id,language,
/// paraphrase_index,choice`. Each row is one picked answer; it becomes a
/// one-hot stance distribution through the item's choice coding (the
/// language's abstain wording counts as neutral). Rows are validated
/// against `corpus` and errors carry 1-based CSV line numbers.
pub fn read_human_responses<R: std::io::Read>(
    reader: R,
    corpus: &Corpus,
    abstain_enabled: bool,
) -> Result<BTreeMap<String, ResponseSet>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut sets: BTreeMap<String, ResponseSet> = BTreeMap::new();
    let labels = stance_space(abstain_enabled);
    for (index, row) in csv_reader.deserialize::<HumanRow>().enumerate() {
        let line = index + 2; // 1-based, after the header line
        let row = row.map_err(|e| MeasuresError::HumanRow { row: line, message: e.to_string() })?;
        let language = Language::parse(&row.language).ok_or_else(|| MeasuresError::HumanRow {
            row: line,
            message: format!("unknown language code {:?}", row.language),
        })?;
        let item = corpus.find_item(&row.topic_id, &row.question_id, language).ok_or_else(|| {
            MeasuresError::HumanRow {
                row: line,
                message: format!(
                    "no corpus item {}/{} in language {}",
                    row.topic_id,
                    row.question_id,
                    language.code()
                ),
            }
        })?;
        if row.paraphrase_index >= item.paraphrases.len() {
            return Err(MeasuresError::HumanRow {
                row: line,
                message: format!(
                    "paraphrase index {} out of range ({} paraphrases)",
                    row.paraphrase_index,
                    item.paraphrases.len()
                ),
            });
        }
        let stance = match item.choice_stance(&row.choice) {
            Some(stance) => stance,
            None if row.choice == abstain_text(language) => Stance::Neutral,
            None => {
                return Err(MeasuresError::HumanRow {
                    row: line,
                    message: format!("choice {:?} is not offered by {}", row.choice, item.coordinate()),
                })
            }
        };
        if stance == Stance::Neutral && !abstain_enabled {
            return Err(MeasuresError::HumanRow {
                row: line,
                message: "neutral answer in a run without an abstain option".into(),
            });
        }
        let record = StanceRecord {
            topic_id: row.topic_id,
            question_id: row.question_id,
            paraphrase_index: row.paraphrase_index,
            language,
            use_case: UseCase::MultipleChoice,
            stance_probs: Distribution::one_hot(labels.clone(), stance.as_label())?,
        };
        sets.entry(row.participant)
            .or_default()
            .insert(record)
            .map_err(|e| MeasuresError::HumanRow { row: line, message: e.to_string() })?;
    }
    Ok(sets)
}

//! `valcon analyze`: score consistency measures from the survey log.
//!
//! Strictly offline: the inputs are the corpus, the survey responses,
//! and (for open-ended records) the judgements file — never the network.
//! Responses are grouped into scopes, one per (model, probe conditions)
//! combination, and each scope gets its own report directory with score
//! tables, per-topic rankings, and a topicwise support table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use valcon_core::client::{ProbeSpec, ResponseRecord, UseCase};
use valcon_core::dataset::{load_corpus, stance_projection, Corpus, CorpusError, Language};
use valcon_core::divergence::{normalized_entropy, DivergenceConfig};
use valcon_core::judge::pooled_stance;
use valcon_core::measures::{
    marginalize_paraphrases, multilingual_scores, paraphrase_scores, topic_scores,
    topicwise_support, ConsistencyScore, Measure, ResponseSet, StanceRecord, usecase_scores,
};
use valcon_core::report::{write_scores_csv, write_table_csv};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::judge::JudgementLine;
use crate::jsonl;

/// Short file-name token for a measure.
pub fn measure_short(measure: Measure) -> &'static str {
    match measure {
        Measure::Paraphrase => "paraphrase",
        Measure::Topic => "topic",
        Measure::UseCase => "usecase",
        Measure::Multilingual => "multilingual",
    }
}

/// Human-readable scope a response belongs to: the model name plus every
/// probe condition that changes what the numbers mean. Responses from
/// different scopes are never pooled into one score.
pub fn scope_label(model: &str, probe: &ProbeSpec) -> String {
    let mut parts = vec![model.to_string()];
    if probe.abstain_enabled {
        parts.push("abstain".into());
    }
    if probe.in_context_example {
        parts.push("icl".into());
    }
    if let Some(value) = &probe.value_condition {
        parts.push(format!("value-{value}"));
    }
    if probe.context_statement.is_some() {
        parts.push("context".into());
    }
    parts.join("+")
}

/// Directory-safe version of a scope label.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    let mut last_dash = false;
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
            last_dash = false;
        } else if !last_dash && !out.is_empty() {
            out.push('-');
            last_dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        "scope".into()
    } else {
        out
    }
}

/// How many responses were left out of scoring, and why.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SkipCounts {
    /// Multiple-choice records whose letter distribution was degenerate.
    pub degenerate: usize,
    /// Multiple-choice records whose mass was all on neutral choices
    /// while the abstain option was off.
    pub all_neutral: usize,
    /// Open-ended records with no entry in the judgements file.
    pub unjudged: usize,
    /// Open-ended records where no judge produced a usable stance.
    pub unusable_panel: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.degenerate + self.all_neutral + self.unjudged + self.unusable_panel
    }
}

/// Project every usable response into stance space, grouped by scope.
pub fn stance_records_by_scope(
    corpus: &Corpus,
    responses: &[ResponseRecord],
    judgements: &[JudgementLine],
) -> Result<(BTreeMap<String, Vec<StanceRecord>>, SkipCounts)> {
    let judged: HashMap<&str, &JudgementLine> =
        judgements.iter().map(|line| (line.response_key.as_str(), line)).collect();
    let mut scopes: BTreeMap<String, Vec<StanceRecord>> = BTreeMap::new();
    let mut skips = SkipCounts::default();

    for record in responses {
        let probe = &record.probe;
        let stance_probs = match (&record.option_probs, &record.generation) {
            (Some(option_probs), _) => {
                if record.degenerate {
                    skips.degenerate += 1;
                    continue;
                }
                let item = corpus
                    .find_item(&probe.item.topic_id, &probe.item.question_id, probe.language)
                    .ok_or_else(|| {
                        CliError::Validation(format!(
                            "survey log references {}/{} ({}), which the corpus does not contain",
                            probe.item.topic_id, probe.item.question_id, probe.language
                        ))
                    })?;
                match stance_projection(option_probs, item, probe.abstain_enabled) {
                    Ok(dist) => dist,
                    Err(CorpusError::AllMassNeutral { .. }) => {
                        skips.all_neutral += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            (None, Some(_)) => match judged.get(record.cache_key.as_str()) {
                None => {
                    skips.unjudged += 1;
                    continue;
                }
                Some(line) => match pooled_stance(&line.judgements)? {
                    None => {
                        skips.unusable_panel += 1;
                        continue;
                    }
                    Some(dist) => dist,
                },
            },
            (None, None) => {
                return Err(CliError::Validation(format!(
                    "response {} carries neither an option distribution nor a generation",
                    record.cache_key
                )))
            }
        };
        scopes.entry(scope_label(&record.model, probe)).or_default().push(StanceRecord {
            topic_id: probe.item.topic_id.clone(),
            question_id: probe.item.question_id.clone(),
            paraphrase_index: probe.paraphrase_index,
            language: probe.language,
            use_case: probe.use_case,
            stance_probs,
        });
    }
    Ok((scopes, skips))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_failed(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

/// Mean score per topic, largest (least consistent) first; topics tied to
/// the same mean stay in topic order.
pub fn topic_ranking(scores: &[ConsistencyScore]) -> Vec<(String, f64)> {
    let mut by_topic: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for score in scores {
        let entry = by_topic.entry(&score.topic_id).or_insert((0.0, 0));
        entry.0 += score.value;
        entry.1 += 1;
    }
    let mut rows: Vec<(String, f64)> =
        by_topic.into_iter().map(|(topic, (sum, n))| (topic.to_string(), sum / n as f64)).collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    rows
}

/// Normalized entropy of each paraphrase group's mean stance
/// distribution, in coordinate order — the entropy-flavored counterpart
/// of the paraphrase score table.
pub fn entropy_rows(set: &ResponseSet) -> Result<Vec<(String, f64)>> {
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for record in set.records() {
        let scope =
            (record.topic_id.clone(), record.question_id.clone(), record.language, record.use_case);
        if !seen.insert(scope) {
            continue;
        }
        let group = set.paraphrase_group(
            &record.topic_id,
            &record.question_id,
            record.language,
            record.use_case,
        );
        if group.len() < 2 {
            continue;
        }
        let mean = marginalize_paraphrases(
            set,
            &record.topic_id,
            &record.question_id,
            record.language,
            record.use_case,
        )?;
        rows.push((
            format!(
                "{}/{} {} {}",
                record.topic_id,
                record.question_id,
                record.language,
                record.use_case.name()
            ),
            normalized_entropy(&mean)?,
        ));
    }
    Ok(rows)
}

fn support_rows(set: &ResponseSet) -> Result<Vec<(String, f64)>> {
    let mut combos: BTreeSet<(String, Language, UseCase)> = BTreeSet::new();
    for record in set.records() {
        combos.insert((record.topic_id.clone(), record.language, record.use_case));
    }
    let mut rows = Vec::new();
    for (topic_id, language, use_case) in combos {
        let support = topicwise_support(set, &topic_id, language, use_case)?;
        rows.push((format!("{topic_id} {language} {}", use_case.name()), support));
    }
    Ok(rows)
}

/// Score one scope into `dir`. Returns the number of score rows written.
pub fn write_scope_reports(
    cfg: &RunConfig,
    set: &ResponseSet,
    dir: &Path,
    entropy: bool,
) -> Result<usize> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create directory {}: {e}", dir.display())))?;
    let dcfg = DivergenceConfig::default();
    let boot = cfg.bootstrap.as_ref();
    let mut selected: Vec<Measure> = Vec::new();
    for measure in [Measure::Paraphrase, Measure::Topic, Measure::UseCase, Measure::Multilingual] {
        if cfg.measures.contains(&measure) && !selected.contains(&measure) {
            selected.push(measure);
        }
    }

    let mut total_rows = 0usize;
    for measure in selected {
        let scores = match measure {
            Measure::Paraphrase => paraphrase_scores(set, &dcfg, boot)?,
            Measure::Topic => topic_scores(set, &dcfg, boot)?,
            Measure::UseCase => usecase_scores(set, &dcfg, boot)?,
            Measure::Multilingual => multilingual_scores(set, &dcfg, boot)?,
        };
        total_rows += scores.len();
        let short = measure_short(measure);
        let scores_path = dir.join(format!("scores_{short}.csv"));
        write_scores_csv(&scores, create(&scores_path)?).map_err(|e| write_failed(&scores_path, e))?;
        let ranking_path = dir.join(format!("ranking_{short}.csv"));
        write_table_csv(["topic_id", measure.name()], &topic_ranking(&scores), create(&ranking_path)?)
            .map_err(|e| write_failed(&ranking_path, e))?;
    }

    let support_path = dir.join("support.csv");
    write_table_csv(["scope", "support"], &support_rows(set)?, create(&support_path)?)
        .map_err(|e| write_failed(&support_path, e))?;

    if entropy {
        let entropy_path = dir.join("entropy.csv");
        write_table_csv(["scope", "normalized_entropy"], &entropy_rows(set)?, create(&entropy_path)?)
            .map_err(|e| write_failed(&entropy_path, e))?;
    }
    Ok(total_rows)
}

pub fn run(cfg: &RunConfig, entropy: bool) -> Result<()> {
    if cfg.measures.is_empty() {
        return Err(CliError::Config("at least one measure must be selected".into()));
    }
    cfg.ensure_dirs()?;
    let corpus = load_corpus(&cfg.corpus)?;
    let responses_path = cfg.responses_path();
    if !responses_path.exists() {
        return Err(CliError::Validation(format!(
            "no survey responses at {}; run the survey subcommand first",
            responses_path.display()
        )));
    }
    let responses: Vec<ResponseRecord> = jsonl::read(&responses_path)?;
    if responses.is_empty() {
        return Err(CliError::Validation(format!(
            "survey log {} is empty; run the survey subcommand first",
            responses_path.display()
        )));
    }
    let judgements: Vec<JudgementLine> = jsonl::read_or_empty(&cfg.judgements_path())?;

    let (scopes, skips) = stance_records_by_scope(&corpus, &responses, &judgements)?;
    if scopes.is_empty() {
        return Err(CliError::Validation(
            "no usable responses to score (all were skipped); judge the generations first".into(),
        ));
    }

    let analysis_root: PathBuf = cfg.output_dir.join("analysis");
    for (scope, records) in &scopes {
        let set = ResponseSet::from_records(records.iter().cloned())?;
        let dir = analysis_root.join(slug(scope));
        let rows = write_scope_reports(cfg, &set, &dir, entropy)?;
        println!("{scope}: {} stance records, {} score rows -> {}", set.len(), rows, dir.display());
    }
    if skips.total() > 0 {
        println!(
            "skipped {} response(s): {} degenerate, {} all-neutral, {} unjudged, {} unusable panel",
            skips.total(),
            skips.degenerate,
            skips.all_neutral,
            skips.unjudged,
            skips.unusable_panel
        );
    }
    Ok(())
}

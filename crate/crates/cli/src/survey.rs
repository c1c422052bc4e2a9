//! `valcon survey`: probe every configured subject over the corpus.
//!
//! The survey scope is the cross product of corpus items in the
//! configured languages, their paraphrases, and the configured use
//! cases, under the configured conditions (abstain option, in-context
//! example, value conditioning). Every network call lands in the cache
//! log first, so an interrupted survey resumes where it stopped and a
//! finished one replays without any network traffic.

use valcon_core::client::{Client, ItemRef, ProbeSpec, ResponseRecord};
use valcon_core::dataset::{load_corpus, Corpus, QuestionItem};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::jsonl;

/// Deterministic probe order: corpus item order, then use case, then
/// paraphrase index.
pub fn probe_plan<'c>(cfg: &RunConfig, corpus: &'c Corpus) -> Vec<(ProbeSpec, &'c QuestionItem)> {
    let mut work = Vec::new();
    for item in &corpus.items {
        if !cfg.languages.contains(&item.language) {
            continue;
        }
        for use_case in &cfg.use_cases {
            for paraphrase_index in 0..item.paraphrases.len() {
                let spec = ProbeSpec {
                    item: ItemRef::of(item),
                    paraphrase_index,
                    use_case: *use_case,
                    language: item.language,
                    abstain_enabled: cfg.abstain,
                    order_seed: cfg.order_seed,
                    value_condition: cfg.value_condition.clone(),
                    context_statement: None,
                    in_context_example: cfg.in_context_example,
                };
                work.push((spec, item));
            }
        }
    }
    work
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    if cfg.subjects.is_empty() {
        return Err(CliError::Config("no [[subjects]] endpoints configured".into()));
    }
    if cfg.use_cases.is_empty() {
        return Err(CliError::Config("use_cases must not be empty".into()));
    }
    if cfg.languages.is_empty() {
        return Err(CliError::Config("languages must not be empty".into()));
    }
    cfg.ensure_dirs()?;
    let corpus = load_corpus(&cfg.corpus)?;
    let work = probe_plan(cfg, &corpus);
    if work.is_empty() {
        return Err(CliError::Validation(format!(
            "corpus {} has no items in the configured languages",
            cfg.corpus.display()
        )));
    }

    let client = Client::open(cfg.survey_cache())?;
    let mut records: Vec<ResponseRecord> = Vec::new();
    let mut failures: Vec<(String, CliError)> = Vec::new();
    for subject in &cfg.subjects {
        println!("surveying {}: {} probes", subject.model_name, work.len());
        let results = client.probe_many(subject, &work);
        let mut ok = 0usize;
        let before = failures.len();
        for ((spec, _), result) in work.iter().zip(results) {
            match result {
                Ok(record) => {
                    ok += 1;
                    records.push(record);
                }
                Err(e) => {
                    let what = format!(
                        "{} {}/{} r{} {} {}",
                        subject.model_name,
                        spec.item.topic_id,
                        spec.item.question_id,
                        spec.paraphrase_index,
                        spec.language,
                        spec.use_case.name(),
                    );
                    failures.push((what, e.into()));
                }
            }
        }
        println!("  {} ok, {} failed", ok, failures.len() - before);
    }

    if !failures.is_empty() {
        for (what, err) in failures.iter().take(10) {
            eprintln!("failed: {what}: {err}");
        }
        if failures.len() > 10 {
            eprintln!("... and {} more", failures.len() - 10);
        }
        eprintln!(
            "{} of {} probes failed; successful calls are cached, rerun to resume",
            failures.len(),
            work.len() * cfg.subjects.len()
        );
        return Err(failures.swap_remove(0).1);
    }

    let path = cfg.responses_path();
    jsonl::write(&path, &records)?;
    println!("wrote {} responses -> {}", records.len(), path.display());
    Ok(())
}

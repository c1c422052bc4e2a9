//! `valcon generate`: run the corpus regeneration pipeline end to end.

use std::fs;

use valcon_core::client::Client;
use valcon_core::dataset::{corpus_stats, stats_to_csv, write_corpus};
use valcon_core::genpipeline::run_generation;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let job = cfg
        .generation
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [generation] section".into()))?;
    cfg.ensure_dirs()?;
    if let Some(parent) = cfg.corpus.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Config(format!("cannot create directory {}: {e}", parent.display()))
            })?;
        }
    }

    let client = Client::open(cfg.generation_cache())?;
    let outcome = run_generation(&client, job)?;

    write_corpus(&outcome.corpus, &cfg.corpus)?;
    let report_path = cfg.output_dir.join("drop_report.csv");
    let file = fs::File::create(&report_path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", report_path.display())))?;
    outcome
        .report
        .write_csv(file)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", report_path.display())))?;
    let stats_path = cfg.output_dir.join("corpus_stats.csv");
    fs::write(&stats_path, stats_to_csv(&corpus_stats(&outcome.corpus)))
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", stats_path.display())))?;

    let report = &outcome.report;
    println!(
        "generated {} of {} topics, {} of {} questions, {} of {} paraphrases",
        report.emitted_topics,
        report.requested_topics,
        report.emitted_questions,
        report.requested_questions,
        report.emitted_paraphrases,
        report.requested_paraphrases,
    );
    println!(
        "{} drop event(s), {} item(s) flagged for review",
        report.events.len(),
        report.flagged.len()
    );
    println!("corpus -> {}", cfg.corpus.display());
    println!("drop report -> {}", report_path.display());
    println!("corpus stats -> {}", stats_path.display());
    Ok(())
}

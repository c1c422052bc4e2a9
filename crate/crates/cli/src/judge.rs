//! `valcon judge`: map surveyed open-ended generations onto stances.
//!
//! Every generation in the survey log is shown to the whole judge panel.
//! The judgements are written alongside the responses, keyed by the
//! response's cache key so `analyze` can join the two files offline.
//! With two or more judges, inter-judge agreement (Fleiss' kappa) is
//! reported over the items every judge produced a usable stance for.

use serde::{Deserialize, Serialize};
use valcon_core::client::{Client, ProbeSpec, ResponseRecord};
use valcon_core::dataset::{load_corpus, stance_space};
use valcon_core::judge::{judge_panel, panel_agreement, JudgeError, StanceJudgement};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::jsonl;

/// One judged generation: the survey probe it came from, the cache key
/// of that response, and the panel's judgements in panel order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JudgementLine {
    pub response_key: String,
    pub probe: ProbeSpec,
    pub judgements: Vec<StanceJudgement>,
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    if cfg.judges.is_empty() {
        return Err(CliError::Config("no [[judges]] endpoints configured".into()));
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
    let generations: Vec<&ResponseRecord> =
        responses.iter().filter(|r| r.generation.is_some()).collect();

    let path = cfg.judgements_path();
    if generations.is_empty() {
        jsonl::write(&path, &Vec::<JudgementLine>::new())?;
        println!(
            "no open-ended generations in {}; wrote an empty {}",
            responses_path.display(),
            path.display()
        );
        return Ok(());
    }

    let client = Client::open(cfg.survey_cache())?;
    let mut lines: Vec<JudgementLine> = Vec::new();
    let mut fully_usable = 0usize;
    for record in &generations {
        let probe = &record.probe;
        let item = corpus
            .find_item(&probe.item.topic_id, &probe.item.question_id, probe.language)
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "survey log references {}/{} ({}), which the corpus does not contain",
                    probe.item.topic_id, probe.item.question_id, probe.language
                ))
            })?;
        let generation = record.generation.as_deref().expect("filtered on generation");
        let judgements =
            judge_panel(&client, &cfg.judges, generation, item, probe.abstain_enabled)?;
        if judgements.iter().all(StanceJudgement::usable) {
            fully_usable += 1;
        }
        lines.push(JudgementLine {
            response_key: record.cache_key.clone(),
            probe: probe.clone(),
            judgements,
        });
    }

    jsonl::write(&path, &lines)?;
    println!(
        "judged {} generation(s) with {} judge(s); {} fully usable -> {}",
        lines.len(),
        cfg.judges.len(),
        fully_usable,
        path.display()
    );

    if cfg.judges.len() >= 2 {
        let abstain_anywhere = generations.iter().any(|r| r.probe.abstain_enabled);
        let per_item: Vec<Vec<StanceJudgement>> =
            lines.iter().map(|l| l.judgements.clone()).collect();
        match panel_agreement(
            &per_item,
            stance_space(abstain_anywhere),
            cfg.judges.len() as u32,
        ) {
            Ok((matrix, dropped)) => {
                println!(
                    "panel agreement: Fleiss' kappa = {:.4} over {} item(s) ({} dropped)",
                    matrix.fleiss_kappa()?,
                    matrix.items(),
                    dropped
                );
            }
            Err(JudgeError::NothingUsable) => {
                println!("panel agreement: no item was usable for every judge");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

//! `valcon simulate`: run the whole measurement pipeline against a
//! spawned synthetic respondent.
//!
//! The respondent's ground truth is known, so this is the end-to-end
//! sanity check: a zero-noise respondent must score (numerically) zero
//! on every measure, and sweeping the paraphrase-noise amplitude must
//! produce a monotone paraphrase-inconsistency table while the other
//! measures stay put.

use std::fs;
use std::path::Path;

use valcon_core::client::{Client, ItemRef, ProbeSpec, UseCase};
use valcon_core::dataset::{stance_projection, write_corpus, Corpus};
use valcon_core::divergence::DivergenceConfig;
use valcon_core::judge::judge_stance;
use valcon_core::measures::{
    multilingual_scores, paraphrase_scores, topic_scores, usecase_scores, Measure, ResponseSet,
    StanceRecord,
};
use valcon_core::report::{write_scores_csv, write_table_csv};
use valcon_core::simulator::{
    serve_respondent, synthetic_corpus, synthetic_population, NoiseProfile, SyntheticRespondent,
};

use crate::analyze::measure_short;
use crate::config::{RunConfig, SimulationConfig};
use crate::error::{CliError, Result};

/// Reject respondent specs whose numbers cannot be probabilities or
/// noise amplitudes.
pub fn validate_respondent(r: &SyntheticRespondent, corpus: &Corpus) -> Result<()> {
    let mut problems = Vec::new();
    for (topic, stance) in &r.topic_stances {
        if !stance.is_finite() || !(0.0..=1.0).contains(stance) {
            problems.push(format!("stance for {topic} is {stance}, not in [0, 1]"));
        }
    }
    for (name, noise) in [
        ("paraphrase_noise", r.paraphrase_noise),
        ("question_noise", r.question_noise),
        ("language_noise", r.language_noise),
        ("usecase_noise", r.usecase_noise),
    ] {
        if !noise.is_finite() || noise < 0.0 {
            problems.push(format!("{name} is {noise}, not a nonnegative amplitude"));
        }
    }
    if !r.abstain_mass.is_finite() || !(0.0..=1.0).contains(&r.abstain_mass) {
        problems.push(format!("abstain_mass is {}, not in [0, 1]", r.abstain_mass));
    }
    if !r.value_sensitivity.is_finite() || !(0.0..=1.0).contains(&r.value_sensitivity) {
        problems.push(format!("value_sensitivity is {}, not in [0, 1]", r.value_sensitivity));
    }
    let missing: Vec<&str> = corpus
        .topics
        .keys()
        .filter(|topic| !r.topic_stances.contains_key(*topic))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        problems.push(format!("no stance for corpus topic(s): {}", missing.join(", ")));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("bad respondent spec: {}", problems.join("; "))))
    }
}

fn load_respondent(path: &Path, corpus: &Corpus) -> Result<SyntheticRespondent> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read respondent spec {}: {e}", path.display())))?;
    let respondent: SyntheticRespondent = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("respondent spec {}: {e}", path.display())))?;
    validate_respondent(&respondent, corpus)?;
    Ok(respondent)
}

/// Probe the respondent over the whole corpus through a real local HTTP
/// round trip, projecting every answer into stance space. Multiple-choice
/// probes cover every language; open-ended probes are judged back through
/// the same endpoint.
fn survey_loopback(
    cache: &Path,
    corpus: &Corpus,
    respondent: &SyntheticRespondent,
    model: &str,
    abstain: bool,
    order_seed: u64,
    include_open: bool,
) -> Result<Vec<StanceRecord>> {
    let server = serve_respondent(corpus.clone(), respondent.clone())?;
    let endpoint = server.endpoint(model);
    let client = Client::open(cache)?;
    let mut records = Vec::new();
    for item in &corpus.items {
        let use_cases: &[UseCase] = if include_open {
            &[UseCase::MultipleChoice, UseCase::OpenEnded]
        } else {
            &[UseCase::MultipleChoice]
        };
        for &use_case in use_cases {
            for paraphrase_index in 0..item.paraphrases.len() {
                let spec = ProbeSpec {
                    item: ItemRef::of(item),
                    paraphrase_index,
                    use_case,
                    language: item.language,
                    abstain_enabled: abstain,
                    order_seed,
                    value_condition: None,
                    context_statement: None,
                    in_context_example: false,
                };
                let record = client.probe(&endpoint, &spec, item)?;
                let stance_probs = match use_case {
                    UseCase::MultipleChoice => {
                        let probs = record.option_probs.as_ref().expect("choice probe");
                        if record.degenerate {
                            return Err(CliError::Validation(format!(
                                "respondent produced a degenerate distribution at {}",
                                item.coordinate()
                            )));
                        }
                        stance_projection(probs, item, abstain)?
                    }
                    UseCase::OpenEnded => {
                        let generation = record.generation.as_ref().expect("open probe");
                        let judgement =
                            judge_stance(&client, &endpoint, generation, item, abstain)?;
                        judgement.stance_probs.ok_or_else(|| {
                            CliError::Validation(format!(
                                "respondent's own judgement of {} was unusable",
                                item.coordinate()
                            ))
                        })?
                    }
                };
                records.push(StanceRecord {
                    topic_id: item.topic_id.clone(),
                    question_id: item.question_id.clone(),
                    paraphrase_index,
                    language: item.language,
                    use_case,
                    stance_probs,
                });
            }
        }
    }
    Ok(records)
}

fn base_respondent(sim: &SimulationConfig, corpus: &Corpus) -> Result<SyntheticRespondent> {
    match &sim.respondent {
        Some(path) => load_respondent(path, corpus),
        None => {
            let topic_ids: Vec<String> = corpus.topics.keys().cloned().collect();
            let noise = NoiseProfile {
                paraphrase: sim.paraphrase_noise,
                question: sim.question_noise,
                language: sim.language_noise,
                usecase: sim.usecase_noise,
            };
            let mut respondent = synthetic_population(sim.seed, 1, &topic_ids, &noise)
                .pop()
                .expect("population of one");
            respondent.abstain_mass = sim.abstain_mass;
            validate_respondent(&respondent, corpus)?;
            Ok(respondent)
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [simulation] section".into()))?;
    if sim.n_topics == 0 || sim.n_questions == 0 || sim.n_paraphrases == 0 {
        return Err(CliError::Config(
            "simulation counts (n_topics, n_questions, n_paraphrases) must be at least 1".into(),
        ));
    }
    if sim.languages.is_empty() {
        return Err(CliError::Config("simulation.languages must not be empty".into()));
    }
    for sigma in &sim.sweep {
        if !sigma.is_finite() || *sigma < 0.0 {
            return Err(CliError::Config(format!(
                "sweep value {sigma} is not a nonnegative noise amplitude"
            )));
        }
    }
    cfg.ensure_dirs()?;
    let sim_dir = cfg.output_dir.join("sim");
    fs::create_dir_all(&sim_dir)
        .map_err(|e| CliError::Config(format!("cannot create directory {}: {e}", sim_dir.display())))?;

    let corpus = synthetic_corpus(sim.n_topics, sim.n_questions, sim.n_paraphrases, &sim.languages)?;
    write_corpus(&corpus, sim_dir.join("corpus.json"))?;
    let respondent = base_respondent(sim, &corpus)?;
    let respondent_path = sim_dir.join("respondent.json");
    let spec_json = serde_json::to_string_pretty(&respondent)
        .map_err(|e| CliError::Validation(format!("cannot serialize respondent: {e}")))?;
    fs::write(&respondent_path, spec_json)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", respondent_path.display())))?;

    // Full run: both use cases, all four measures.
    let records = survey_loopback(
        &cfg.cache_dir.join("sim-base.jsonl"),
        &corpus,
        &respondent,
        "synthetic-base",
        cfg.abstain,
        cfg.order_seed,
        true,
    )?;
    let set = ResponseSet::from_records(records)?;
    let dcfg = DivergenceConfig::default();
    let boot = cfg.bootstrap.as_ref();
    println!("simulated respondent: {} stance records", set.len());
    for measure in [Measure::Paraphrase, Measure::Topic, Measure::UseCase, Measure::Multilingual] {
        let scores = match measure {
            Measure::Paraphrase => paraphrase_scores(&set, &dcfg, boot)?,
            Measure::Topic => topic_scores(&set, &dcfg, boot)?,
            Measure::UseCase => usecase_scores(&set, &dcfg, boot)?,
            Measure::Multilingual => multilingual_scores(&set, &dcfg, boot)?,
        };
        let path = sim_dir.join(format!("scores_{}.csv", measure_short(measure)));
        let file = fs::File::create(&path)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        write_scores_csv(&scores, file)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        println!("  {}: {} row(s) -> {}", measure.name(), scores.len(), path.display());
    }

    // Paraphrase-noise sweep: same respondent, only the paraphrase axis
    // varies, multiple-choice probes only.
    if sim.n_paraphrases < 2 {
        println!("sweep skipped: paraphrase inconsistency needs at least 2 paraphrases");
        return Ok(());
    }
    let mut rows: Vec<(String, f64)> = Vec::new();
    for (index, &sigma) in sim.sweep.iter().enumerate() {
        let variant = SyntheticRespondent {
            paraphrase_noise: sigma,
            question_noise: 0.0,
            language_noise: 0.0,
            usecase_noise: 0.0,
            ..respondent.clone()
        };
        let records = survey_loopback(
            &cfg.cache_dir.join(format!("sim-sweep-{index}.jsonl")),
            &corpus,
            &variant,
            &format!("synthetic-s{index}"),
            cfg.abstain,
            cfg.order_seed,
            false,
        )?;
        let set = ResponseSet::from_records(records)?;
        let scores = paraphrase_scores(&set, &dcfg, None)?;
        let mean = scores.iter().map(|s| s.value).sum::<f64>() / scores.len().max(1) as f64;
        rows.push((format!("{sigma}"), mean));
    }
    let sweep_path = sim_dir.join("sweep.csv");
    let file = fs::File::create(&sweep_path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", sweep_path.display())))?;
    write_table_csv(["paraphrase_noise", "mean_paraphrase_inconsistency"], &rows, file)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", sweep_path.display())))?;
    println!("paraphrase-noise sweep -> {}", sweep_path.display());
    for (sigma, mean) in &rows {
        println!("  sigma {sigma}: {mean:.6}");
    }
    Ok(())
}

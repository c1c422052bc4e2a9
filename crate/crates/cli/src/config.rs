//! Run configuration: one TOML file shared by every subcommand, plus the
//! handful of command-line overrides layered on top of it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use valcon_core::client::{ModelEndpoint, UseCase};
use valcon_core::dataset::Language;
use valcon_core::genpipeline::GenerationJob;
use valcon_core::measures::{BootstrapConfig, Measure};

use crate::error::{CliError, Result};

fn default_order_seed() -> u64 {
    17
}

fn default_use_cases() -> Vec<UseCase> {
    vec![UseCase::MultipleChoice]
}

fn default_languages() -> Vec<Language> {
    vec![Language::Eng]
}

fn default_measures() -> Vec<Measure> {
    vec![Measure::Paraphrase, Measure::Topic, Measure::UseCase, Measure::Multilingual]
}

fn default_sim_seed() -> u64 {
    11
}

fn default_sim_languages() -> Vec<Language> {
    vec![Language::Eng]
}

fn default_sweep() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.4]
}

/// Everything a run needs, in the order the pipeline uses it: where the
/// corpus lives, which agents to probe and under which conditions, which
/// judges to map generations with, and which measures to score.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus location: written by `generate`, read by everything else.
    pub corpus: PathBuf,
    /// Directory for the append-only call logs (the network cache).
    pub cache_dir: PathBuf,
    /// Directory all reports, logs, and figures are written under.
    pub output_dir: PathBuf,
    /// Offer an explicit abstain option on every probe.
    #[serde(default)]
    pub abstain: bool,
    /// Prepend the worked example to multiple-choice prompts.
    #[serde(default)]
    pub in_context_example: bool,
    /// Value name slotted into the steering sentence on every probe.
    #[serde(default)]
    pub value_condition: Option<String>,
    /// Sole seed for answer-option letter order.
    #[serde(default = "default_order_seed")]
    pub order_seed: u64,
    #[serde(default = "default_use_cases")]
    pub use_cases: Vec<UseCase>,
    /// Languages in scope; corpus items in other languages are skipped.
    #[serde(default = "default_languages")]
    pub languages: Vec<Language>,
    /// Measures `analyze` scores. Must not be empty.
    #[serde(default = "default_measures")]
    pub measures: Vec<Measure>,
    /// Agents under measurement.
    #[serde(default)]
    pub subjects: Vec<ModelEndpoint>,
    /// Stance judges for open-ended generations.
    #[serde(default)]
    pub judges: Vec<ModelEndpoint>,
    /// Bootstrap settings for confidence intervals; omit for point
    /// estimates only.
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    /// Dataset regeneration job (`generate` only).
    #[serde(default)]
    pub generation: Option<GenerationJob>,
    /// Synthetic loopback run (`simulate` only).
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
}

/// Shape and noise profile of the synthetic loopback run.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_sim_seed")]
    pub seed: u64,
    pub n_topics: usize,
    pub n_questions: usize,
    pub n_paraphrases: usize,
    #[serde(default = "default_sim_languages")]
    pub languages: Vec<Language>,
    /// Optional path to a respondent spec (JSON). When absent, a
    /// respondent is drawn from `seed` and the noise fields below.
    #[serde(default)]
    pub respondent: Option<PathBuf>,
    #[serde(default)]
    pub paraphrase_noise: f64,
    #[serde(default)]
    pub question_noise: f64,
    #[serde(default)]
    pub language_noise: f64,
    #[serde(default)]
    pub usecase_noise: f64,
    #[serde(default)]
    pub abstain_mass: f64,
    /// Paraphrase-noise levels for the sweep table.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
}

/// Command-line switches that override the config file. Boolean flags can
/// only turn features on; absent options leave the file's value alone.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub abstain: bool,
    pub in_context_example: bool,
    pub use_case: Option<String>,
    pub languages: Option<Vec<String>>,
    pub value_condition: Option<String>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if overrides.abstain {
            self.abstain = true;
        }
        if overrides.in_context_example {
            self.in_context_example = true;
        }
        if let Some(raw) = &overrides.use_case {
            self.use_cases = match raw.as_str() {
                "both" => vec![UseCase::MultipleChoice, UseCase::OpenEnded],
                other => match UseCase::parse(other) {
                    Some(uc) => vec![uc],
                    None => {
                        return Err(CliError::Config(format!(
                            "unknown use case {other:?}; expected multiple_choice, open_ended, or both"
                        )))
                    }
                },
            };
        }
        if let Some(codes) = &overrides.languages {
            let mut languages = Vec::new();
            for code in codes {
                match Language::parse(code) {
                    Some(language) => languages.push(language),
                    None => {
                        return Err(CliError::Config(format!(
                            "unknown language code {code:?}; expected one of eng, chi, ger, jpn"
                        )))
                    }
                }
            }
            if languages.is_empty() {
                return Err(CliError::Config("--languages lists no codes".into()));
            }
            self.languages = languages;
        }
        if let Some(value) = &overrides.value_condition {
            if value.trim().is_empty() {
                return Err(CliError::Config("--value-condition must not be empty".into()));
            }
            self.value_condition = Some(value.clone());
        }
        Ok(())
    }

    /// Create the cache and output directories if they do not exist yet.
    pub fn ensure_dirs(&self) -> Result<()> {
        for dir in [&self.cache_dir, &self.output_dir] {
            fs::create_dir_all(dir).map_err(|e| {
                CliError::Config(format!("cannot create directory {}: {e}", dir.display()))
            })?;
        }
        Ok(())
    }

    pub fn responses_path(&self) -> PathBuf {
        self.output_dir.join("responses.jsonl")
    }

    pub fn judgements_path(&self) -> PathBuf {
        self.output_dir.join("judgements.jsonl")
    }

    /// Call log shared by survey probes and judge calls.
    pub fn survey_cache(&self) -> PathBuf {
        self.cache_dir.join("survey.jsonl")
    }

    pub fn generation_cache(&self) -> PathBuf {
        self.cache_dir.join("generation.jsonl")
    }
}

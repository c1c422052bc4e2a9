//! Stance judging of open-ended generations, and inter-judge agreement.
//!
//! An open-ended answer has no option letters to read probabilities from,
//! so a panel of judge models classifies each generated passage: the judge
//! is shown the passage, the original question, and the item's answer
//! choices, and its first-token letter distribution is projected into
//! stance space. [`AgreementMatrix::fleiss_kappa`] quantifies how well the
//! panel agrees on hard labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    build_judge_prompt, extract_option_distribution, Client, ClientError, DecodingParams, ItemRef,
    ModelEndpoint,
};
use crate::dataset::{stance_projection, CorpusError, QuestionItem, Stance};
use crate::divergence::Distribution;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Divergence(#[from] crate::divergence::DivergenceError),
    #[error("agreement matrix needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("agreement matrix needs at least 2 raters, got {0}")]
    TooFewRaters(usize),
    #[error("agreement matrix has no rows")]
    EmptyMatrix,
    #[error("row {row} has {got} category counts, expected {expected}")]
    RowLengthMismatch { row: usize, got: usize, expected: usize },
    #[error("row {row} counts sum to {got}, expected {expected} ratings")]
    RowSumMismatch { row: usize, got: u32, expected: u32 },
    #[error("row {row} carries label {label:?}, not one of the matrix categories")]
    UnknownCategory { row: usize, label: String },
    #[error("no usable judgement for any item")]
    NothingUsable,
}

pub type Result<T> = std::result::Result<T, JudgeError>;

/// One judge model's reading of one generated passage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StanceJudgement {
    pub item: ItemRef,
    pub judge_model: String,
    /// Judge's first-token distribution over the item's answer choices.
    pub choice_probs: Distribution,
    /// `choice_probs` projected into stance space. `None` when the
    /// judgement is unusable: the judge put no mass on any option letter,
    /// or put everything on neutral choices while the stance space
    /// excludes neutral.
    pub stance_probs: Option<Distribution>,
    /// Highest-probability stance (lexicographically first label on ties).
    pub hard_stance: Option<Stance>,
    /// Probability mass the judge spent on tokens matching no option.
    pub none_mass: f64,
    pub cache_key: String,
}

impl StanceJudgement {
    /// Whether this judgement can enter agreement and consistency math.
    pub fn usable(&self) -> bool {
        self.stance_probs.is_some()
    }
}

/// Ask one judge model which stance a generated passage leans toward.
///
/// Unusable judgements (no mass on any option letter, or irreducibly
/// neutral while `abstain_enabled` is off) come back with
/// `stance_probs: None` rather than as errors, so one evasive judge does
/// not abort a batch.
pub fn judge_stance(
    client: &Client,
    judge: &ModelEndpoint,
    generation: &str,
    item: &QuestionItem,
    abstain_enabled: bool,
) -> Result<StanceJudgement> {
    if !judge.supports_logprobs {
        return Err(JudgeError::Client(ClientError::LogprobsUnsupported(judge.model_name.clone())));
    }
    let (prompt, letter_map) = build_judge_prompt(generation, item)?;
    let call = client.call(judge, &prompt, &DecodingParams::multiple_choice())?;
    let extracted = extract_option_distribution(&call.top_logprobs, &letter_map)?;

    let stance_probs = if extracted.degenerate {
        None
    } else {
        match stance_projection(&extracted.option_probs, item, abstain_enabled) {
            Ok(dist) => Some(dist),
            Err(CorpusError::AllMassNeutral { .. }) => None,
            Err(other) => return Err(other.into()),
        }
    };
    let hard_stance = match &stance_probs {
        Some(dist) => Stance::parse(dist.argmax()),
        None => None,
    };
    Ok(StanceJudgement {
        item: ItemRef::of(item),
        judge_model: judge.model_name.clone(),
        choice_probs: extracted.option_probs,
        stance_probs,
        hard_stance,
        none_mass: extracted.none_mass,
        cache_key: call.cache_key,
    })
}

/// Judgements of one passage by a whole panel, in panel order.
pub fn judge_panel(
    client: &Client,
    panel: &[ModelEndpoint],
    generation: &str,
    item: &QuestionItem,
    abstain_enabled: bool,
) -> Result<Vec<StanceJudgement>> {
    panel
        .iter()
        .map(|judge| judge_stance(client, judge, generation, item, abstain_enabled))
        .collect()
}

/// Arithmetic mean of the usable judges' stance distributions, or `None`
/// when not a single judgement is usable.
pub fn pooled_stance(judgements: &[StanceJudgement]) -> Result<Option<Distribution>> {
    let usable: Vec<&Distribution> =
        judgements.iter().filter_map(|j| j.stance_probs.as_ref()).collect();
    let Some(first) = usable.first() else {
        return Ok(None);
    };
    let labels: Vec<String> = first.labels().to_vec();
    let mut sums = vec![0.0; labels.len()];
    for dist in &usable {
        for (sum, label) in sums.iter_mut().zip(&labels) {
            *sum += dist.prob_of(label)?;
        }
    }
    let n = usable.len() as f64;
    for sum in &mut sums {
        *sum /= n;
    }
    Ok(Some(Distribution::new(labels, sums)?))
}

/// Item-by-category table of hard-label counts for a fixed-size rater
/// panel, the input shape Fleiss' kappa is defined over.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementMatrix {
    categories: Vec<String>,
    raters: u32,
    counts: Vec<Vec<u32>>,
}

impl AgreementMatrix {
    pub fn new(categories: Vec<String>, raters: u32) -> Result<Self> {
        if categories.len() < 2 {
            return Err(JudgeError::TooFewCategories(categories.len()));
        }
        if raters < 2 {
            return Err(JudgeError::TooFewRaters(raters as usize));
        }
        Ok(AgreementMatrix { categories, raters, counts: Vec::new() })
    }

    /// Append one item's counts (one per category, summing to the panel
    /// size).
    pub fn push_counts(&mut self, counts: Vec<u32>) -> Result<()> {
        let row = self.counts.len();
        if counts.len() != self.categories.len() {
            return Err(JudgeError::RowLengthMismatch {
                row,
                got: counts.len(),
                expected: self.categories.len(),
            });
        }
        let total: u32 = counts.iter().sum();
        if total != self.raters {
            return Err(JudgeError::RowSumMismatch { row, got: total, expected: self.raters });
        }
        self.counts.push(counts);
        Ok(())
    }

    /// Append one item's counts from the raters' individual labels.
    pub fn push_labels<S: AsRef<str>>(&mut self, labels: &[S]) -> Result<()> {
        let row = self.counts.len();
        if labels.len() != self.raters as usize {
            return Err(JudgeError::RowSumMismatch {
                row,
                got: labels.len() as u32,
                expected: self.raters,
            });
        }
        let mut counts = vec![0u32; self.categories.len()];
        for label in labels {
            let idx = self
                .categories
                .iter()
                .position(|c| c == label.as_ref())
                .ok_or_else(|| JudgeError::UnknownCategory {
                    row,
                    label: label.as_ref().to_string(),
                })?;
            counts[idx] += 1;
        }
        self.counts.push(counts);
        Ok(())
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Fleiss' kappa: chance-corrected agreement among the panel.
    ///
    /// Unanimous panels score exactly 1.0, including the degenerate case
    /// where every rating of every item lands on a single category (there
    /// chance agreement is also perfect and the general formula is 0/0,
    /// but agreement is perfect by inspection).
    pub fn fleiss_kappa(&self) -> Result<f64> {
        if self.counts.is_empty() {
            return Err(JudgeError::EmptyMatrix);
        }
        let n_items = self.counts.len() as f64;
        let n = self.raters as f64;
        let total = n_items * n;

        let mut column_sums = vec![0.0; self.categories.len()];
        let mut mean_item_agreement = 0.0;
        for row in &self.counts {
            let mut same_pair_count = 0.0;
            for (j, &c) in row.iter().enumerate() {
                let c = c as f64;
                column_sums[j] += c;
                same_pair_count += c * (c - 1.0);
            }
            mean_item_agreement += same_pair_count / (n * (n - 1.0));
        }
        mean_item_agreement /= n_items;

        let chance_agreement: f64 =
            column_sums.iter().map(|&s| (s / total) * (s / total)).sum();
        if chance_agreement >= 1.0 {
            // Every rating fell on one category, so every panel was
            // unanimous.
            return Ok(1.0);
        }
        Ok((mean_item_agreement - chance_agreement) / (1.0 - chance_agreement))
    }
}

/// Agreement over hard stance labels across items judged by a fixed panel.
///
/// Items where any judge was unusable are dropped (their count is the
/// second element) so every remaining row sums to the panel size.
pub fn panel_agreement(
    per_item: &[Vec<StanceJudgement>],
    categories: Vec<String>,
    panel_size: u32,
) -> Result<(AgreementMatrix, usize)> {
    let mut matrix = AgreementMatrix::new(categories, panel_size)?;
    let mut dropped = 0usize;
    for judgements in per_item {
        let labels: Vec<&str> = judgements
            .iter()
            .filter_map(|j| j.hard_stance.map(Stance::as_label))
            .collect();
        if labels.len() == judgements.len() && labels.len() == panel_size as usize {
            matrix.push_labels(&labels)?;
        } else {
            dropped += 1;
        }
    }
    if matrix.items() == 0 {
        return Err(JudgeError::NothingUsable);
    }
    Ok((matrix, dropped))
}

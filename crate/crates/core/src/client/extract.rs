//! Turning first-token top-k logprobs into a distribution over the
//! presented answer options.

use crate::divergence::Distribution;

use super::{LetterMap, Result};

/// Extraction outcome: option distribution plus accounting for mass that
/// matched no option.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedDistribution {
    /// Distribution over the option texts (letter order), renormalized over
    /// the options only.
    pub option_probs: Distribution,
    /// Probability mass of tokens that matched no option letter, clamped
    /// to [0, 1].
    pub none_mass: f64,
    /// Set when every option letter had zero mass; `option_probs` is then
    /// the uniform fallback.
    pub degenerate: bool,
}

/// Does `token` denote the option letter `letter`?
///
/// After trimming surrounding whitespace and at most one leading `(`, the
/// remainder must equal the letter alone or the letter followed by one of
/// `.`, `)`, `:`. Matching is case-sensitive: a lone lowercase letter is
/// an ordinary word ("a", "b"), not an option reference.
fn token_matches_letter(token: &str, letter: char) -> bool {
    let trimmed = token.trim();
    let rest = trimmed.strip_prefix('(').unwrap_or(trimmed);
    let mut chars = rest.chars();
    if chars.next() != Some(letter) {
        return false;
    }
    matches!(chars.as_str(), "" | "." | ")" | ":")
}

/// Map top-k first-token logprobs onto the prompt's answer options.
///
/// Each token's probability (`exp` of its logprob) is credited to the
/// option letter it denotes, or to `none_mass` otherwise; option masses
/// are then renormalized over the options alone. When no option letter
/// received any mass the result is flagged degenerate and falls back to a
/// uniform distribution (an all-zero vector smoothed).
pub fn extract_option_distribution(
    top_logprobs: &[(String, f64)],
    letter_map: &LetterMap,
) -> Result<ExtractedDistribution> {
    let options = letter_map.options();
    let mut masses = vec![0.0f64; options.len()];
    let mut none_mass = 0.0f64;
    for (token, logprob) in top_logprobs {
        let p = logprob.exp();
        match options.iter().position(|o| token_matches_letter(token, o.letter)) {
            Some(i) => masses[i] += p,
            None => none_mass += p,
        }
    }

    let labels: Vec<String> = options.iter().map(|o| o.text.clone()).collect();
    let total: f64 = masses.iter().sum();
    let (option_probs, degenerate) = if total > 0.0 {
        let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
        (Distribution::new(labels, probs)?, false)
    } else {
        // No letter carried mass; additive smoothing of the zero vector is
        // exactly the uniform distribution.
        (Distribution::uniform(labels)?, true)
    };
    Ok(ExtractedDistribution { option_probs, none_mass: none_mass.clamp(0.0, 1.0), degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::LetterMap;

    fn binary_map() -> LetterMap {
        // Private constructor is crate-visible through the prompt builder;
        // build a map the same way probes do.
        let item = crate::dataset::QuestionItem {
            topic_id: "t".into(),
            question_id: "q".into(),
            canonical_text: "?".into(),
            paraphrases: vec!["?".into()],
            choices: vec![
                crate::dataset::Choice { text: "yes".into(), stance: crate::dataset::Stance::Supports },
                crate::dataset::Choice { text: "no".into(), stance: crate::dataset::Stance::Opposes },
            ],
            language: crate::dataset::Language::Eng,
            country: crate::dataset::Country::US,
            controversial: false,
            translated: false,
        };
        let spec = crate::client::ProbeSpec {
            item: crate::client::ItemRef { topic_id: "t".into(), question_id: "q".into() },
            paraphrase_index: 0,
            use_case: crate::client::UseCase::MultipleChoice,
            language: crate::dataset::Language::Eng,
            abstain_enabled: false,
            order_seed: 0,
            value_condition: None,
            context_statement: None,
            in_context_example: false,
        };
        crate::client::build_mc_prompt(&spec, &item).unwrap().1
    }

    #[test]
    fn probabilities_are_renormalized_over_options() {
        let map = binary_map();
        let raw = vec![(" A".to_string(), -0.105f64), (" B".to_string(), -2.303f64)];
        let out = extract_option_distribution(&raw, &map).unwrap();
        assert!(!out.degenerate);
        let a_text = map.text_of('A').unwrap();
        let pa = out.option_probs.prob_of(a_text).unwrap();
        assert!((pa - 0.9).abs() < 1e-3, "got {pa}");
        assert!(out.none_mass < 1e-9);
    }

    #[test]
    fn parenthesized_letters_count_and_words_do_not() {
        let map = binary_map();
        let raw = vec![("(A".to_string(), -0.01f64), ("Aardvark".to_string(), -5.0f64)];
        let out = extract_option_distribution(&raw, &map).unwrap();
        let a_text = map.text_of('A').unwrap();
        assert!((out.option_probs.prob_of(a_text).unwrap() - 1.0).abs() < 1e-9);
        assert!((out.none_mass - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn refusal_prefix_goes_to_none_mass_and_flags_degenerate() {
        let map = binary_map();
        let raw = vec![("As".to_string(), -0.1f64)];
        let out = extract_option_distribution(&raw, &map).unwrap();
        assert!(out.degenerate);
        assert!((out.none_mass - 0.905).abs() < 1e-3, "none {}", out.none_mass);
        for &p in out.option_probs.probs() {
            assert!((p - 0.5).abs() < 1e-9, "uniform fallback expected");
        }
    }

    #[test]
    fn token_variants_match_the_rule() {
        for tok in ["A", " A", "A.", "A)", "A:", "(A", " (A)", "(A."] {
            assert!(token_matches_letter(tok, 'A'), "{tok:?} should match");
        }
        for tok in ["a", "AB", "A,", "x", "", "((A", "A) ."] {
            assert!(!token_matches_letter(tok, 'A'), "{tok:?} should not match");
        }
    }

    #[test]
    fn extraction_is_invariant_to_token_order() {
        let map = binary_map();
        let mut raw = vec![
            ("A".to_string(), -0.7f64),
            ("B".to_string(), -1.2f64),
            ("C".to_string(), -3.0f64),
            (" A".to_string(), -2.0f64),
        ];
        let forward = extract_option_distribution(&raw, &map).unwrap();
        raw.reverse();
        let backward = extract_option_distribution(&raw, &map).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn mass_accounting_stays_below_one_for_genuine_logprobs() {
        let map = binary_map();
        // Genuine softmax tail: probabilities sum below 1.
        let raw = vec![
            ("A".to_string(), (0.55f64).ln()),
            ("B".to_string(), (0.30f64).ln()),
            ("I".to_string(), (0.10f64).ln()),
        ];
        let out = extract_option_distribution(&raw, &map).unwrap();
        let option_mass = 0.55 + 0.30;
        assert!(option_mass + out.none_mass <= 1.0 + 1e-9);
        let a_text = map.text_of('A').unwrap();
        assert!((out.option_probs.prob_of(a_text).unwrap() - 0.55 / 0.85).abs() < 1e-9);
    }
}

//! Distributions over answer labels and the divergence measures built on them.
//!
//! Everything downstream reduces to one question: given several probability
//! distributions over the same label set, how far apart are they? The answer
//! used throughout is the mean Jensen-Shannon distance from the group's JS
//! centroid, computed by [`dd_divergence`]. The centroid itself is found by a
//! fixed-point iteration ([`js_centroid`]) whose gradient has a closed form
//! ([`centroid_objective_gradient`]), which the test suite checks against
//! finite differences.
//!
//! All divergences use natural logarithms (nats) unless a config says
//! otherwise; distributions containing zeros are smoothed with a small
//! additive constant before any KL-based computation so that logs stay
//! finite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Numerical slack allowed on "probabilities sum to one".
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Errors from constructing distributions or computing divergences.
#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("label and probability lists differ in length ({labels} labels, {probs} probabilities)")]
    LengthMismatch { labels: usize, probs: usize },
    #[error("distribution has no labels")]
    EmptyLabelSpace,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("negative probability {value} for label {label:?}")]
    NegativeProbability { label: String, value: f64 },
    #[error("probability {value} for label {label:?} is not finite")]
    NonFiniteProbability { label: String, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 within {NORMALIZATION_TOLERANCE}")]
    NotNormalized { sum: f64 },
    #[error("empty answer multiset")]
    EmptyAnswerSet,
    #[error("answer {0:?} is not in the label space")]
    UnknownLabel(String),
    #[error("distributions are over different label sets")]
    LabelMismatch,
    #[error("no distributions given")]
    EmptyDistributionList,
    #[error("smoothing epsilon must be a finite positive number, got {0}")]
    InvalidEpsilon(f64),
    #[error("coordinate {index} is zero; gradient is undefined on the boundary")]
    ZeroCoordinate { index: usize },
    #[error("normalized entropy needs at least two labels")]
    SingleLabelEntropy,
}

type Result<T> = std::result::Result<T, DivergenceError>;

/// Which logarithm divergences are reported in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    /// Natural log; divergences in nats. The default everywhere.
    #[default]
    Natural,
    /// Base-2 log; divergences in bits. Offered for comparison runs only.
    Two,
}

/// Transform applied to each centroid-to-member divergence before averaging.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerTermTransform {
    /// Square root, turning each term into a Jensen-Shannon distance (a
    /// metric). The default.
    #[default]
    Sqrt,
    /// Leave each term as a raw divergence.
    Identity,
}

/// Knobs for divergence and centroid computations.
///
/// The defaults reproduce the headline measure: natural-log JSD, per-term
/// square root, 1e-10 smoothing, and a centroid solved to 1e-10.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceConfig {
    pub smoothing_epsilon: f64,
    pub log_base: LogBase,
    pub per_term_transform: PerTermTransform,
    pub centroid_tolerance: f64,
    pub centroid_max_iterations: usize,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            smoothing_epsilon: 1e-10,
            log_base: LogBase::Natural,
            per_term_transform: PerTermTransform::Sqrt,
            centroid_tolerance: 1e-10,
            centroid_max_iterations: 1000,
        }
    }
}

/// A validated probability distribution over a finite set of string labels.
///
/// Invariants enforced at construction and on deserialization: labels are
/// unique and non-empty, probabilities are non-negative and finite, and the
/// total mass is 1 within [`NORMALIZATION_TOLERANCE`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionData", into = "DistributionData")]
pub struct Distribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

/// Plain serde shape backing [`Distribution`].
#[derive(Serialize, Deserialize)]
struct DistributionData {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<DistributionData> for Distribution {
    type Error = DivergenceError;
    fn try_from(d: DistributionData) -> Result<Self> {
        Distribution::new(d.labels, d.probs)
    }
}

impl From<Distribution> for DistributionData {
    fn from(d: Distribution) -> Self {
        DistributionData { labels: d.labels, probs: d.probs }
    }
}

impl Distribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(DivergenceError::LengthMismatch { labels: labels.len(), probs: probs.len() });
        }
        if labels.is_empty() {
            return Err(DivergenceError::EmptyLabelSpace);
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(DivergenceError::DuplicateLabel(label.clone()));
            }
        }
        let mut sum = 0.0;
        for (label, &p) in labels.iter().zip(&probs) {
            if !p.is_finite() {
                return Err(DivergenceError::NonFiniteProbability { label: label.clone(), value: p });
            }
            if p < 0.0 {
                return Err(DivergenceError::NegativeProbability { label: label.clone(), value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DivergenceError::NotNormalized { sum });
        }
        Ok(Distribution { labels, probs })
    }

    /// Uniform distribution over the given labels.
    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(DivergenceError::EmptyLabelSpace);
        }
        let p = 1.0 / n as f64;
        Distribution::new(labels, vec![p; n])
    }

    /// All mass on `label`.
    pub fn one_hot(labels: Vec<String>, label: &str) -> Result<Self> {
        let probs: Vec<f64> = labels.iter().map(|l| if l == label { 1.0 } else { 0.0 }).collect();
        if !labels.iter().any(|l| l == label) {
            return Err(DivergenceError::UnknownLabel(label.to_string()));
        }
        Distribution::new(labels, probs)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Probability of `label`, or an error if the label is absent.
    pub fn prob_of(&self, label: &str) -> Result<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probs[i])
            .ok_or_else(|| DivergenceError::UnknownLabel(label.to_string()))
    }

    /// Label with the highest probability; exact ties go to the
    /// lexicographically smallest label.
    pub fn argmax(&self) -> &str {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best]
                || (self.probs[i] == self.probs[best] && self.labels[i] < self.labels[best])
            {
                best = i;
            }
        }
        &self.labels[best]
    }

    pub fn has_zero(&self) -> bool {
        self.probs.contains(&0.0)
    }

    /// This distribution's probabilities reordered to `order`'s labels.
    fn probs_in_order(&self, order: &[String]) -> Result<Vec<f64>> {
        if order.len() != self.labels.len() {
            return Err(DivergenceError::LabelMismatch);
        }
        if order == self.labels.as_slice() {
            return Ok(self.probs.clone());
        }
        order
            .iter()
            .map(|l| self.prob_of(l).map_err(|_| DivergenceError::LabelMismatch))
            .collect()
    }
}

/// Normalized counts of `answers` over `label_space`, preserving the label
/// order given. Answers outside the space and empty multisets are errors.
pub fn empirical_distribution<S: AsRef<str>>(answers: &[S], label_space: &[String]) -> Result<Distribution> {
    if answers.is_empty() {
        return Err(DivergenceError::EmptyAnswerSet);
    }
    let mut counts = vec![0usize; label_space.len()];
    for a in answers {
        let a = a.as_ref();
        let i = label_space
            .iter()
            .position(|l| l == a)
            .ok_or_else(|| DivergenceError::UnknownLabel(a.to_string()))?;
        counts[i] += 1;
    }
    let total = answers.len() as f64;
    Distribution::new(label_space.to_vec(), counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Additive smoothing: add `epsilon` to every probability and renormalize.
///
/// Output probabilities are strictly positive (each at least
/// `epsilon / (1 + k*epsilon)` for k labels) and the argmax is unchanged.
pub fn smooth(d: &Distribution, epsilon: f64) -> Result<Distribution> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(DivergenceError::InvalidEpsilon(epsilon));
    }
    let k = d.len() as f64;
    let total: f64 = d.probs.iter().sum::<f64>() + k * epsilon;
    let probs = d.probs.iter().map(|&p| (p + epsilon) / total).collect();
    Ok(Distribution { labels: d.labels.clone(), probs })
}

/// Smooth only when the distribution actually contains a zero.
fn smoothed_if_zero(d: &Distribution, epsilon: f64) -> Result<Distribution> {
    if d.has_zero() {
        smooth(d, epsilon)
    } else {
        Ok(d.clone())
    }
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&pk, &qk) in p.iter().zip(q) {
        if pk > 0.0 {
            sum += pk * (pk / qk).ln();
        }
    }
    sum
}

/// Kullback-Leibler divergence KL(p || q) in nats.
///
/// Requires the same label set in the same order. Terms with `p_k = 0`
/// contribute nothing; a positive `p_k` over a zero `q_k` yields infinity,
/// so smooth `q` first if it may contain zeros.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.labels != q.labels {
        return Err(DivergenceError::LabelMismatch);
    }
    Ok(kl_raw(&p.probs, &q.probs))
}

fn js_raw(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| 0.5 * (a + b)).collect();
    0.5 * kl_raw(p, &m) + 0.5 * kl_raw(q, &m)
}

/// Jensen-Shannon divergence in nats, symmetric and bounded by ln 2.
///
/// The label sets must match; `q` is reordered to `p`'s label order if
/// needed. Inputs containing zeros are smoothed with the default epsilon
/// first.
pub fn js_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    let qp = q.probs_in_order(&p.labels)?;
    let eps = DivergenceConfig::default().smoothing_epsilon;
    let ps = smoothed_if_zero(p, eps)?;
    let qd = Distribution { labels: p.labels.clone(), probs: qp };
    let qs = smoothed_if_zero(&qd, eps)?;
    Ok(js_raw(&ps.probs, &qs.probs))
}

/// Result of a centroid solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CentroidSolution {
    /// The minimizing distribution (same labels as the inputs).
    pub centroid: Distribution,
    /// Total JS divergence from the centroid to the inputs, in nats.
    pub objective: f64,
    /// Fixed-point iterations performed.
    pub iterations: usize,
    /// False when the iteration hit its cap before reaching tolerance.
    pub converged: bool,
}

/// Inputs aligned to a shared label order and smoothed where they carry
/// zeros; the common starting point for centroid work.
fn aligned_smoothed(ps: &[Distribution], epsilon: f64) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let first = ps.first().ok_or(DivergenceError::EmptyDistributionList)?;
    let labels = first.labels.clone();
    let mut rows = Vec::with_capacity(ps.len());
    for p in ps {
        let probs = p.probs_in_order(&labels)?;
        let d = Distribution { labels: labels.clone(), probs };
        rows.push(smoothed_if_zero(&d, epsilon)?.probs);
    }
    Ok((labels, rows))
}

/// Objective value `sum_i JSD(q || p_i)` in nats at an arbitrary
/// non-negative point `q` (not necessarily normalized), with `q` given in
/// the label order of `ps[0]`.
///
/// Off-simplex evaluation exists so that finite-difference checks of
/// [`centroid_objective_gradient`] can perturb one coordinate at a time.
pub fn centroid_objective_at(q: &[f64], ps: &[Distribution]) -> Result<f64> {
    let eps = DivergenceConfig::default().smoothing_epsilon;
    let (labels, rows) = aligned_smoothed(ps, eps)?;
    if q.len() != labels.len() {
        return Err(DivergenceError::LabelMismatch);
    }
    let mut total = 0.0;
    for row in &rows {
        let m: Vec<f64> = q.iter().zip(row).map(|(&a, &b)| 0.5 * (a + b)).collect();
        total += 0.5 * kl_raw(q, &m) + 0.5 * kl_raw(row, &m);
    }
    Ok(total)
}

/// Gradient of the centroid objective at `q`, one partial per coordinate:
/// `0.5 * sum_i ln(q_k / m_ik)` with `m_ik = (q_k + p_ik) / 2`.
///
/// `q` follows the label order of `ps[0]`. Zero coordinates are rejected:
/// the objective is not differentiable on the simplex boundary.
pub fn centroid_objective_gradient(q: &[f64], ps: &[Distribution]) -> Result<Vec<f64>> {
    let eps = DivergenceConfig::default().smoothing_epsilon;
    let (labels, rows) = aligned_smoothed(ps, eps)?;
    if q.len() != labels.len() {
        return Err(DivergenceError::LabelMismatch);
    }
    if let Some(index) = q.iter().position(|&v| v == 0.0) {
        return Err(DivergenceError::ZeroCoordinate { index });
    }
    let mut grad = vec![0.0; q.len()];
    for row in &rows {
        for (k, g) in grad.iter_mut().enumerate() {
            let m = 0.5 * (q[k] + row[k]);
            *g += 0.5 * (q[k] / m).ln();
        }
    }
    Ok(grad)
}

/// Jensen-Shannon centroid: the distribution minimizing the total JS
/// divergence to `ps`.
///
/// Solved by the fixed-point update `q_k <- normalize((prod_i m_ik)^(1/n))`
/// starting from the arithmetic mean, stopping when no coordinate moves by
/// more than `cfg.centroid_tolerance`. The objective is non-increasing
/// along the iteration; if the cap is reached first the best iterate is
/// returned with `converged = false`.
pub fn js_centroid(ps: &[Distribution], cfg: &DivergenceConfig) -> Result<CentroidSolution> {
    js_centroid_trace(ps, cfg).map(|(solution, _)| solution)
}

/// As [`js_centroid`], additionally returning the objective value after the
/// initialization and after every iteration, for convergence diagnostics.
pub fn js_centroid_trace(ps: &[Distribution], cfg: &DivergenceConfig) -> Result<(CentroidSolution, Vec<f64>)> {
    if !cfg.smoothing_epsilon.is_finite() || cfg.smoothing_epsilon <= 0.0 {
        return Err(DivergenceError::InvalidEpsilon(cfg.smoothing_epsilon));
    }
    let (labels, rows) = aligned_smoothed(ps, cfg.smoothing_epsilon)?;
    let n = rows.len() as f64;
    let k = labels.len();

    let mut q: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let objective_at = |q: &[f64]| -> f64 {
        rows.iter().map(|row| js_raw(q, row)).sum()
    };

    let mut trace = vec![objective_at(&q)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.centroid_max_iterations {
        iterations += 1;
        // Geometric mean of the midpoint rows, renormalized. Work in log
        // space: every m_ik is positive because inputs were smoothed.
        let mut next: Vec<f64> = (0..k)
            .map(|j| {
                let log_sum: f64 = rows.iter().map(|row| (0.5 * (q[j] + row[j])).ln()).sum();
                (log_sum / n).exp()
            })
            .collect();
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        let delta = q
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        q = next;
        trace.push(objective_at(&q));
        if delta < cfg.centroid_tolerance {
            converged = true;
            break;
        }
    }

    let objective = *trace.last().expect("trace holds the initial objective");
    let centroid = Distribution::new(labels, q).expect("fixed-point iterate stays on the simplex");
    Ok((CentroidSolution { centroid, objective, iterations, converged }, trace))
}

/// Mean transformed JS divergence from the group's centroid to each member:
/// the headline inconsistency measure.
///
/// With default config this is `(1/n) * sum_i sqrt(JSD(C* || p_i))` in
/// nats. For two labels a complete flip between two one-hot answers scores
/// about 0.4645, and about 0.5641 for three labels; agreement scores 0.
pub fn dd_divergence(ps: &[Distribution], cfg: &DivergenceConfig) -> Result<f64> {
    let solution = js_centroid(ps, cfg)?;
    let (_, rows) = aligned_smoothed(ps, cfg.smoothing_epsilon)?;
    let c = solution.centroid.probs();
    let scale = match cfg.log_base {
        LogBase::Natural => 1.0,
        LogBase::Two => std::f64::consts::LN_2,
    };
    let mut total = 0.0;
    for row in &rows {
        let term = js_raw(c, row) / scale;
        // Guard tiny negative values from float cancellation before sqrt.
        let term = term.max(0.0);
        total += match cfg.per_term_transform {
            PerTermTransform::Sqrt => term.sqrt(),
            PerTermTransform::Identity => term,
        };
    }
    Ok(total / rows.len() as f64)
}

/// Shannon entropy normalized by `log(k)` so that every distribution over
/// two or more labels scores in [0, 1].
pub fn normalized_entropy(d: &Distribution) -> Result<f64> {
    let k = d.len();
    if k < 2 {
        return Err(DivergenceError::SingleLabelEntropy);
    }
    let mut h = 0.0;
    for &p in d.probs() {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    Ok(h / (k as f64).ln())
}

/// Largest value [`dd_divergence`] can reach over `k` labels with default
/// config: a complete flip among `k` one-hot answers.
pub fn flip_bound(k: usize) -> f64 {
    let k = k as f64;
    // Centroid of the k one-hots is uniform; each term is
    // JSD(uniform || one-hot), whose closed form follows from the midpoint
    // ((k+1)/(2k), 1/(2k), ..., 1/(2k)).
    let m_hit = (k + 1.0) / (2.0 * k);
    let kl_c = (1.0 / k) * ((1.0 / k) / m_hit).ln() + ((k - 1.0) / k) * 2.0f64.ln();
    let kl_p = (1.0 / m_hit).ln();
    (0.5 * (kl_c + kl_p)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(labels: &[&str], probs: &[f64]) -> Distribution {
        Distribution::new(labels.iter().map(|s| s.to_string()).collect(), probs.to_vec()).unwrap()
    }

    fn two(p: f64) -> Distribution {
        dist(&["a", "b"], &[p, 1.0 - p])
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(Distribution::new(labels.clone(), vec![0.5]).is_err());
        assert!(Distribution::new(labels.clone(), vec![0.7, 0.7]).is_err());
        assert!(Distribution::new(labels.clone(), vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]).is_err());
        assert!(Distribution::new(vec![], vec![]).is_err());
        assert!(Distribution::new(labels, vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn empirical_counts_and_errors() {
        let space: Vec<String> = vec!["yes".into(), "no".into()];
        let d = empirical_distribution(&["yes", "yes", "no", "yes"], &space).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);
        assert!(matches!(
            empirical_distribution::<&str>(&[], &space),
            Err(DivergenceError::EmptyAnswerSet)
        ));
        assert!(matches!(
            empirical_distribution(&["maybe"], &space),
            Err(DivergenceError::UnknownLabel(_))
        ));
    }

    #[test]
    fn kl_matches_hand_computation() {
        let p = two(0.5);
        let q = two(0.25);
        let v = kl_divergence(&p, &q).unwrap();
        assert!((v - 0.143841).abs() < 1e-6, "got {v}");
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_after_smoothing_one_hots() {
        let eps = 1e-10;
        let p = smooth(&dist(&["a", "b"], &[1.0, 0.0]), eps).unwrap();
        let q = smooth(&dist(&["a", "b"], &[0.0, 1.0]), eps).unwrap();
        let v = kl_divergence(&p, &q).unwrap();
        assert!((v - 23.03).abs() < 0.01, "got {v}");
    }

    #[test]
    fn kl_requires_matching_labels() {
        let p = two(0.5);
        let q = dist(&["x", "y"], &[0.5, 0.5]);
        assert!(matches!(kl_divergence(&p, &q), Err(DivergenceError::LabelMismatch)));
    }

    #[test]
    fn js_known_values() {
        let v = js_divergence(&two(0.75), &two(0.25)).unwrap();
        assert!((v - 0.130812).abs() < 1e-6, "got {v}");
        let far = js_divergence(&two(1.0), &two(0.0)).unwrap();
        assert!((far - std::f64::consts::LN_2).abs() < 1e-6, "got {far}");
    }

    #[test]
    fn js_aligns_label_order() {
        let p = dist(&["a", "b"], &[0.75, 0.25]);
        let q = dist(&["b", "a"], &[0.75, 0.25]);
        let v = js_divergence(&p, &q).unwrap();
        assert!((v - 0.130812).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn smoothing_is_positive_and_keeps_argmax() {
        let d = dist(&["a", "b", "c"], &[0.7, 0.3, 0.0]);
        let s = smooth(&d, 1e-10).unwrap();
        assert!(s.probs().iter().all(|&p| p > 0.0));
        assert!((s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s.argmax(), d.argmax());
        assert!(smooth(&d, 0.0).is_err());
        assert!(smooth(&d, -1e-3).is_err());
    }

    #[test]
    fn centroid_of_mirrored_pair_is_uniform() {
        let sol = js_centroid(&[two(1.0), two(0.0)], &DivergenceConfig::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.centroid.probs()[0] - 0.5).abs() < 1e-9);
        assert!((sol.centroid.probs()[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn centroid_of_identical_inputs_is_that_input() {
        let p = two(0.3);
        let sol = js_centroid(&[p.clone(), p.clone(), p.clone()], &DivergenceConfig::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.centroid.probs()[0] - 0.3).abs() < 1e-9);
        assert!(sol.objective < 1e-12, "objective {}", sol.objective);
    }

    #[test]
    fn centroid_rejects_empty_list() {
        assert!(matches!(
            js_centroid(&[], &DivergenceConfig::default()),
            Err(DivergenceError::EmptyDistributionList)
        ));
    }

    #[test]
    fn centroid_reports_non_convergence_at_tiny_cap() {
        let cfg = DivergenceConfig { centroid_max_iterations: 1, centroid_tolerance: 1e-16, ..Default::default() };
        let sol = js_centroid(&[two(0.9), two(0.2), two(0.4)], &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn dd_two_label_flip_bound() {
        let v = dd_divergence(&[two(1.0), two(0.0)], &DivergenceConfig::default()).unwrap();
        assert!((v - 0.4645).abs() < 1e-3, "got {v}");
        assert!((flip_bound(2) - (0.75 * (4.0f64 / 3.0).ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dd_three_label_flip_bound() {
        let labels = &["a", "b", "c"];
        let ps = vec![
            dist(labels, &[1.0, 0.0, 0.0]),
            dist(labels, &[0.0, 1.0, 0.0]),
            dist(labels, &[0.0, 0.0, 1.0]),
        ];
        let v = dd_divergence(&ps, &DivergenceConfig::default()).unwrap();
        assert!((v - 0.5641).abs() < 1e-3, "got {v}");
        assert!((flip_bound(3) - v).abs() < 1e-6);
    }

    #[test]
    fn dd_agreement_is_zero() {
        let p = two(0.6);
        let v = dd_divergence(&[p.clone(), p.clone()], &DivergenceConfig::default()).unwrap();
        assert!(v < 1e-9, "got {v}");
    }

    #[test]
    fn dd_identity_transform_skips_sqrt() {
        let ps = [two(1.0), two(0.0)];
        let cfg = DivergenceConfig { per_term_transform: PerTermTransform::Identity, ..Default::default() };
        let v = dd_divergence(&ps, &cfg).unwrap();
        assert!((v - 0.4645f64 * 0.4645).abs() < 1e-3, "got {v}");
    }

    #[test]
    fn dd_base_two_rescales_terms() {
        let ps = [two(1.0), two(0.0)];
        let nats = dd_divergence(&ps, &DivergenceConfig::default()).unwrap();
        let cfg = DivergenceConfig { log_base: LogBase::Two, ..Default::default() };
        let bits = dd_divergence(&ps, &cfg).unwrap();
        assert!((bits - nats / std::f64::consts::LN_2.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn gradient_rejects_boundary_points() {
        let ps = [two(0.5)];
        assert!(matches!(
            centroid_objective_gradient(&[1.0, 0.0], &ps),
            Err(DivergenceError::ZeroCoordinate { index: 1 })
        ));
    }

    #[test]
    fn gradient_vanishes_at_the_centroid_tangentially() {
        let ps = [two(0.8), two(0.3), two(0.55)];
        let sol = js_centroid(&ps, &DivergenceConfig::default()).unwrap();
        let g = centroid_objective_gradient(sol.centroid.probs(), &ps).unwrap();
        // On the simplex only the tangential component must vanish: the
        // partials are equal at the optimum.
        assert!((g[0] - g[1]).abs() < 1e-6, "gradient {g:?}");
    }

    #[test]
    fn normalized_entropy_known_value() {
        let v = normalized_entropy(&dist(&["a", "b"], &[0.9, 0.1])).unwrap();
        assert!((v - 0.469).abs() < 1e-3, "got {v}");
        assert_eq!(normalized_entropy(&dist(&["a", "b"], &[0.5, 0.5])).unwrap(), 1.0);
        assert!(matches!(
            normalized_entropy(&dist(&["a"], &[1.0])),
            Err(DivergenceError::SingleLabelEntropy)
        ));
    }

    #[test]
    fn argmax_ties_break_lexicographically()
    {
        assert_eq!(dist(&["b", "a"], &[0.5, 0.5]).argmax(), "a");
        assert_eq!(dist(&["supports", "opposes"], &[0.5, 0.5]).argmax(), "opposes");
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let d = two(0.25);
        let json = serde_json::to_string(&d).unwrap();
        let back: Distribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        let bad = r#"{"labels":["a","b"],"probs":[0.9,0.3]}"#;
        assert!(serde_json::from_str::<Distribution>(bad).is_err());
    }
}

//! Advice-value analytics: information gain per social event, expected
//! information gain, the confidence-conditional expected-information-gain
//! area for the bin-manipulated advisors, and Type-2 AUROC.
//!
//! Information gain here is a probability difference (posterior − prior
//! probability of the judge being correct given the advice event), not an
//! entropy measure.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::advisors::{Exp1Deck, Exp2Policy, Exp3Policy, EXP1_BLOCK_SIZE};
use crate::core::Probability;
use crate::models::prob_slope;

#[derive(Debug, Error, PartialEq)]
pub enum InfoGainError {
    #[error("event {0} has zero probability")]
    ZeroProbabilityEvent(usize),
    #[error("event index {0} out of range")]
    NoSuchEvent(usize),
    #[error("event probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("type-2 AUROC needs at least one correct and one incorrect trial")]
    DegenerateSample,
}

/// One social event: its likelihood under judge correctness/error and its
/// marginal probability (law of total probability over the prior).
#[derive(Debug, Clone, PartialEq)]
pub struct EventConditional {
    pub label: &'static str,
    pub p_given_correct: f64,
    pub p_given_error: f64,
}

/// Event conditionals plus the judge's prior probability-correct.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvicePosteriorTable {
    pub prior: Probability,
    pub events: Vec<EventConditional>,
}

/// Default analytics prior: the staircase's nominal accuracy rate.
pub const DEFAULT_PRIOR: f64 = 0.707;

impl AdvicePosteriorTable {
    pub fn new(prior: Probability, events: Vec<EventConditional>) -> Result<Self, InfoGainError> {
        let table = AdvicePosteriorTable { prior, events };
        let total: f64 = (0..table.events.len()).map(|i| table.p_event(i)).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(InfoGainError::NotNormalized(total));
        }
        Ok(table)
    }

    /// Four events (agree/disagree × advisor confidence) for a deck advisor,
    /// whose advice is independent of the judge.
    pub fn from_exp1_deck(deck: &Exp1Deck, prior: Probability) -> Self {
        let n = EXP1_BLOCK_SIZE as f64;
        let cc = deck.correct_confident as f64 / n;
        let cu = deck.correct_unconfident as f64 / n;
        let iu = deck.incorrect_unconfident as f64 / n;
        let ic = deck.incorrect_confident as f64 / n;
        // agreement given a correct judge is advisor correctness, and vice versa
        AdvicePosteriorTable {
            prior,
            events: vec![
                EventConditional {
                    label: "agree_confident",
                    p_given_correct: cc,
                    p_given_error: ic,
                },
                EventConditional {
                    label: "agree_unsure",
                    p_given_correct: cu,
                    p_given_error: iu,
                },
                EventConditional {
                    label: "disagree_unsure",
                    p_given_correct: iu,
                    p_given_error: cu,
                },
                EventConditional {
                    label: "disagree_confident",
                    p_given_correct: ic,
                    p_given_error: cc,
                },
            ],
        }
    }

    /// Two events (agree/disagree) for a policy advisor conditioned on the
    /// judge's accuracy.
    pub fn from_exp2_policy(policy: &Exp2Policy, prior: Probability) -> Self {
        let pc = policy.p_agree_given_correct.value();
        let pe = policy.p_agree_given_incorrect.value();
        AdvicePosteriorTable {
            prior,
            events: vec![
                EventConditional {
                    label: "agree",
                    p_given_correct: pc,
                    p_given_error: pe,
                },
                EventConditional {
                    label: "disagree",
                    p_given_correct: 1.0 - pc,
                    p_given_error: 1.0 - pe,
                },
            ],
        }
    }

    /// Marginal event probability by the law of total probability.
    pub fn p_event(&self, event: usize) -> f64 {
        let e = &self.events[event];
        let p = self.prior.value();
        e.p_given_correct * p + e.p_given_error * (1.0 - p)
    }
}

/// IG(e) = p(correct | e) − p(correct), signed.
pub fn info_gain(table: &AdvicePosteriorTable, event: usize) -> Result<f64, InfoGainError> {
    if event >= table.events.len() {
        return Err(InfoGainError::NoSuchEvent(event));
    }
    let pe = table.p_event(event);
    if pe == 0.0 {
        return Err(InfoGainError::ZeroProbabilityEvent(event));
    }
    let prior = table.prior.value();
    let posterior = table.events[event].p_given_correct * prior / pe;
    Ok(posterior - prior)
}

/// Mean absolute information gain over the possible advice events.
/// Zero-probability events carry zero gain.
pub fn mean_abs_info_gain(table: &AdvicePosteriorTable) -> f64 {
    let n = table.events.len() as f64;
    (0..table.events.len())
        .map(|i| info_gain(table, i).map(f64::abs).unwrap_or(0.0))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Mean over events of |IG(e)|·p(e) (the published convention).
    Mean,
    /// Sum over events of |IG(e)|·p(e).
    Sum,
}

/// Expected information gain: |IG| scaled by each event's probability.
pub fn expected_info_gain(table: &AdvicePosteriorTable, agg: Aggregation) -> f64 {
    let total: f64 = (0..table.events.len())
        .map(|i| info_gain(table, i).map(f64::abs).unwrap_or(0.0) * table.p_event(i))
        .sum();
    match agg {
        Aggregation::Sum => total,
        Aggregation::Mean => total / table.events.len() as f64,
    }
}

/// Grid resolution for the confidence-conditional area; results are stable
/// to three significant figures from a few hundred points up.
pub const AUC_GRID_POINTS: usize = 1000;

/// Area under the expected-information-gain curve for a bin-conditional
/// advisor, over an ideal observer whose pre-advice confidence is Gaussian
/// on the half-scale.
///
/// At each confidence level the trial prior comes from the linear
/// confidence-probability map; the posterior after agreement/disagreement
/// uses the advisor's true conditionals; each gain (in confidence units) is
/// scaled by the normalisation term of the model's Bayes formula (the
/// independence-form likelihood denominator), and the |agree| + |disagree|
/// curve is averaged under the Gaussian weights renormalized over the scale.
pub fn auc_expected_info_gain_exp3(
    policy: &Exp3Policy,
    conf_mean: f64,
    conf_sd: f64,
    scale_steps: u32,
) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let cut_lo = conf_mean + conf_sd * normal.inverse_cdf(0.30);
    let cut_hi = conf_mean + conf_sd * normal.inverse_cdf(0.70);
    let slope = prob_slope(scale_steps);
    let scale = scale_steps as f64;
    let conf_dist = Normal::new(conf_mean, conf_sd).unwrap();
    let p_agree_err = policy.p_agree_given_incorrect.value();

    let n = AUC_GRID_POINTS;
    let step = scale / (n - 1) as f64;
    let mut values = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let c = i as f64 * step;
        let a = if c < cut_lo {
            policy.p_agree_by_bin[0].value()
        } else if c > cut_hi {
            policy.p_agree_by_bin[2].value()
        } else {
            policy.p_agree_by_bin[1].value()
        };
        let p = 0.5 + slope * c;
        let z_agree = p * a + (1.0 - p) * p_agree_err;
        let z_disagree = 1.0 - z_agree;
        let post_agree = p * a / z_agree;
        let post_disagree = p * (1.0 - a) / z_disagree;
        let norm_agree = p * a + (1.0 - p) * (1.0 - a);
        let norm_disagree = 1.0 - norm_agree;
        let v = ((post_agree - p).abs() * norm_agree
            + (post_disagree - p).abs() * norm_disagree)
            / slope;
        values.push(v);
        weights.push(conf_dist.pdf(c));
    }

    let trapezoid = |ys: &[f64]| -> f64 {
        ys.windows(2).map(|w| (w[0] + w[1]) * 0.5 * step).sum()
    };
    let weighted: Vec<f64> = values.iter().zip(&weights).map(|(v, w)| v * w).collect();
    trapezoid(&weighted) / trapezoid(&weights)
}

/// Tie-corrected rank statistic P(conf_correct > conf_incorrect) +
/// 0.5·P(equal) over all correct × incorrect trial pairs, via midranks.
pub fn type2_auroc(trials: &[(f64, bool)]) -> Result<f64, InfoGainError> {
    let n_correct = trials.iter().filter(|(_, c)| *c).count();
    let n_incorrect = trials.len() - n_correct;
    if n_correct == 0 || n_incorrect == 0 {
        return Err(InfoGainError::DegenerateSample);
    }
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| trials[a].0.partial_cmp(&trials[b].0).unwrap());
    // midranks over tie groups
    let mut ranks = vec![0.0f64; trials.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && trials[order[j + 1]].0 == trials[order[i]].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let rank_sum_correct: f64 = trials
        .iter()
        .zip(&ranks)
        .filter(|((_, c), _)| *c)
        .map(|(_, r)| r)
        .sum();
    let nc = n_correct as f64;
    let ni = n_incorrect as f64;
    Ok((rank_sum_correct - nc * (nc + 1.0) / 2.0) / (nc * ni))
}

/// Per-advisor analytics row emitted by the CLI.
#[derive(Debug, Clone)]
pub struct AdvisorAnalytics {
    pub advisor: String,
    pub event_labels: Vec<&'static str>,
    pub event_info_gains: Vec<f64>,
    pub event_probabilities: Vec<f64>,
    pub event_p_given_correct: Vec<f64>,
    pub ig_mean_abs: f64,
    pub ig_e_mean: f64,
    pub ig_e_sum: f64,
    pub type2_auroc: Option<f64>,
    pub auc_ig_e: Option<f64>,
}

pub fn analyze_table(advisor: &str, table: &AdvicePosteriorTable) -> AdvisorAnalytics {
    let igs: Vec<f64> = (0..table.events.len())
        .map(|i| info_gain(table, i).unwrap_or(0.0))
        .collect();
    AdvisorAnalytics {
        advisor: advisor.to_string(),
        event_labels: table.events.iter().map(|e| e.label).collect(),
        event_info_gains: igs,
        event_probabilities: (0..table.events.len()).map(|i| table.p_event(i)).collect(),
        event_p_given_correct: table.events.iter().map(|e| e.p_given_correct).collect(),
        ig_mean_abs: mean_abs_info_gain(table),
        ig_e_mean: expected_info_gain(table, Aggregation::Mean),
        ig_e_sum: expected_info_gain(table, Aggregation::Sum),
        type2_auroc: None,
        auc_ig_e: None,
    }
}

/// Type-2 AUROC of a deck's design counts (confidence 1.0/0.0 per card).
pub fn deck_type2_auroc(deck: &Exp1Deck) -> f64 {
    let mut trials = Vec::new();
    let push = |v: &mut Vec<(f64, bool)>, n: u32, conf: f64, correct: bool| {
        v.extend(std::iter::repeat_n((conf, correct), n as usize));
    };
    push(&mut trials, deck.correct_confident, 1.0, true);
    push(&mut trials, deck.correct_unconfident, 0.0, true);
    push(&mut trials, deck.incorrect_confident, 1.0, false);
    push(&mut trials, deck.incorrect_unconfident, 0.0, false);
    type2_auroc(&trials).expect("decks contain both correct and incorrect cards")
}

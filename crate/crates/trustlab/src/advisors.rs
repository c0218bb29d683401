//! Generative advisor policies for the three virtual-advisor experiments.
//!
//! Experiment 1 advisors draw without replacement from a fixed per-block deck
//! of (correct?, confident?) cards, independent of the judge. Experiments 2
//! and 3 condition agreement on the judge's accuracy (and, in 3, on the
//! judge's binned pre-advice confidence).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{AdviceEvent, ConfidenceReport, Probability, RngStream, Side};

#[derive(Debug, Error, PartialEq)]
pub enum AdvisorError {
    #[error("deck exhausted: more than {0} draws in one block")]
    DeckExhausted(usize),
    #[error("deck counts must sum to {expected}, got {got}")]
    BadDeck { expected: u32, got: u32 },
    #[error("degenerate reference sample: all confidence values identical")]
    DegenerateSample,
    #[error("reference sample too small: {0} < 10")]
    SampleTooSmall(usize),
    #[error("unknown advisor profile '{0}'")]
    UnknownProfile(String),
}

/// Event counts over a 10-encounter block:
/// (incorrect confident, incorrect unconfident, correct unconfident, correct confident).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exp1Deck {
    pub incorrect_confident: u32,
    pub incorrect_unconfident: u32,
    pub correct_unconfident: u32,
    pub correct_confident: u32,
}

pub const EXP1_BLOCK_SIZE: u32 = 10;

impl Exp1Deck {
    pub fn new(ic: u32, iu: u32, cu: u32, cc: u32) -> Result<Self, AdvisorError> {
        let total = ic + iu + cu + cc;
        if total != EXP1_BLOCK_SIZE {
            return Err(AdvisorError::BadDeck {
                expected: EXP1_BLOCK_SIZE,
                got: total,
            });
        }
        Ok(Exp1Deck {
            incorrect_confident: ic,
            incorrect_unconfident: iu,
            correct_unconfident: cu,
            correct_confident: cc,
        })
    }

    pub fn acc_cal() -> Self {
        Exp1Deck::new(0, 2, 3, 5).unwrap()
    }
    pub fn acc_uncal() -> Self {
        Exp1Deck::new(1, 1, 4, 4).unwrap()
    }
    pub fn inacc_cal() -> Self {
        Exp1Deck::new(0, 4, 1, 5).unwrap()
    }
    pub fn inacc_uncal() -> Self {
        Exp1Deck::new(2, 2, 3, 3).unwrap()
    }

    pub fn accuracy(&self) -> f64 {
        (self.correct_unconfident + self.correct_confident) as f64 / EXP1_BLOCK_SIZE as f64
    }

    pub fn high_confidence_rate(&self) -> f64 {
        (self.incorrect_confident + self.correct_confident) as f64 / EXP1_BLOCK_SIZE as f64
    }

    /// Cards as (correct, confident) pairs, unshuffled.
    pub fn cards(&self) -> Vec<(bool, bool)> {
        let mut v = Vec::with_capacity(EXP1_BLOCK_SIZE as usize);
        v.extend(std::iter::repeat_n((false, true), self.incorrect_confident as usize));
        v.extend(std::iter::repeat_n((false, false), self.incorrect_unconfident as usize));
        v.extend(std::iter::repeat_n((true, false), self.correct_unconfident as usize));
        v.extend(std::iter::repeat_n((true, true), self.correct_confident as usize));
        v
    }

    /// Shuffle the deck for one block of encounters.
    pub fn shuffled(&self, rng: &mut RngStream) -> Exp1DeckState {
        let mut cards = self.cards();
        cards.shuffle(rng);
        Exp1DeckState { cards, next: 0 }
    }
}

/// A shuffled per-block deck being consumed without replacement.
#[derive(Debug, Clone)]
pub struct Exp1DeckState {
    cards: Vec<(bool, bool)>,
    next: usize,
}

impl Exp1DeckState {
    pub fn remaining(&self) -> usize {
        self.cards.len() - self.next
    }
}

/// Draw the next card; the advice side follows the card's correctness and is
/// independent of the judge's choice.
pub fn exp1_advise(
    deck: &mut Exp1DeckState,
    truth: Side,
    judge_side: Side,
) -> Result<AdviceEvent, AdvisorError> {
    let (correct, confident) = *deck
        .cards
        .get(deck.next)
        .ok_or(AdvisorError::DeckExhausted(deck.cards.len()))?;
    deck.next += 1;
    let advisor_side = if correct { truth } else { truth.other() };
    Ok(AdviceEvent::from_sides(
        advisor_side,
        truth,
        judge_side,
        Some(confident),
    ))
}

/// Agreement probabilities conditional on the judge's accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exp2Policy {
    pub p_agree_given_correct: Probability,
    pub p_agree_given_incorrect: Probability,
}

impl Exp2Policy {
    fn of(pc: f64, pe: f64) -> Self {
        Exp2Policy {
            p_agree_given_correct: Probability::new(pc).unwrap(),
            p_agree_given_incorrect: Probability::new(pe).unwrap(),
        }
    }

    pub fn hiacc_hiagr() -> Self {
        Self::of(6.5 / 7.0, 1.5 / 3.0)
    }
    pub fn hiacc_loagr() -> Self {
        Self::of(5.5 / 7.0, 0.5 / 3.0)
    }
    pub fn loacc_hiagr() -> Self {
        Self::of(5.5 / 7.0, 2.5 / 3.0)
    }
    pub fn loacc_loagr() -> Self {
        Self::of(4.5 / 7.0, 1.5 / 3.0)
    }

    /// Expected advisor accuracy for a judge of the given accuracy.
    pub fn expected_accuracy(&self, judge_acc: f64) -> f64 {
        judge_acc * self.p_agree_given_correct.value()
            + (1.0 - judge_acc) * (1.0 - self.p_agree_given_incorrect.value())
    }

    pub fn expected_agreement(&self, judge_acc: f64) -> f64 {
        judge_acc * self.p_agree_given_correct.value()
            + (1.0 - judge_acc) * self.p_agree_given_incorrect.value()
    }
}

/// Bernoulli agreement conditional on the judge's correctness; the advisor's
/// side and correctness follow from the agreement outcome.
pub fn exp2_advise(
    policy: &Exp2Policy,
    judge_correct: bool,
    judge_side: Side,
    rng: &mut RngStream,
) -> AdviceEvent {
    let p = if judge_correct {
        policy.p_agree_given_correct
    } else {
        policy.p_agree_given_incorrect
    };
    let agrees = rng.gen::<f64>() < p.value();
    let advisor_side = if agrees { judge_side } else { judge_side.other() };
    let truth = if judge_correct {
        judge_side
    } else {
        judge_side.other()
    };
    AdviceEvent::from_sides(advisor_side, truth, judge_side, None)
}

/// Confidence bin of a pre-advice report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bin {
    Low,
    Mid,
    High,
}

/// Quantile cuts over a reference sample of recent pre-advice confidence
/// steps. Bin ranges: strict below the lower cut, strict above the upper;
/// ties fall into the middle bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBinner {
    pub lower_cut: f64,
    pub upper_cut: f64,
}

impl ConfidenceBinner {
    /// Cuts at the 30th and 70th percentiles of the sample.
    pub fn from_sample(sample: &[u32]) -> Result<Self, AdvisorError> {
        if sample.len() < 10 {
            return Err(AdvisorError::SampleTooSmall(sample.len()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_unstable();
        if sorted.first() == sorted.last() {
            return Err(AdvisorError::DegenerateSample);
        }
        let q = |frac: f64| -> f64 {
            let idx = ((frac * sorted.len() as f64).ceil() as usize).max(1) - 1;
            sorted[idx.min(sorted.len() - 1)] as f64
        };
        Ok(ConfidenceBinner {
            lower_cut: q(0.30),
            upper_cut: q(0.70),
        })
    }

    pub fn assign(&self, confidence_step: u32) -> Bin {
        let c = confidence_step as f64;
        if c < self.lower_cut {
            Bin::Low
        } else if c > self.upper_cut {
            Bin::High
        } else {
            Bin::Mid
        }
    }
}

/// Refresh cuts from the previous blocks' confidences. On a degenerate or
/// undersized sample the error carries through and the previous binner stays
/// in use.
pub fn rebin(
    _previous: &ConfidenceBinner,
    recent_confidences: &[u32],
) -> Result<ConfidenceBinner, AdvisorError> {
    ConfidenceBinner::from_sample(recent_confidences)
}

/// Bin-conditional agreement probabilities (judge correct) plus a flat
/// agreement probability after judge errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exp3Policy {
    /// p(agree | judge correct, bin) for (low, mid, high).
    pub p_agree_by_bin: [Probability; 3],
    pub p_agree_given_incorrect: Probability,
}

impl Exp3Policy {
    fn of(bins: [f64; 3]) -> Self {
        Exp3Policy {
            p_agree_by_bin: bins.map(|p| Probability::new(p).unwrap()),
            p_agree_given_incorrect: Probability::new(0.30).unwrap(),
        }
    }

    pub fn bias_sharing() -> Self {
        Self::of([0.60, 0.70, 0.80])
    }
    pub fn unbiased() -> Self {
        Self::of([0.70, 0.70, 0.70])
    }
    pub fn anti_bias() -> Self {
        Self::of([0.80, 0.70, 0.60])
    }

    pub fn agreement_for(&self, bin: Bin) -> Probability {
        match bin {
            Bin::Low => self.p_agree_by_bin[0],
            Bin::Mid => self.p_agree_by_bin[1],
            Bin::High => self.p_agree_by_bin[2],
        }
    }
}

/// Agreement drawn from the bin-specific probability on correct trials and
/// from the flat error probability otherwise.
pub fn exp3_advise(
    policy: &Exp3Policy,
    binner: &ConfidenceBinner,
    judge_correct: bool,
    judge_conf: &ConfidenceReport,
    judge_side: Side,
    rng: &mut RngStream,
) -> AdviceEvent {
    let p = if judge_correct {
        policy.agreement_for(binner.assign(judge_conf.step))
    } else {
        policy.p_agree_given_incorrect
    };
    let agrees = rng.gen::<f64>() < p.value();
    let advisor_side = if agrees { judge_side } else { judge_side.other() };
    let truth = if judge_correct {
        judge_side
    } else {
        judge_side.other()
    };
    AdviceEvent::from_sides(advisor_side, truth, judge_side, None)
}

/// Named advisor rosters, loadable from the run configuration.
pub fn exp1_profile(name: &str) -> Result<Exp1Deck, AdvisorError> {
    match name {
        "acc_cal" => Ok(Exp1Deck::acc_cal()),
        "acc_uncal" => Ok(Exp1Deck::acc_uncal()),
        "inacc_cal" => Ok(Exp1Deck::inacc_cal()),
        "inacc_uncal" => Ok(Exp1Deck::inacc_uncal()),
        other => Err(AdvisorError::UnknownProfile(other.to_string())),
    }
}

pub fn exp2_profile(name: &str) -> Result<Exp2Policy, AdvisorError> {
    match name {
        "hiacc_hiagr" => Ok(Exp2Policy::hiacc_hiagr()),
        "hiacc_loagr" => Ok(Exp2Policy::hiacc_loagr()),
        "loacc_hiagr" => Ok(Exp2Policy::loacc_hiagr()),
        "loacc_loagr" => Ok(Exp2Policy::loacc_loagr()),
        other => Err(AdvisorError::UnknownProfile(other.to_string())),
    }
}

pub fn exp3_profile(name: &str) -> Result<Exp3Policy, AdvisorError> {
    match name {
        "bias_sharing" => Ok(Exp3Policy::bias_sharing()),
        "unbiased" => Ok(Exp3Policy::unbiased()),
        "anti_bias" => Ok(Exp3Policy::anti_bias()),
        other => Err(AdvisorError::UnknownProfile(other.to_string())),
    }
}

pub const EXP1_PROFILE_NAMES: [&str; 4] = ["acc_cal", "acc_uncal", "inacc_cal", "inacc_uncal"];
pub const EXP2_PROFILE_NAMES: [&str; 4] =
    ["hiacc_hiagr", "hiacc_loagr", "loacc_hiagr", "loacc_loagr"];
pub const EXP3_PROFILE_NAMES: [&str; 3] = ["bias_sharing", "unbiased", "anti_bias"];

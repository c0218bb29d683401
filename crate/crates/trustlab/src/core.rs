//! Shared domain types, probability arithmetic and deterministic RNG streams.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("agreement inversion undefined for a chance-level judge (accuracy 0.5)")]
    ChanceJudge,
    #[error("confidence step {step} outside [1, {scale}]")]
    StepOutOfRange { step: u32, scale: u32 },
}

/// A real in [0, 1]. Construction of out-of-range values is rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const HALF: Probability = Probability(0.5);

    pub fn new(value: f64) -> Result<Self, CoreError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(CoreError::ProbabilityOutOfRange(value))
        }
    }

    /// Clamp into [0, 1]. For results of arithmetic that is analytically
    /// in-range but may drift by an ulp.
    pub fn clamped(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = CoreError;
    fn try_from(v: f64) -> Result<Self, CoreError> {
        Probability::new(v)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Binary choice space: A/B maps to Left/Right in the experiments and to the
/// sign of the signal in the network model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::A => "A",
            Side::B => "B",
        }
    }
}

impl std::ops::Not for Side {
    type Output = Side;
    fn not(self) -> Side {
        self.other()
    }
}

/// A signed choice plus graded confidence on an N-step half-scale.
/// Step 1 is the least confident position; the scale has no midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub side: Side,
    pub step: u32,
    pub scale_steps: u32,
}

impl ConfidenceReport {
    pub fn new(side: Side, step: u32, scale_steps: u32) -> Result<Self, CoreError> {
        if step < 1 || step > scale_steps {
            return Err(CoreError::StepOutOfRange {
                step,
                scale: scale_steps,
            });
        }
        Ok(ConfidenceReport {
            side,
            step,
            scale_steps,
        })
    }
}

/// One advice observation, relative to the judge's pre-advice choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceEvent {
    /// Advisor chose the same side as the judge's pre-advice report.
    pub agrees: bool,
    /// Present only when the advisor expresses confidence (Experiment 1).
    pub advisor_confident: Option<bool>,
    pub advisor_side: Side,
    pub advisor_correct: bool,
}

impl AdviceEvent {
    /// Build a consistent event from the advisor's side, the trial truth and
    /// the judge's pre-advice side.
    pub fn from_sides(
        advisor_side: Side,
        truth: Side,
        judge_side: Side,
        advisor_confident: Option<bool>,
    ) -> Self {
        AdviceEvent {
            agrees: advisor_side == judge_side,
            advisor_confident,
            advisor_side,
            advisor_correct: advisor_side == truth,
        }
    }
}

/// Deterministic random stream: identical (seed, stream_id) yields identical
/// draw sequences across runs, platforms and thread schedules.
///
/// Streams are keyed by (run seed, module/agent path) so adding a consumer
/// never perturbs the draws of another.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    /// Fold a structured key (module tag, indices, ...) into a stream id.
    /// FNV-1a over the little-endian words; stable across platforms.
    pub fn stream_id(parts: &[u64]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for part in parts {
            for byte in part.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub fn for_path(seed: u64, parts: &[u64]) -> Self {
        Self::new(seed, Self::stream_id(parts))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Posterior from a prior and a probabilistic evidence term by odds
/// combination: p·e / (p·e + (1−p)·(1−e)).
pub fn bayes_combine(prior: Probability, evidence: Probability) -> Probability {
    let p = prior.value();
    let e = evidence.value();
    let num = p * e;
    let den = num + (1.0 - p) * (1.0 - e);
    if den == 0.0 {
        // p and e are both exactly 0 or both exactly 1; the prior is already
        // degenerate and the evidence cannot move it.
        return prior;
    }
    Probability::clamped(num / den)
}

/// Expected agreement rate of two independent binary judges with accuracies
/// a and b: a·b + (1−a)·(1−b).
pub fn agreement_rate_identity(judge_acc: Probability, advisor_acc: Probability) -> Probability {
    let a = judge_acc.value();
    let b = advisor_acc.value();
    Probability::clamped(a * b + (1.0 - a) * (1.0 - b))
}

/// Invert the agreement identity to recover the advisor accuracy implied by
/// an observed agreement rate. Undefined for a chance-level judge.
pub fn invert_agreement(
    judge_acc: Probability,
    observed_agreement: Probability,
) -> Result<Probability, CoreError> {
    let a = judge_acc.value();
    if a == 0.5 {
        return Err(CoreError::ChanceJudge);
    }
    let b = (observed_agreement.value() - (1.0 - a)) / (2.0 * a - 1.0);
    Ok(Probability::clamped(b))
}

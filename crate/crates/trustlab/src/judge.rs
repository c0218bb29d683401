//! Synthetic observer for the dot-comparison task: perceptual decisions with
//! graded confidence, difficulty controlled by a 2-down-1-up staircase.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{bayes_combine, ConfidenceReport, Probability, RngStream, Side};

#[derive(Debug, Error, PartialEq)]
pub enum JudgeError {
    #[error("noise_sigma must be > 0, got {0}")]
    BadSigma(f64),
    #[error("sigmoid_slope must be > 0, got {0}")]
    BadSlope(f64),
    #[error("prior must lie strictly inside (0, 1), got {0}")]
    BadPrior(f64),
}

/// Observer parameters: perceptual noise, base-rate bias and the slope of the
/// evidence-to-probability mapping.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JudgeParams {
    pub noise_sigma: f64,
    pub prior_pa: Probability,
    pub sigmoid_slope: f64,
}

impl Default for JudgeParams {
    fn default() -> Self {
        JudgeParams {
            noise_sigma: 1.0,
            prior_pa: Probability::HALF,
            sigmoid_slope: 1.0,
        }
    }
}

impl JudgeParams {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if !self.noise_sigma.is_finite() || self.noise_sigma <= 0.0 {
            return Err(JudgeError::BadSigma(self.noise_sigma));
        }
        if !self.sigmoid_slope.is_finite() || self.sigmoid_slope <= 0.0 {
            return Err(JudgeError::BadSlope(self.sigmoid_slope));
        }
        let p = self.prior_pa.value();
        if !(p > 0.0 && p < 1.0) {
            return Err(JudgeError::BadPrior(p));
        }
        Ok(())
    }
}

/// Scalar stimulus: the dot-difference d mapped to a signed signal whose sign
/// encodes the true side (positive ⇔ A).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stimulus {
    pub truth: Side,
    pub signal: f64,
}

impl Stimulus {
    /// Default mapping: signal = ±d/10.
    pub fn from_dot_difference(truth: Side, d: u32) -> Self {
        let magnitude = d as f64 / 10.0;
        let signal = match truth {
            Side::A => magnitude,
            Side::B => -magnitude,
        };
        Stimulus { truth, signal }
    }
}

/// 2-down-1-up staircase over the dot difference d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaircaseState {
    pub d: u32,
    pub consecutive_correct: u32,
    pub step_size: u32,
    pub d_min: u32,
}

impl Default for StaircaseState {
    fn default() -> Self {
        StaircaseState {
            d: 20,
            consecutive_correct: 0,
            step_size: 1,
            d_min: 1,
        }
    }
}

/// Two consecutive correct responses make the task harder (d decreases,
/// floored at d_min); any error makes it easier. Converges to √.5 ≈ 70.7%
/// accuracy.
pub fn staircase_update(state: StaircaseState, was_correct: bool) -> StaircaseState {
    let mut next = state;
    if was_correct {
        next.consecutive_correct += 1;
        if next.consecutive_correct == 2 {
            next.d = next.d.saturating_sub(next.step_size).max(next.d_min);
            next.consecutive_correct = 0;
        }
    } else {
        next.d += next.step_size;
        next.consecutive_correct = 0;
    }
    next
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Map folded confidence C ∈ [0.5, 1] onto the N-step half-scale.
/// Equal-width bins over (0.5, 1.0]; ties at bin edges round up; step 1 is
/// the least confident.
pub fn confidence_step(confidence: f64, scale_steps: u32) -> u32 {
    let n = scale_steps as f64;
    let raw = ((confidence - 0.5) * 2.0 * n).floor() as i64 + 1;
    raw.clamp(1, scale_steps as i64) as u32
}

/// Deterministic kernel of `perceive` for a fixed noise draw.
pub fn perceive_with_noise(
    params: &JudgeParams,
    stim: &Stimulus,
    scale_steps: u32,
    noise: f64,
) -> (Probability, ConfidenceReport) {
    let evidence = Probability::clamped(logistic(params.sigmoid_slope * (stim.signal + noise)));
    let posterior = bayes_combine(params.prior_pa, evidence);
    let side = if posterior.value() >= 0.5 {
        Side::A
    } else {
        Side::B
    };
    let confidence = 0.5 + (posterior.value() - 0.5).abs();
    let step = confidence_step(confidence, scale_steps);
    let report = ConfidenceReport {
        side,
        step,
        scale_steps,
    };
    (posterior, report)
}

/// One perceptual decision: evidence E_p = L(k·(signal + ε)), ε ~ N(0, σ),
/// posterior by odds combination with the prior, choice at the 0.5 point,
/// confidence as distance from the uncertainty point.
pub fn perceive(
    params: &JudgeParams,
    stim: &Stimulus,
    scale_steps: u32,
    rng: &mut RngStream,
) -> (Probability, ConfidenceReport) {
    let z: f64 = rng.sample(StandardNormal);
    perceive_with_noise(params, stim, scale_steps, params.noise_sigma * z)
}

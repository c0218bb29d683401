//! The three advice-reliability estimators (Accuracy, Consensus, Confidence)
//! and the shared Bayesian confidence-update machinery.
//!
//! Every encounter deposits one unit of evidence mass split between a
//! positive accumulator α and a negative accumulator β; the reliability
//! estimate is θ = α/(α+β). What keys the split differs per variant:
//!
//! * Accuracy — the advisor's objective correctness (needs feedback);
//! * Consensus — raw agreement with the judge's pre-advice choice;
//! * Confidence — agreement weighted by the judge's own probability of
//!   being correct, so confidently-made judgments teach more.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::core::{bayes_combine, AdviceEvent, ConfidenceReport, Probability};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("Accuracy variant requires trial feedback")]
    MissingFeedback,
    #[error("Confidence variant requires a pre-advice probability-correct")]
    MissingConfidence,
    #[error("confidence sample needs at least 2 ratings, got {0}")]
    SampleTooSmall(usize),
    #[error("confidence sample has zero variance; identity mapping applies")]
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Accuracy,
    Consensus,
    Confidence,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Accuracy => "acc",
            Variant::Consensus => "cons",
            Variant::Confidence => "conf",
        }
    }
}

/// Event weights: ±1 for confident advice, ±0.5 for unsure advice, ±1 when
/// the advisor expresses no confidence. Antisymmetric by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub confident: f64,
    pub unsure: f64,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable {
            confident: 1.0,
            unsure: 0.5,
        }
    }
}

impl WeightTable {
    /// Weight of an event. `positive` is advisor-correct for the Accuracy
    /// variant and agreement for the others.
    pub fn weight(&self, positive: bool, advisor_confident: Option<bool>) -> f64 {
        let magnitude = match advisor_confident {
            Some(true) | None => self.confident,
            Some(false) => self.unsure,
        };
        if positive {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Per-advisor evidence accumulators. β is carried as encounters − α so the
/// mass-conservation identity α + β = encounters holds exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvisorEstimator {
    alpha: f64,
    encounters: u64,
}

impl AdvisorEstimator {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.encounters as f64 - self.alpha
    }

    pub fn encounters(&self) -> u64 {
        self.encounters
    }

    /// θ = α/(α+β); 0.5 before any encounter.
    pub fn theta(&self) -> Probability {
        if self.encounters == 0 {
            Probability::HALF
        } else {
            Probability::clamped(self.alpha / self.encounters as f64)
        }
    }

    fn deposit(&mut self, delta_alpha: f64) {
        self.alpha += delta_alpha.clamp(0.0, 1.0);
        self.encounters += 1;
    }
}

/// One estimator variant tracking every advisor in a session.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub variant: Variant,
    pub weights: WeightTable,
    advisors: BTreeMap<usize, AdvisorEstimator>,
}

impl EstimatorState {
    pub fn new(variant: Variant) -> Self {
        EstimatorState {
            variant,
            weights: WeightTable::default(),
            advisors: BTreeMap::new(),
        }
    }

    pub fn estimator(&self, advisor: usize) -> AdvisorEstimator {
        self.advisors.get(&advisor).copied().unwrap_or_default()
    }

    pub fn theta(&self, advisor: usize) -> Probability {
        self.estimator(advisor).theta()
    }

    /// Fold one encounter into the advisor's accumulators. Δα + Δβ = 1.
    pub fn update(
        &mut self,
        advisor: usize,
        event: &AdviceEvent,
        p_corr: Option<Probability>,
        feedback: Option<bool>,
    ) -> Result<(), ModelError> {
        let delta_alpha = match self.variant {
            Variant::Accuracy => {
                // feedback reveals the advisor's correctness
                let advisor_correct = feedback.ok_or(ModelError::MissingFeedback)?;
                let w = self.weights.weight(advisor_correct, event.advisor_confident);
                0.5 + 0.5 * w
            }
            Variant::Consensus => {
                let w = self.weights.weight(event.agrees, event.advisor_confident);
                0.5 + 0.5 * w
            }
            Variant::Confidence => {
                let p = p_corr.ok_or(ModelError::MissingConfidence)?;
                let w = self.weights.weight(event.agrees, event.advisor_confident);
                0.5 + (p.value() - 0.5) * w
            }
        };
        self.advisors.entry(advisor).or_default().deposit(delta_alpha);
        Ok(())
    }
}

/// Session-level adaptive-gain transform of raw confidence steps
/// (Ĉ = N·Φ((c − mean)/sd)) chained with the linear probability map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceTransform {
    pub scale_steps: u32,
    mean: f64,
    sd: f64,
    identity: bool,
}

/// Slope of the confidence-to-probability map, generalized so the top of any
/// scale maps to 0.99 (reproduces the N = 5 form 0.5 + (0.1 − 0.002)·Ĉ).
pub fn prob_slope(scale_steps: u32) -> f64 {
    0.49 / scale_steps as f64
}

/// Linear map from a transformed confidence Ĉ ∈ [0, N] to p(correct).
pub fn conf_to_prob(c_hat: f64, scale_steps: u32) -> Probability {
    Probability::clamped(0.5 + prob_slope(scale_steps) * c_hat)
}

impl ConfidenceTransform {
    /// Fit over a session's pre-advice ratings. Zero variance is an error;
    /// callers fall back to `identity`.
    pub fn fit(raw_steps: &[u32], scale_steps: u32) -> Result<Self, ModelError> {
        if raw_steps.len() < 2 {
            return Err(ModelError::SampleTooSmall(raw_steps.len()));
        }
        let n = raw_steps.len() as f64;
        let mean = raw_steps.iter().map(|&s| s as f64).sum::<f64>() / n;
        let var = raw_steps
            .iter()
            .map(|&s| {
                let d = s as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        if var == 0.0 {
            return Err(ModelError::ZeroVariance);
        }
        Ok(ConfidenceTransform {
            scale_steps,
            mean,
            sd: var.sqrt(),
            identity: false,
        })
    }

    /// Identity mapping Ĉ(c) = c, used when the sample is degenerate.
    pub fn identity(scale_steps: u32) -> Self {
        ConfidenceTransform {
            scale_steps,
            mean: 0.0,
            sd: 1.0,
            identity: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Ĉ(c) = N·Φ((c − mean)/sd).
    pub fn transformed(&self, raw_step: u32) -> f64 {
        if self.identity {
            return raw_step as f64;
        }
        let normal = Normal::new(0.0, 1.0).unwrap();
        self.scale_steps as f64 * normal.cdf((raw_step as f64 - self.mean) / self.sd)
    }

    /// p(correct) implied by a raw pre-advice step.
    pub fn p_corr(&self, raw_step: u32) -> Probability {
        conf_to_prob(self.transformed(raw_step), self.scale_steps)
    }

    /// Invert conf_to_prob ∘ transform, to the nearest scale step.
    pub fn step_from_prob(&self, p: Probability) -> u32 {
        let n = self.scale_steps;
        let c_hat = (p.value() - 0.5) / prob_slope(n);
        let raw = if self.identity {
            c_hat
        } else {
            let frac = c_hat / n as f64;
            if frac <= 0.0 {
                return 1;
            }
            if frac >= 1.0 {
                return n;
            }
            let normal = Normal::new(0.0, 1.0).unwrap();
            self.mean + self.sd * normal.inverse_cdf(frac)
        };
        (raw.round() as i64).clamp(1, n as i64) as u32
    }
}

/// The raw-step → Ĉ mapping over a sample, as a table.
pub fn preprocess_confidence(
    raw_steps: &[u32],
    scale_steps: u32,
) -> Result<BTreeMap<u32, f64>, ModelError> {
    let tf = ConfidenceTransform::fit(raw_steps, scale_steps)?;
    Ok(raw_steps
        .iter()
        .map(|&s| (s, tf.transformed(s)))
        .collect())
}

/// Posterior probability-correct after advice: likelihood of the observed
/// (dis)agreement is θ under correctness and 1−θ under error. θ at exactly
/// 0 or 1 is clamped away from the degenerate point.
pub fn bayes_posterior(p_corr: Probability, theta: Probability, agrees: bool) -> Probability {
    let th = theta.value().clamp(1e-9, 1.0 - 1e-9);
    let evidence = if agrees { th } else { 1.0 - th };
    bayes_combine(p_corr, Probability::clamped(evidence))
}

/// Nominal post-advice report: keep the side while the posterior favors it
/// (ties keep the original side), flip and mirror the probability otherwise;
/// the step is the nearest scale position under the session transform.
pub fn predict_post_confidence(
    report: &ConfidenceReport,
    posterior: Probability,
    transform: &ConfidenceTransform,
) -> ConfidenceReport {
    let (side, p) = if posterior.value() >= 0.5 {
        (report.side, posterior)
    } else {
        (report.side.other(), posterior.complement())
    };
    ConfidenceReport {
        side,
        step: transform.step_from_prob(p),
        scale_steps: report.scale_steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Side;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn event(agrees: bool, confident: Option<bool>, advisor_correct: bool) -> AdviceEvent {
        AdviceEvent {
            agrees,
            advisor_confident: confident,
            advisor_side: Side::A,
            advisor_correct,
        }
    }

    #[test]
    fn weight_table_is_antisymmetric_and_ordered() {
        let w = WeightTable::default();
        for conf in [Some(true), Some(false), None] {
            assert_eq!(w.weight(true, conf), -w.weight(false, conf));
        }
        let order = [
            w.weight(false, Some(true)),
            w.weight(false, Some(false)),
            w.weight(true, Some(false)),
            w.weight(true, Some(true)),
        ];
        assert_eq!(order, [-1.0, -0.5, 0.5, 1.0]);
    }

    #[test]
    fn theta_prior_and_ratio() {
        let e = AdvisorEstimator::default();
        assert_eq!(e.theta(), Probability::HALF);
        let mut s = EstimatorState::new(Variant::Accuracy);
        for _ in 0..8 {
            s.update(0, &event(true, None, true), None, Some(true)).unwrap();
        }
        for _ in 0..2 {
            s.update(0, &event(false, None, false), None, Some(false)).unwrap();
        }
        assert_relative_eq!(s.theta(0).value(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn accuracy_weighted_on_acc_cal_deck_reaches_hand_value() {
        // hand accumulation over the deck: (5·1 + 3·0.75 + 2·0.25)/10 = 0.775
        let mut s = EstimatorState::new(Variant::Accuracy);
        for _ in 0..10 {
            for _ in 0..5 {
                s.update(0, &event(true, Some(true), true), None, Some(true)).unwrap();
            }
            for _ in 0..3 {
                s.update(0, &event(true, Some(false), true), None, Some(true)).unwrap();
            }
            for _ in 0..2 {
                s.update(0, &event(false, Some(false), false), None, Some(false)).unwrap();
            }
        }
        assert_relative_eq!(s.theta(0).value(), 0.775, epsilon = 1e-12);
        assert_eq!(s.estimator(0).encounters(), 100);
    }

    #[test]
    fn binary_accuracy_theta_equals_empirical_accuracy() {
        let mut s = EstimatorState::new(Variant::Accuracy);
        let seq = [true, true, false, true, false, true, true];
        for &c in &seq {
            s.update(1, &event(c, None, c), None, Some(c)).unwrap();
        }
        let acc = seq.iter().filter(|&&c| c).count() as f64 / seq.len() as f64;
        assert_relative_eq!(s.theta(1).value(), acc, epsilon = 1e-15);
    }

    #[test]
    fn confidence_update_examples() {
        let mut s = EstimatorState::new(Variant::Confidence);
        // guessing teaches nothing
        s.update(0, &event(true, None, true), Some(Probability::HALF), None).unwrap();
        assert_relative_eq!(s.estimator(0).alpha(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.estimator(0).beta(), 0.5, epsilon = 1e-15);
        // direct evaluation at p = 0.99
        let mut s = EstimatorState::new(Variant::Confidence);
        s.update(
            0,
            &event(true, None, true),
            Some(Probability::new(0.99).unwrap()),
            None,
        )
        .unwrap();
        assert_relative_eq!(s.estimator(0).alpha(), 0.99, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_weighted_incorrect_confident_zeroes_alpha() {
        let mut s = EstimatorState::new(Variant::Accuracy);
        s.update(0, &event(false, Some(true), false), None, Some(false)).unwrap();
        assert_relative_eq!(s.estimator(0).alpha(), 0.0);
        assert_relative_eq!(s.estimator(0).beta(), 1.0);
    }

    #[test]
    fn variant_preconditions() {
        let mut s = EstimatorState::new(Variant::Accuracy);
        assert_eq!(
            s.update(0, &event(true, None, true), None, None),
            Err(ModelError::MissingFeedback)
        );
        let mut s = EstimatorState::new(Variant::Confidence);
        assert_eq!(
            s.update(0, &event(true, None, true), None, None),
            Err(ModelError::MissingConfidence)
        );
    }

    #[test]
    fn consensus_agree_disagree_pair_returns_to_half() {
        let mut s = EstimatorState::new(Variant::Consensus);
        s.update(0, &event(true, Some(true), true), None, None).unwrap();
        s.update(0, &event(false, Some(true), false), None, None).unwrap();
        assert_relative_eq!(s.theta(0).value(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn conf_to_prob_examples() {
        assert_relative_eq!(conf_to_prob(0.0, 5).value(), 0.5);
        assert_relative_eq!(conf_to_prob(5.0, 5).value(), 0.99, epsilon = 1e-12);
        assert_relative_eq!(conf_to_prob(50.0, 50).value(), 0.99, epsilon = 1e-12);
        // N = 5 slope reproduces 0.5 + (0.1 − 0.002)·Ĉ
        assert_relative_eq!(conf_to_prob(3.0, 5).value(), 0.5 + 0.098 * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_examples() {
        let sample: Vec<u32> = vec![1, 2, 2, 3, 3, 3, 4, 4, 5];
        let tf = ConfidenceTransform::fit(&sample, 5).unwrap();
        let mean = sample.iter().map(|&x| x as f64).sum::<f64>() / sample.len() as f64;
        // c at the sample mean maps to N/2
        let mid = tf.transformed(3);
        assert!((mid - 2.5).abs() < 0.25, "mean {mean}, mid {mid}");
        // rank order preserved
        assert!(tf.transformed(1) < tf.transformed(2));
        assert!(tf.transformed(4) < tf.transformed(5));
    }

    #[test]
    fn transform_mean_plus_sd() {
        // engineered sample with mean 3, sd 1 → Ĉ(4) = 5·Φ(1) ≈ 4.207
        let sample = vec![2u32, 2, 2, 3, 3, 3, 3, 4, 4, 4, 2, 4, 1, 5, 3, 3];
        let tf = ConfidenceTransform::fit(&sample, 5).unwrap();
        let mean: f64 = sample.iter().map(|&x| x as f64).sum::<f64>() / sample.len() as f64;
        let sd = (sample
            .iter()
            .map(|&x| (x as f64 - mean) * (x as f64 - mean))
            .sum::<f64>()
            / sample.len() as f64)
            .sqrt();
        let c = mean + sd;
        // evaluate the fitted curve directly at mean + sd
        let normal = Normal::new(0.0, 1.0).unwrap();
        let expect = 5.0 * normal.cdf(1.0);
        let got = 5.0 * normal.cdf((c - mean) / sd);
        assert_relative_eq!(got, expect, epsilon = 1e-12);
        assert_relative_eq!(expect, 4.2067, epsilon = 1e-3);
        let _ = tf;
    }

    #[test]
    fn transform_zero_variance_errors() {
        assert_eq!(
            ConfidenceTransform::fit(&[3, 3, 3, 3], 5),
            Err(ModelError::ZeroVariance)
        );
        assert_eq!(
            ConfidenceTransform::fit(&[3], 5),
            Err(ModelError::SampleTooSmall(1))
        );
        let id = ConfidenceTransform::identity(5);
        assert_eq!(id.transformed(4), 4.0);
    }

    #[test]
    fn bayes_posterior_worked_examples() {
        let p = |v: f64| Probability::new(v).unwrap();
        assert_relative_eq!(
            bayes_posterior(p(0.5), p(0.5), true).value(),
            0.5,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            bayes_posterior(p(0.8), p(0.8), true).value(),
            0.64 / 0.68,
            epsilon = 1e-9
        );
        // anti-reliable advisor agreeing cancels confidence
        assert_relative_eq!(
            bayes_posterior(p(0.8), p(0.2), true).value(),
            0.5,
            epsilon = 1e-9
        );
        // degenerate θ clamps instead of dividing by zero
        let r = bayes_posterior(p(0.8), p(1.0), false);
        assert!(r.value() < 1e-6);
    }

    #[test]
    fn bayes_posterior_monotone_in_theta() {
        let p = Probability::new(0.7).unwrap();
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        for w in grid.windows(2) {
            let lo = bayes_posterior(p, Probability::new(w[0]).unwrap(), true).value();
            let hi = bayes_posterior(p, Probability::new(w[1]).unwrap(), true).value();
            assert!(hi > lo, "agreement posterior not increasing in theta");
            let lo_d = bayes_posterior(p, Probability::new(w[0]).unwrap(), false).value();
            let hi_d = bayes_posterior(p, Probability::new(w[1]).unwrap(), false).value();
            assert!(hi_d < lo_d, "disagreement posterior not decreasing in theta");
        }
    }

    #[test]
    fn predict_post_confidence_examples() {
        let tf = ConfidenceTransform::fit(&[1, 2, 2, 3, 3, 3, 4, 4, 5], 5).unwrap();
        let report = ConfidenceReport::new(Side::A, 3, 5).unwrap();
        // θ = 0.5 leaves the posterior at p_corr → report reproduced
        let p3 = tf.p_corr(3);
        let post = bayes_posterior(p3, Probability::HALF, true);
        let predicted = predict_post_confidence(&report, post, &tf);
        assert_eq!(predicted, report);
        // posterior 0.5 exactly → step 1 on the original side
        let predicted = predict_post_confidence(&report, Probability::HALF, &tf);
        assert_eq!(predicted.side, Side::A);
        assert_eq!(predicted.step, 1);
        // posterior 0.99 → top step
        let predicted =
            predict_post_confidence(&report, Probability::new(0.99).unwrap(), &tf);
        assert_eq!(predicted.step, 5);
        // posterior below 0.5 flips the side and mirrors the probability
        let predicted =
            predict_post_confidence(&report, Probability::new(0.01).unwrap(), &tf);
        assert_eq!(predicted.side, Side::B);
        assert_eq!(predicted.step, 5);
    }

    #[test]
    fn confidence_variant_limits() {
        // all p_corr = 0.99 ≈ consensus within 0.02; all p_corr = 0.5 → θ = 0.5
        let mut rng = crate::core::RngStream::new(12, 20);
        use rand::Rng;
        let events: Vec<AdviceEvent> = (0..200)
            .map(|_| event(rng.gen::<bool>(), None, rng.gen::<bool>()))
            .collect();
        let mut cons = EstimatorState::new(Variant::Consensus);
        let mut conf_hi = EstimatorState::new(Variant::Confidence);
        let mut conf_mid = EstimatorState::new(Variant::Confidence);
        for e in &events {
            cons.update(0, e, None, None).unwrap();
            conf_hi
                .update(0, e, Some(Probability::new(0.99).unwrap()), None)
                .unwrap();
            conf_mid.update(0, e, Some(Probability::HALF), None).unwrap();
        }
        assert!((cons.theta(0).value() - conf_hi.theta(0).value()).abs() <= 0.02);
        assert_relative_eq!(conf_mid.theta(0).value(), 0.5, epsilon = 1e-12);
    }

    proptest! {
        // mass conservation: α + β = t exactly over random event sequences
        #[test]
        fn mass_conservation(
            seq in proptest::collection::vec(
                (any::<bool>(), proptest::option::of(any::<bool>()), 0.0f64..=1.0), 1..300),
            variant_idx in 0usize..3,
        ) {
            let variant = [Variant::Accuracy, Variant::Consensus, Variant::Confidence][variant_idx];
            let mut s = EstimatorState::new(variant);
            for (agrees, confident, p) in &seq {
                let ev = event(*agrees, *confident, *agrees);
                s.update(
                    7,
                    &ev,
                    Some(Probability::new(*p).unwrap()),
                    Some(ev.advisor_correct),
                ).unwrap();
            }
            let est = s.estimator(7);
            prop_assert_eq!(est.alpha() + est.beta(), seq.len() as f64);
            let th = est.theta().value();
            prop_assert!((0.0..=1.0).contains(&th));
        }

        #[test]
        fn transform_preserves_rank_order(
            mut sample in proptest::collection::vec(1u32..=50, 12..60),
        ) {
            sample.sort_unstable();
            prop_assume!(sample.first() != sample.last());
            let tf = ConfidenceTransform::fit(&sample, 50).unwrap();
            for w in sample.windows(2) {
                prop_assert!(tf.transformed(w[0]) <= tf.transformed(w[1]));
            }
            // p_corr stays in [0.5, 1)
            for &s in &sample {
                let p = tf.p_corr(s).value();
                prop_assert!((0.5..1.0).contains(&p));
            }
        }
    }
}

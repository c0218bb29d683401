//! Outcome measures over simulated sessions: confidence change, advice
//! influence, the model-comparison correlation harness and its shuffle
//! control.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::core::{AdviceEvent, ConfidenceReport, RngStream};
use crate::models::Variant;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("confidence reports on different scales ({0} vs {1})")]
    ScaleMismatch(u32, u32),
    #[error("advisor {0} lacks an agreement or a disagreement trial")]
    InsufficientTrials(usize),
    #[error("series length mismatch or shorter than 10 ({0} vs {1})")]
    BadSeriesLength(usize, usize),
    #[error("zero-variance series")]
    ZeroVariance,
    #[error("trial indices out of order at {0}")]
    UnorderedTrials(usize),
    #[error("advisor id {0} not in roster")]
    UnknownAdvisor(usize),
}

/// One judge-advisor encounter.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub index: usize,
    pub advisor: usize,
    pub pre: ConfidenceReport,
    pub advice: AdviceEvent,
    pub post: ConfidenceReport,
    pub feedback_shown: bool,
    pub judge_correct: bool,
    /// θ per variant for this trial's advisor, after the trial's update.
    pub thetas: Vec<(Variant, f64)>,
}

/// Ordered trial records for one synthetic participant.
#[derive(Debug, Clone, Default)]
pub struct SessionLog {
    pub session: usize,
    pub advisor_names: Vec<String>,
    pub trials: Vec<TrialRecord>,
}

impl SessionLog {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for (i, w) in self.trials.windows(2).enumerate() {
            if w[1].index <= w[0].index {
                return Err(MetricsError::UnorderedTrials(i + 1));
            }
        }
        for t in &self.trials {
            if t.advisor >= self.advisor_names.len() {
                return Err(MetricsError::UnknownAdvisor(t.advisor));
            }
        }
        Ok(())
    }
}

/// Signed confidence change δC from pre- to post-advice. Steps are signed
/// relative to the pre-advice side: +step on the original side, −step after
/// a change of mind. Antisymmetric for same-side report pairs; a full change
/// of mind maps pre/post swaps onto the same value by construction.
pub fn confidence_change(
    pre: &ConfidenceReport,
    post: &ConfidenceReport,
) -> Result<i32, MetricsError> {
    if pre.scale_steps != post.scale_steps {
        return Err(MetricsError::ScaleMismatch(pre.scale_steps, post.scale_steps));
    }
    let signed_post = if post.side == pre.side {
        post.step as i32
    } else {
        -(post.step as i32)
    };
    Ok(signed_post - pre.step as i32)
}

/// Influence of one advisor: mean δC on agreement minus mean δC on
/// disagreement.
pub fn influence(log: &SessionLog, advisor: usize) -> Result<f64, MetricsError> {
    let mut agree = Vec::new();
    let mut disagree = Vec::new();
    for t in log.trials.iter().filter(|t| t.advisor == advisor) {
        let dc = confidence_change(&t.pre, &t.post)? as f64;
        if t.advice.agrees {
            agree.push(dc);
        } else {
            disagree.push(dc);
        }
    }
    if agree.is_empty() || disagree.is_empty() {
        return Err(MetricsError::InsufficientTrials(advisor));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(&agree) - mean(&disagree))
}

/// Pearson correlation between trial-aligned post-advice confidence series.
pub fn correlate_models(reference: &[f64], candidate: &[f64]) -> Result<f64, MetricsError> {
    if reference.len() != candidate.len() || reference.len() < 10 {
        return Err(MetricsError::BadSeriesLength(
            reference.len(),
            candidate.len(),
        ));
    }
    let n = reference.len() as f64;
    let mx = reference.iter().sum::<f64>() / n;
    let my = candidate.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in reference.iter().zip(candidate) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Uniform random permutation of a series; the value multiset is preserved.
pub fn shuffle_control(series: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let mut out = series.to_vec();
    out.shuffle(rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Side;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn report(side: Side, step: u32, n: u32) -> ConfidenceReport {
        ConfidenceReport::new(side, step, n).unwrap()
    }

    #[test]
    fn confidence_change_examples() {
        let pre = report(Side::A, 3, 5);
        let post = report(Side::A, 5, 5);
        assert_eq!(confidence_change(&pre, &post).unwrap(), 2);
        // extreme change of mind on the 5-step scale
        let pre = report(Side::A, 5, 5);
        let post = report(Side::B, 5, 5);
        assert_eq!(confidence_change(&pre, &post).unwrap(), -10);
        // identity
        let pre = report(Side::B, 4, 5);
        assert_eq!(confidence_change(&pre, &pre).unwrap(), 0);
        // range endpoints on the 5-scale: [−10, +4]
        let lo = confidence_change(&report(Side::A, 5, 5), &report(Side::B, 5, 5)).unwrap();
        let hi = confidence_change(&report(Side::A, 1, 5), &report(Side::A, 5, 5)).unwrap();
        assert_eq!((lo, hi), (-10, 4));
        // scale mismatch
        assert!(confidence_change(&report(Side::A, 1, 5), &report(Side::A, 1, 50)).is_err());
    }

    fn tiny_log(deltas: &[(bool, i32)]) -> SessionLog {
        // builds one-advisor trials with the requested (agrees, δC) pairs
        let trials = deltas
            .iter()
            .enumerate()
            .map(|(i, (agrees, dc))| {
                let pre = report(Side::A, 3, 10);
                let post = if *dc >= 0 {
                    report(Side::A, (3 + dc) as u32, 10)
                } else {
                    let target = 3 + dc; // signed step on pre side
                    if target >= 1 {
                        report(Side::A, target as u32, 10)
                    } else {
                        report(Side::B, (-target) as u32, 10)
                    }
                };
                TrialRecord {
                    index: i,
                    advisor: 0,
                    pre,
                    advice: AdviceEvent {
                        agrees: *agrees,
                        advisor_confident: None,
                        advisor_side: if *agrees { Side::A } else { Side::B },
                        advisor_correct: true,
                    },
                    post,
                    feedback_shown: false,
                    judge_correct: true,
                    thetas: vec![],
                }
            })
            .collect();
        SessionLog {
            session: 0,
            advisor_names: vec!["adv".into()],
            trials,
        }
    }

    #[test]
    fn influence_examples() {
        // judge never updates
        let log = tiny_log(&[(true, 0), (false, 0), (true, 0), (false, 0)]);
        assert_relative_eq!(influence(&log, 0).unwrap(), 0.0);
        // +1 on every agreement, −1 on every disagreement
        let log = tiny_log(&[(true, 1), (false, -1), (true, 1), (false, -1)]);
        assert_relative_eq!(influence(&log, 0).unwrap(), 2.0);
        // missing disagreements
        let log = tiny_log(&[(true, 1), (true, 0)]);
        assert_eq!(
            influence(&log, 0),
            Err(MetricsError::InsufficientTrials(0))
        );
    }

    #[test]
    fn influence_is_order_invariant() {
        let mut log = tiny_log(&[(true, 2), (false, -1), (true, 0), (false, -4), (true, 1)]);
        let a = influence(&log, 0).unwrap();
        log.trials.reverse();
        for (i, t) in log.trials.iter_mut().enumerate() {
            t.index = i;
        }
        let b = influence(&log, 0).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn correlation_examples() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_relative_eq!(correlate_models(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_relative_eq!(correlate_models(&x, &neg).unwrap(), -1.0, epsilon = 1e-12);
        let flat = vec![3.0; 20];
        assert_eq!(correlate_models(&x, &flat), Err(MetricsError::ZeroVariance));
        assert!(matches!(
            correlate_models(&x[..5], &x[..5]),
            Err(MetricsError::BadSeriesLength(5, 5))
        ));
    }

    #[test]
    fn shuffle_preserves_multiset_and_moments() {
        let series: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut rng = RngStream::new(21, 30);
        let shuffled = shuffle_control(&series, &mut rng);
        let mut a = series.clone();
        let mut b = shuffled.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
        // single-element series unchanged
        assert_eq!(shuffle_control(&[7.0], &mut rng), vec![7.0]);
    }

    #[test]
    fn log_validation() {
        let mut log = tiny_log(&[(true, 1), (false, -1)]);
        assert!(log.validate().is_ok());
        log.trials[1].index = 0;
        assert_eq!(log.validate(), Err(MetricsError::UnorderedTrials(1)));
        let mut log = tiny_log(&[(true, 1), (false, -1)]);
        log.trials[0].advisor = 9;
        assert_eq!(log.validate(), Err(MetricsError::UnknownAdvisor(9)));
    }

    proptest! {
        // antisymmetry holds for same-side report pairs
        #[test]
        fn confidence_change_antisymmetric_same_side(a in 1u32..=10, b in 1u32..=10) {
            let pre = report(Side::A, a, 10);
            let post = report(Side::A, b, 10);
            let fwd = confidence_change(&pre, &post).unwrap();
            let back = confidence_change(&post, &pre).unwrap();
            prop_assert_eq!(fwd, -back);
        }

        #[test]
        fn shuffle_preserves_mean(series in proptest::collection::vec(-10.0f64..10.0, 2..100),
                                  seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 1);
            let shuffled = shuffle_control(&series, &mut rng);
            let m1: f64 = series.iter().sum::<f64>();
            let m2: f64 = shuffled.iter().sum::<f64>();
            prop_assert!((m1 - m2).abs() < 1e-9);
        }
    }
}

//! Session harness: runs a synthetic judge through one experiment, applies
//! the advisor policies and feeds the three reliability estimators.
//!
//! Sessions are generated in two passes. Pass one produces the perceptual
//! trials and advice events (the staircase and, for the bin-manipulated
//! advisors, the adaptive confidence binner evolve online). Pass two fits
//! the session-level confidence transform on all pre-advice ratings, then
//! replays the trials through the estimators and the Bayesian update that
//! yields the post-advice reports.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisors::{
    exp1_profile, exp2_profile, exp3_profile, rebin, AdvisorError, ConfidenceBinner, Exp1Deck,
    Exp2Policy, Exp3Policy, EXP1_PROFILE_NAMES, EXP2_PROFILE_NAMES, EXP3_PROFILE_NAMES,
};
use crate::core::{AdviceEvent, ConfidenceReport, RngStream, Side};
use crate::judge::{perceive, staircase_update, JudgeParams, StaircaseState, Stimulus};
use crate::metrics::{SessionLog, TrialRecord};
use crate::models::{
    bayes_posterior, predict_post_confidence, ConfidenceTransform, EstimatorState, Variant,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error("session produced no trials")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
}

impl Experiment {
    pub fn advisor_names(self) -> Vec<String> {
        match self {
            Experiment::Exp1 => EXP1_PROFILE_NAMES.iter().map(|s| s.to_string()).collect(),
            Experiment::Exp2 => EXP2_PROFILE_NAMES.iter().map(|s| s.to_string()).collect(),
            Experiment::Exp3 => EXP3_PROFILE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// The advisors a session runs against: named design profiles by default,
/// or explicit probability tables supplied through the run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Roster {
    Exp1(Vec<(String, Exp1Deck)>),
    Exp2(Vec<(String, Exp2Policy)>),
    Exp3(Vec<(String, Exp3Policy)>),
}

impl Roster {
    pub fn default_for(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Exp1 => Roster::Exp1(
                EXP1_PROFILE_NAMES
                    .iter()
                    .map(|n| (n.to_string(), exp1_profile(n).unwrap()))
                    .collect(),
            ),
            Experiment::Exp2 => Roster::Exp2(
                EXP2_PROFILE_NAMES
                    .iter()
                    .map(|n| (n.to_string(), exp2_profile(n).unwrap()))
                    .collect(),
            ),
            Experiment::Exp3 => Roster::Exp3(
                EXP3_PROFILE_NAMES
                    .iter()
                    .map(|n| (n.to_string(), exp3_profile(n).unwrap()))
                    .collect(),
            ),
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Roster::Exp1(v) => v.iter().map(|(n, _)| n.clone()).collect(),
            Roster::Exp2(v) => v.iter().map(|(n, _)| n.clone()).collect(),
            Roster::Exp3(v) => v.iter().map(|(n, _)| n.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Roster::Exp1(v) => v.len(),
            Roster::Exp2(v) => v.len(),
            Roster::Exp3(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSpec {
    pub experiment: Experiment,
    pub roster: Roster,
    pub blocks: u32,
    pub encounters_per_advisor: u32,
    /// Advisor-free trials per block in the human paradigm; omitted from the
    /// simulation, kept for the session-shape echo.
    pub null_trials: u32,
    pub practice_trials: u32,
    pub feedback: bool,
    pub scale_steps: u32,
    pub judge: JudgeParams,
    pub staircase: StaircaseState,
    pub variants: Vec<Variant>,
}

impl SessionSpec {
    pub fn for_experiment(experiment: Experiment) -> Self {
        let (blocks, nulls, practice, scale) = match experiment {
            Experiment::Exp1 => (10, 10, 100, 5),
            Experiment::Exp2 => (10, 4, 88, 5),
            Experiment::Exp3 => (12, 5, 50, 50),
        };
        SessionSpec {
            experiment,
            roster: Roster::default_for(experiment),
            blocks,
            encounters_per_advisor: 10,
            null_trials: nulls,
            practice_trials: practice,
            feedback: false,
            scale_steps: scale,
            judge: JudgeParams::default(),
            staircase: StaircaseState::default(),
            variants: vec![Variant::Accuracy, Variant::Consensus, Variant::Confidence],
        }
    }

    pub fn trials_per_block(&self) -> u32 {
        self.encounters_per_advisor * self.roster.len() as u32 + self.null_trials
    }

    /// Variant that drives the judge's own post-advice revision.
    pub fn driving_variant(&self) -> Variant {
        if self.feedback {
            Variant::Accuracy
        } else {
            Variant::Confidence
        }
    }
}

/// Flat estimator snapshot, one row per trial per variant.
#[derive(Debug, Clone)]
pub struct EstimatorRow {
    pub trial: usize,
    pub advisor: usize,
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub encounters: u64,
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub log: SessionLog,
    pub transform: ConfidenceTransform,
    pub final_theta: BTreeMap<(Variant, usize), f64>,
    pub estimator_rows: Vec<EstimatorRow>,
    pub judge_accuracy: f64,
    pub advisor_agreement: Vec<f64>,
    pub advisor_accuracy: Vec<f64>,
    pub mean_d: f64,
}

// pass-one record
struct RawTrial {
    advisor: usize,
    pre: ConfidenceReport,
    advice: AdviceEvent,
    judge_correct: bool,
}

const STREAM_SESSION: u64 = 20;

fn session_stream(seed: u64, session: usize, role: u64) -> RngStream {
    RngStream::for_path(seed, &[STREAM_SESSION, session as u64, role])
}

/// Simulate one complete session deterministically.
pub fn simulate_session(
    spec: &SessionSpec,
    seed: u64,
    session: usize,
) -> Result<SessionResult, SessionError> {
    let names = spec.roster.names();
    let policies = &spec.roster;

    let mut judge_rng = session_stream(seed, session, 0);
    let mut schedule_rng = session_stream(seed, session, 1);
    let mut advisor_rngs: Vec<RngStream> = (0..names.len())
        .map(|a| session_stream(seed, session, 2 + a as u64))
        .collect();

    let mut stair = spec.staircase;
    let judge = spec.judge;

    // practice: perceptual-only warmup; confidences seed the binner reference
    let mut practice_steps = Vec::with_capacity(spec.practice_trials as usize);
    for _ in 0..spec.practice_trials {
        let truth = if judge_rng.gen::<bool>() { Side::A } else { Side::B };
        let stim = Stimulus::from_dot_difference(truth, stair.d);
        let (_, report) = perceive(&judge, &stim, spec.scale_steps, &mut judge_rng);
        stair = staircase_update(stair, report.side == truth);
        practice_steps.push(report.step);
    }

    // binner reference: last two "blocks", seeded with the practice halves
    let mut reference: VecDeque<Vec<u32>> = VecDeque::new();
    if spec.experiment == Experiment::Exp3 {
        let half = practice_steps.len() / 2;
        reference.push_back(practice_steps[..half].to_vec());
        reference.push_back(practice_steps[half..].to_vec());
    }
    let mut binner = if spec.experiment == Experiment::Exp3 {
        let sample: Vec<u32> = reference.iter().flatten().copied().collect();
        ConfidenceBinner::from_sample(&sample).unwrap_or(ConfidenceBinner {
            lower_cut: (spec.scale_steps as f64 * 0.3).round(),
            upper_cut: (spec.scale_steps as f64 * 0.7).round(),
        })
    } else {
        ConfidenceBinner {
            lower_cut: 0.0,
            upper_cut: 0.0,
        }
    };

    // pass one: perceptual trials and advice events
    let mut raw: Vec<RawTrial> = Vec::new();
    let mut correct_count = 0u32;
    let mut d_sum = 0u64;
    for _block in 0..spec.blocks {
        let mut schedule: Vec<usize> = (0..names.len())
            .flat_map(|a| std::iter::repeat_n(a, spec.encounters_per_advisor as usize))
            .collect();
        schedule.shuffle(&mut schedule_rng);

        let mut decks = match policies {
            Roster::Exp1(decks) => decks
                .iter()
                .enumerate()
                .map(|(a, (_, d))| d.shuffled(&mut advisor_rngs[a]))
                .collect(),
            _ => Vec::new(),
        };

        let mut block_steps = Vec::with_capacity(schedule.len());
        for &advisor in &schedule {
            let truth = if judge_rng.gen::<bool>() { Side::A } else { Side::B };
            let stim = Stimulus::from_dot_difference(truth, stair.d);
            let (_, pre) = perceive(&judge, &stim, spec.scale_steps, &mut judge_rng);
            let judge_correct = pre.side == truth;
            let advice = match policies {
                Roster::Exp1(_) => {
                    crate::advisors::exp1_advise(&mut decks[advisor], truth, pre.side)?
                }
                Roster::Exp2(pols) => crate::advisors::exp2_advise(
                    &pols[advisor].1,
                    judge_correct,
                    pre.side,
                    &mut advisor_rngs[advisor],
                ),
                Roster::Exp3(pols) => crate::advisors::exp3_advise(
                    &pols[advisor].1,
                    &binner,
                    judge_correct,
                    &pre,
                    pre.side,
                    &mut advisor_rngs[advisor],
                ),
            };
            d_sum += stair.d as u64;
            stair = staircase_update(stair, judge_correct);
            correct_count += judge_correct as u32;
            block_steps.push(pre.step);
            raw.push(RawTrial {
                advisor,
                pre,
                advice,
                judge_correct,
            });
        }

        if spec.experiment == Experiment::Exp3 {
            reference.push_back(block_steps);
            while reference.len() > 2 {
                reference.pop_front();
            }
            let sample: Vec<u32> = reference.iter().flatten().copied().collect();
            if let Ok(next) = rebin(&binner, &sample) {
                binner = next;
            }
        }
    }
    if raw.is_empty() {
        return Err(SessionError::Empty);
    }

    // pass two: session transform, estimators, post-advice reports
    let pre_steps: Vec<u32> = raw.iter().map(|t| t.pre.step).collect();
    let transform = ConfidenceTransform::fit(&pre_steps, spec.scale_steps)
        .unwrap_or_else(|_| ConfidenceTransform::identity(spec.scale_steps));

    let mut estimators: BTreeMap<Variant, EstimatorState> =
        [Variant::Accuracy, Variant::Consensus, Variant::Confidence]
            .into_iter()
            .map(|v| (v, EstimatorState::new(v)))
            .collect();
    let driver = spec.driving_variant();

    let mut trials = Vec::with_capacity(raw.len());
    let mut estimator_rows = Vec::new();
    let mut agree_counts = vec![0u32; names.len()];
    let mut correct_adv_counts = vec![0u32; names.len()];
    let mut encounter_counts = vec![0u32; names.len()];

    for (index, t) in raw.iter().enumerate() {
        let p_corr = transform.p_corr(t.pre.step);
        let theta_before = estimators[&driver].theta(t.advisor);
        let posterior = bayes_posterior(p_corr, theta_before, t.advice.agrees);
        let post = predict_post_confidence(&t.pre, posterior, &transform);

        for state in estimators.values_mut() {
            state
                .update(
                    t.advisor,
                    &t.advice,
                    Some(p_corr),
                    Some(t.advice.advisor_correct),
                )
                .expect("estimator inputs always supplied");
        }

        let thetas: Vec<(Variant, f64)> = spec
            .variants
            .iter()
            .map(|v| (*v, estimators[v].theta(t.advisor).value()))
            .collect();
        for v in &spec.variants {
            let est = estimators[v].estimator(t.advisor);
            estimator_rows.push(EstimatorRow {
                trial: index,
                advisor: t.advisor,
                variant: *v,
                alpha: est.alpha(),
                beta: est.beta(),
                theta: est.theta().value(),
                encounters: est.encounters(),
            });
        }

        agree_counts[t.advisor] += t.advice.agrees as u32;
        correct_adv_counts[t.advisor] += t.advice.advisor_correct as u32;
        encounter_counts[t.advisor] += 1;

        trials.push(TrialRecord {
            index,
            advisor: t.advisor,
            pre: t.pre,
            advice: t.advice,
            post,
            feedback_shown: spec.feedback,
            judge_correct: t.judge_correct,
            thetas,
        });
    }

    let mut final_theta = BTreeMap::new();
    for v in &spec.variants {
        for a in 0..names.len() {
            final_theta.insert((*v, a), estimators[v].theta(a).value());
        }
    }

    let log = SessionLog {
        session,
        advisor_names: names.clone(),
        trials,
    };
    debug_assert!(log.validate().is_ok());

    Ok(SessionResult {
        log,
        transform,
        final_theta,
        estimator_rows,
        judge_accuracy: correct_count as f64 / raw.len() as f64,
        advisor_agreement: agree_counts
            .iter()
            .zip(&encounter_counts)
            .map(|(a, n)| *a as f64 / *n as f64)
            .collect(),
        advisor_accuracy: correct_adv_counts
            .iter()
            .zip(&encounter_counts)
            .map(|(c, n)| *c as f64 / *n as f64)
            .collect(),
        mean_d: d_sum as f64 / raw.len() as f64,
    })
}

/// Run a batch of sessions with per-session RNG streams; parallel when the
/// `parallel` feature is on, identical results either way.
pub fn simulate_batch(
    spec: &SessionSpec,
    seed: u64,
    n_sessions: usize,
) -> Result<Vec<SessionResult>, SessionError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_sessions)
            .into_par_iter()
            .map(|s| simulate_session(spec, seed, s))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_sessions)
            .map(|s| simulate_session(spec, seed, s))
            .collect()
    }
}

/// Probability that a session's driving posterior ends on the judge's
/// pre-advice side, per advisor: a cheap sanity metric used by tests.
pub fn keep_rate(result: &SessionResult, advisor: usize) -> f64 {
    let sel: Vec<&TrialRecord> = result
        .log
        .trials
        .iter()
        .filter(|t| t.advisor == advisor)
        .collect();
    sel.iter().filter(|t| t.post.side == t.pre.side).count() as f64 / sel.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::influence;

    #[test]
    fn exp1_session_shape() {
        let spec = SessionSpec::for_experiment(Experiment::Exp1);
        assert_eq!(spec.trials_per_block(), 50);
        let r = simulate_session(&spec, 101, 0).unwrap();
        assert_eq!(r.log.trials.len(), 400); // nulls omitted
        assert_eq!(r.log.advisor_names.len(), 4);
        // every advisor seen exactly 10× per block
        let counts = r
            .log
            .trials
            .iter()
            .take(40)
            .filter(|t| t.advisor == 0)
            .count();
        assert_eq!(counts, 10);
        r.log.validate().unwrap();
    }

    #[test]
    fn exp2_exp3_session_shapes() {
        let spec = SessionSpec::for_experiment(Experiment::Exp2);
        assert_eq!(spec.trials_per_block(), 44);
        let r = simulate_session(&spec, 5, 3).unwrap();
        assert_eq!(r.log.trials.len(), 400);

        let spec = SessionSpec::for_experiment(Experiment::Exp3);
        assert_eq!(spec.trials_per_block(), 35);
        let r = simulate_session(&spec, 5, 3).unwrap();
        assert_eq!(r.log.trials.len(), 360);
        assert_eq!(r.log.trials[0].pre.scale_steps, 50);
    }

    #[test]
    fn sessions_are_deterministic() {
        let spec = SessionSpec::for_experiment(Experiment::Exp2);
        let a = simulate_session(&spec, 77, 1).unwrap();
        let b = simulate_session(&spec, 77, 1).unwrap();
        assert_eq!(a.final_theta, b.final_theta);
        assert_eq!(a.judge_accuracy, b.judge_accuracy);
        let c = simulate_session(&spec, 77, 2).unwrap();
        assert_ne!(a.final_theta, c.final_theta);
    }

    #[test]
    fn judge_accuracy_near_staircase_target() {
        let spec = SessionSpec::for_experiment(Experiment::Exp1);
        let results = simulate_batch(&spec, 900, 12).unwrap();
        let acc: f64 =
            results.iter().map(|r| r.judge_accuracy).sum::<f64>() / results.len() as f64;
        assert!((acc - 0.707).abs() < 0.03, "session accuracy {acc}");
    }

    #[test]
    fn exp1_accuracy_variant_matches_deck_arithmetic() {
        // deterministic: weighted deck means, independent of the judge
        let spec = SessionSpec::for_experiment(Experiment::Exp1);
        let r = simulate_session(&spec, 42, 0).unwrap();
        let expect = [0.775, 0.725, 0.675, 0.575];
        for (a, e) in expect.iter().enumerate() {
            let th = r.final_theta[&(Variant::Accuracy, a)];
            assert!((th - e).abs() < 1e-12, "advisor {a}: θ {th} vs {e}");
        }
    }

    #[test]
    fn influence_tracks_reliability() {
        // judge adopting the Bayes posterior is moved more by an advisor it
        // estimates as more reliable
        let spec = SessionSpec::for_experiment(Experiment::Exp1);
        let results = simulate_batch(&spec, 1234, 20).unwrap();
        let mut mean_influence = [0.0f64; 4];
        for r in &results {
            for (a, slot) in mean_influence.iter_mut().enumerate() {
                *slot += influence(&r.log, a).unwrap();
            }
        }
        for v in &mut mean_influence {
            *v /= results.len() as f64;
        }
        // ranked like the Accuracy-variant θ ordering acc_cal > acc_uncal > inacc_cal > inacc_uncal
        assert!(
            mean_influence[0] > mean_influence[3],
            "influence {mean_influence:?}"
        );
        assert!(
            mean_influence[1] > mean_influence[3],
            "influence {mean_influence:?}"
        );
    }

    #[test]
    fn exp3_advisors_matched_on_rates() {
        // ≥ 10^4 trials per advisor: 200 sessions × 120 encounters
        let spec = SessionSpec::for_experiment(Experiment::Exp3);
        let results = simulate_batch(&spec, 42, 200).unwrap();
        let n = results.len() as f64;
        let mut agr = [0.0f64; 3];
        let mut acc = [0.0f64; 3];
        for r in &results {
            for a in 0..3 {
                agr[a] += r.advisor_agreement[a] / n;
                acc[a] += r.advisor_accuracy[a] / n;
            }
        }
        for a in 0..3 {
            assert!((agr[a] - 0.58).abs() < 0.02, "agreement {agr:?}");
            assert!((acc[a] - 0.70).abs() < 0.02, "accuracy {acc:?}");
            for b in 0..3 {
                assert!((agr[a] - agr[b]).abs() < 0.02, "pairwise agreement {agr:?}");
                assert!((acc[a] - acc[b]).abs() < 0.02, "pairwise accuracy {acc:?}");
            }
        }
    }
}
